//! Run configuration read from TOML.
//!
//! ```toml
//! [model]
//! mass = [50.0, 30.0]
//!
//! [bounds]
//! lower = [-20.0, -10.0]
//! upper = [20.0, 10.0]
//!
//! [initial]
//! x0 = [0.15707963267948966, 0.15707963267948966, 0.3, 0.5]
//! surface_costate = [-3.0, -6.0]   # (λ2, λ4), used when lambda0 is absent
//! u2 = -10.0
//!
//! [integrator]
//! step = 1e-4
//! horizon = 0.7
//!
//! [tolerances]
//! phi = 1e-6
//! ```
//!
//! Every section and key is optional; missing values take the defaults shown.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arm2dof::{default_bounds, Arm2Dof, ArmParams};
use crate::error::{Error, Result};
use crate::integrate::IntegratorConfig;
use crate::model::ControlBounds;
use crate::pmp::{singular_surface_costate, PmpTolerances};
use crate::regularize::{DetectionConfig, RegularizeConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundsSection {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Default for BoundsSection {
    fn default() -> Self {
        let b = default_bounds();
        Self {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialSection {
    pub x0: Vec<f64>,
    /// Full initial costate. Takes precedence over `surface_costate`.
    pub lambda0: Option<Vec<f64>>,
    /// `(λ2, λ4)`; the remaining components put `λ0` on the singular surface.
    pub surface_costate: [f64; 2],
    /// Constant bang value of `u2`.
    pub u2: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        let q = std::f64::consts::PI / 20.0;
        Self {
            x0: vec![q, q, 0.30, 0.5],
            lambda0: None,
            surface_costate: [-3.0, -6.0],
            u2: -10.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TolerancesSection {
    #[serde(flatten)]
    pub pmp: PmpTolerances,
    pub detection: DetectionConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifySection {
    pub samples: usize,
    pub seed: u64,
    /// Box half-widths for `(q, q̇)`: `q ∈ [−q_max, q_max]`, `q̇ ∈ [−qd_max, qd_max]`.
    pub q_max: f64,
    pub qd_max: f64,
    /// Worker threads; `0` uses the rayon default.
    pub workers: usize,
}

impl Default for CertifySection {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 0,
            q_max: std::f64::consts::PI,
            qd_max: 2.0,
            workers: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsSection {
    pub trajectory: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub classification: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ArmParams,
    pub bounds: BoundsSection,
    pub initial: InitialSection,
    pub integrator: IntegratorConfig,
    pub tolerances: TolerancesSection,
    pub certify: CertifySection,
    pub paths: PathsSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn arm(&self) -> Result<Arm2Dof> {
        Arm2Dof::new(self.model.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn bounds(&self) -> Result<ControlBounds> {
        ControlBounds::new(self.bounds.lower.clone(), self.bounds.upper.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    /// `λ0`: given explicitly, or placed on the singular surface at `x0`.
    pub fn lambda0(&self, arm: &Arm2Dof) -> Result<Vec<f64>> {
        match &self.initial.lambda0 {
            Some(l) => Ok(l.clone()),
            None => {
                let [l2, l4] = self.initial.surface_costate;
                singular_surface_costate(arm, &self.initial.x0, l2, l4)
            }
        }
    }

    pub fn regularize_config(&self) -> RegularizeConfig {
        RegularizeConfig {
            detection: self.tolerances.detection.clone(),
            pmp: self.tolerances.pmp,
            step: self.integrator.step,
            interpolation: self.integrator.interpolation,
        }
    }

    /// Checks shapes and ranges before any run.
    pub fn validate(&self) -> Result<()> {
        self.arm()?;
        let bounds = self.bounds()?;
        if bounds.dim() != 2 {
            return Err(Error::Config("bounds must have two entries".into()));
        }
        if self.initial.x0.len() != 4 || self.initial.x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("initial.x0 must hold four finite values".into()));
        }
        if let Some(l) = &self.initial.lambda0 {
            if l.len() != 4 || l.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("initial.lambda0 must hold four finite values".into()));
            }
        }
        self.integrator.validate()?;
        let t = &self.tolerances.pmp;
        for (name, v) in [
            ("phi", t.phi),
            ("rk_angle", t.rk_angle),
            ("rk_velocity", t.rk_velocity),
            ("costate", t.costate),
            ("degenerate", t.degenerate),
            ("bounds_slack", t.bounds_slack),
            ("detection.band_rel", self.tolerances.detection.band_rel),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tolerances.{name} must be finite and ≥ 0")));
            }
        }
        Ok(())
    }
}
