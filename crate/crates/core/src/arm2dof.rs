//! Planar two-link manipulator with gravity orthogonal to the plane of motion.
//!
//! ```text
//! M11 = m2 ℓ1² + 2 m2 ℓ1 x2 cos θ2 + m1 x1² + m2 x2² + I1 + I2
//! M12 = m2 x2² + ℓ1 m2 x2 cos θ2 (+ I2, see InertiaCoupling)
//! M22 = m2 x2² + I2
//! C1  = -ℓ1 m2 x2 sin θ2 θ̇2² - 2 ℓ1 m2 x2 sin θ2 θ̇1 θ̇2
//! C2  =  ℓ1 m2 x2 sin θ2 θ̇1²
//! ```
//! with `x_i` the centre-of-mass position along link `i`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::model::{ControlBounds, MechModel};
use crate::scalar::Scalar;

/// Which form of the off-diagonal inertia term to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InertiaCoupling {
    /// `M12 = m2 x2² + ℓ1 m2 x2 cos θ2 + I2`, the rigid-body result. The
    /// reference costate and the `θ2 ≠ kπ/2` admissible set are consistent
    /// with this form only.
    #[default]
    Standard,
    /// `M12 = m2 x2² + ℓ1 m2 x2 cos θ2`, without the distal link inertia.
    WithoutDistalInertia,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmParams {
    /// Link lengths ℓ [m].
    pub link_length: [f64; 2],
    /// Centre-of-mass positions along each link [m].
    pub com_position: [f64; 2],
    /// Link masses [kg].
    pub mass: [f64; 2],
    /// Link inertias about z [kg·m²].
    pub inertia_z: [f64; 2],
    pub coupling: InertiaCoupling,
}

impl Default for ArmParams {
    fn default() -> Self {
        Self {
            link_length: [0.5, 0.5],
            com_position: [0.5, 0.5],
            mass: [50.0, 30.0],
            inertia_z: [5.0, 3.0],
            coupling: InertiaCoupling::Standard,
        }
    }
}

impl ArmParams {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .link_length
            .iter()
            .chain(&self.com_position)
            .chain(&self.mass)
            .chain(&self.inertia_z);
        if all.clone().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Invalid(format!("arm parameters must be finite and strictly positive: {self:?}")));
        }
        Ok(())
    }
}

/// Default torque limits: |u1| ≤ 20, u2 ∈ [-10, 10].
pub fn default_bounds() -> ControlBounds {
    ControlBounds {
        lower: vec![-20.0, -10.0],
        upper: vec![20.0, 10.0],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arm2Dof {
    params: ArmParams,
}

impl Default for Arm2Dof {
    fn default() -> Self {
        Self {
            params: ArmParams::default(),
        }
    }
}

impl Arm2Dof {
    pub fn new(params: ArmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &ArmParams {
        &self.params
    }

    /// `ℓ1 m2 x2`, the factor shared by every configuration-dependent term.
    fn coupling_gain(&self) -> f64 {
        self.params.link_length[0] * self.params.mass[1] * self.params.com_position[1]
    }
}

impl MechModel for Arm2Dof {
    fn dof(&self) -> usize {
        2
    }

    fn mass_matrix<T: Scalar>(&self, q: &[T]) -> SquareMatrix<T> {
        let p = &self.params;
        let [l1, _] = p.link_length;
        let [x1, x2] = p.com_position;
        let [m1, m2] = p.mass;
        let [i1, i2] = p.inertia_z;
        let c2 = q[1].cos();
        let k = T::from_f64(self.coupling_gain());

        let m11 = T::from_f64(m2 * l1 * l1 + m1 * x1 * x1 + m2 * x2 * x2 + i1 + i2) + T::from_f64(2.0) * k * c2;
        let m12_const = match p.coupling {
            InertiaCoupling::Standard => m2 * x2 * x2 + i2,
            InertiaCoupling::WithoutDistalInertia => m2 * x2 * x2,
        };
        let m12 = T::from_f64(m12_const) + k * c2;
        let m22 = T::from_f64(m2 * x2 * x2 + i2);
        SquareMatrix::from_rows(&[vec![m11, m12], vec![m12, m22]])
    }

    fn coriolis<T: Scalar>(&self, q: &[T], qdot: &[T]) -> Vec<T> {
        let h = T::from_f64(self.coupling_gain()) * q[1].sin();
        let (w1, w2) = (qdot[0], qdot[1]);
        let c1 = -(h * w2 * w2) - T::from_f64(2.0) * h * w1 * w2;
        let c2 = h * w1 * w1;
        vec![c1, c2]
    }

    fn fingerprint(&self) -> String {
        let json = serde_json::to_string(&self.params).expect("params serialize");
        let digest = Sha256::digest(format!("arm2dof:{json}").as_bytes());
        hex::encode(&digest[..8])
    }
}
