//! Fixed-step RK4 for the coupled state/costate extremal system and for the
//! state alone under a recorded control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model::{ControlBounds, MechModel};
use crate::pmp::{adjoint_rhs, hamiltonian, singular_u1, PmpTolerances, SingularRegion};
use crate::scalar::Real;

/// Conditions that stop [`integrate_extremal`]. A disabled flag is still
/// recorded in the trajectory metadata; integration continues when the law
/// can still be evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbortFlags {
    pub rk_violation: bool,
    pub out_of_bounds: bool,
    pub costate_degenerate: bool,
}

impl Default for AbortFlags {
    fn default() -> Self {
        Self {
            rk_violation: true,
            out_of_bounds: true,
            costate_degenerate: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Rk4,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    ZeroOrderHold,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    /// Fixed step [s].
    pub step: f64,
    /// Horizon `T` [s].
    pub horizon: f64,
    pub method: Method,
    pub abort: AbortFlags,
    pub interpolation: Interpolation,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            horizon: 0.7,
            method: Method::Rk4,
            abort: AbortFlags::default(),
            interpolation: Interpolation::ZeroOrderHold,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be finite and ≥ 0, got {}", self.horizon)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be finite and > 0, got {}", self.step)));
        }
        if self.horizon > 0.0 && self.step > self.horizon {
            return Err(Error::Config(format!("step {} exceeds horizon {}", self.step, self.horizon)));
        }
        Ok(())
    }

    /// Number of steps; the last one may be shorter than `step`.
    pub fn step_count(&self) -> usize {
        if self.horizon == 0.0 {
            return 0;
        }
        let n = self.horizon / self.step;
        let rounded = n.round();
        if (n - rounded).abs() <= 1e-9 * n.max(1.0) {
            rounded as usize
        } else {
            n.ceil() as usize
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Constructed,
    Ingested,
    Resimulated,
    Regularized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    RkViolation,
    /// `θ̇1 + θ̇2` entered its exclusion band; recorded, never fatal.
    RkVelocityBand,
    OutOfBounds,
    CostateDegenerate,
    NonFinite,
    MissingCostates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFlag {
    pub kind: FlagKind,
    pub t: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub source: Source,
    pub model_hash: String,
    #[serde(default)]
    pub config: serde_json::Value,
    #[serde(default)]
    pub flags: Vec<RunFlag>,
    /// Set when integration stopped early; the samples up to the stop are kept.
    #[serde(default)]
    pub aborted: Option<FlagKind>,
}

impl TrajectoryMeta {
    pub fn new(source: Source, model_hash: impl Into<String>) -> Self {
        Self {
            source,
            model_hash: model_hash.into(),
            config: serde_json::Value::Null,
            flags: Vec::new(),
            aborted: None,
        }
    }

    pub fn has_flag(&self, kind: FlagKind) -> bool {
        self.flags.iter().any(|f| f.kind == kind)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample<R = f64> {
    pub t: R,
    pub x: Vec<R>,
    pub u: Vec<R>,
    pub lambda: Option<Vec<R>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<R = f64> {
    pub samples: Vec<Sample<R>>,
    pub meta: TrajectoryMeta,
}

impl<R: Real> Trajectory<R> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn has_costates(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.lambda.is_some())
    }

    pub fn times(&self) -> Vec<R> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn final_state(&self) -> Option<&[R]> {
        self.samples.last().map(|s| s.x.as_slice())
    }

    /// Control channel `i` as a series.
    pub fn control(&self, i: usize) -> Vec<R> {
        self.samples.iter().map(|s| s.u[i]).collect()
    }

    /// `t_0 = 0`, strictly increasing `t`, consistent lengths, finite entries.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.samples.first() else {
            return Err(Error::Invalid("trajectory has no samples".into()));
        };
        if first.t.re() != 0.0 {
            return Err(Error::Invalid(format!("trajectory must start at t = 0, got {}", first.t)));
        }
        let (nx, nu) = (first.x.len(), first.u.len());
        let nl = first.lambda.as_ref().map(Vec::len);
        for (row, s) in self.samples.iter().enumerate() {
            if s.x.len() != nx || s.u.len() != nu || s.lambda.as_ref().map(Vec::len) != nl {
                return Err(Error::Invalid(format!("sample {row} has inconsistent vector lengths")));
            }
            if row > 0 && !(s.t > self.samples[row - 1].t) {
                return Err(Error::Monotonicity { row, t: s.t.re() });
            }
        }
        Ok(())
    }

    pub fn to_f64(&self) -> Trajectory<f64> {
        let cv = |v: &[R]| v.iter().map(|a| a.re()).collect::<Vec<_>>();
        Trajectory {
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    t: s.t.re(),
                    x: cv(&s.x),
                    u: cv(&s.u),
                    lambda: s.lambda.as_deref().map(cv),
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }
}

/// One classical RK4 step of `ẏ = rhs(t, y)`.
pub fn rk4_step<R, F>(t: R, y: &[R], h: R, mut rhs: F) -> Result<Vec<R>>
where
    R: Real,
    F: FnMut(R, &[R]) -> Result<Vec<R>>,
{
    let two = R::from_f64(2.0);
    let half = R::from_f64(0.5);
    let sixth = R::from_f64(1.0 / 6.0);
    let axpy = |a: R, k: &[R]| y.iter().zip(k).map(|(yi, ki)| *yi + a * *ki).collect::<Vec<R>>();
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + half * h, &axpy(half * h, &k1))?;
    let k3 = rhs(t + half * h, &axpy(half * h, &k2))?;
    let k4 = rhs(t + h, &axpy(h, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + h * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect())
}

struct ExtremalLaw<'a, M> {
    model: &'a M,
    tol: PmpTolerances,
    relaxed: PmpTolerances,
    abort: AbortFlags,
    bounds: &'a ControlBounds,
    c: f64,
}

impl<M: MechModel + SingularRegion> ExtremalLaw<'_, M> {
    /// `u1` from the closed form; disabled abort flags retry with relaxed
    /// thresholds and hand back a flag instead of an error.
    fn u1<R: Real>(&self, x: &[R], lambda: &[R]) -> Result<(R, Option<RunFlag>)> {
        let c = R::from_f64(self.c);
        let (u1, flag) = match singular_u1(self.model, x, lambda, c, &self.tol) {
            Ok(u) => (u, None),
            Err(e @ Error::RkViolation { .. }) if !self.abort.rk_violation => {
                (singular_u1(self.model, x, lambda, c, &self.relaxed)?, Some(flag_from(&e)))
            }
            Err(e @ Error::CostateDegenerate { .. }) if !self.abort.costate_degenerate => {
                (singular_u1(self.model, x, lambda, c, &self.relaxed)?, Some(flag_from(&e)))
            }
            Err(e) => return Err(e),
        };
        let v = u1.re();
        if !v.is_finite() {
            return Err(Error::Invalid(format!("singular control is not finite ({v})")));
        }
        if !self.bounds.contains(0, v, self.tol.bounds_slack) {
            let e = Error::OutOfBounds {
                value: v,
                lower: self.bounds.lower[0],
                upper: self.bounds.upper[0],
            };
            if self.abort.out_of_bounds {
                return Err(e);
            }
            return Ok((u1, Some(flag_from(&e))));
        }
        Ok((u1, flag))
    }

    fn rhs<R: Real>(&self, y: &[R]) -> Result<Vec<R>> {
        let n = y.len() / 2;
        let (x, lambda) = y.split_at(n);
        let (u1, _) = self.u1(x, lambda)?;
        let u = [u1, R::from_f64(self.c)];
        let mut out = self.model.controlled_field(x, &u)?;
        out.extend(adjoint_rhs(self.model, x, &u, lambda)?);
        Ok(out)
    }
}

fn flag_from(e: &Error) -> RunFlag {
    let kind = match e {
        Error::RkViolation { .. } => FlagKind::RkViolation,
        Error::OutOfBounds { .. } => FlagKind::OutOfBounds,
        Error::CostateDegenerate { .. } => FlagKind::CostateDegenerate,
        Error::MissingCostates => FlagKind::MissingCostates,
        _ => FlagKind::NonFinite,
    };
    RunFlag {
        kind,
        t: f64::NAN,
        detail: e.to_string(),
    }
}

/// Extremal with `u1` singular and `u2 ≡ c`, from `(x0, λ0)` at `t = 0`.
///
/// The closed-form `u1` is evaluated at every RK4 stage. A fatal condition
/// mid-run stops the integration; the samples so far are returned with
/// `meta.aborted` set. Only precondition failures return `Err`.
pub fn integrate_extremal<M, R>(
    model: &M,
    x0: &[R],
    lambda0: &[R],
    config: &IntegratorConfig,
    c: f64,
    bounds: &ControlBounds,
    tol: &PmpTolerances,
) -> Result<Trajectory<R>>
where
    M: MechModel + SingularRegion,
    R: Real,
{
    config.validate()?;
    let dim = model.state_dim();
    if x0.len() != dim || lambda0.len() != dim {
        return Err(Error::Invalid(format!("x0 and λ0 must have length {dim}")));
    }
    if bounds.dim() != model.dof() {
        return Err(Error::Invalid("bounds do not match the number of inputs".into()));
    }
    if !bounds.contains(1, c, tol.bounds_slack) {
        return Err(Error::OutOfBounds {
            value: c,
            lower: bounds.lower[1],
            upper: bounds.upper[1],
        });
    }
    let x0f: Vec<f64> = x0.iter().map(|v| v.re()).collect();
    let check = model.rk_check(&x0f, tol);
    if !check.contains() {
        return Err(Error::RkViolation {
            reason: format!("initial state {x0f:?} is outside R_k ({check:?})"),
        });
    }
    if norm(&lambda0.iter().map(|v| v.re()).collect::<Vec<_>>()) == 0.0 {
        return Err(Error::CostateDegenerate {
            reason: "λ0 is zero".into(),
        });
    }

    let law = ExtremalLaw {
        model,
        tol: *tol,
        relaxed: PmpTolerances {
            rk_angle: 0.0,
            costate: 0.0,
            degenerate: 0.0,
            ..*tol
        },
        abort: config.abort,
        bounds,
        c,
    };
    let mut meta = TrajectoryMeta::new(Source::Constructed, model.fingerprint());
    meta.config = serde_json::json!({
        "integrator": config,
        "u2": c,
        "bounds": bounds,
        "tolerances": tol,
    });

    // initial control doubles as the precondition check on the law itself
    let (u0, flag0) = law.u1(x0, lambda0)?;
    if let Some(mut f) = flag0 {
        f.t = 0.0;
        meta.flags.push(f);
    }
    let mut samples = vec![Sample {
        t: R::zero(),
        x: x0.to_vec(),
        u: vec![u0, R::from_f64(c)],
        lambda: Some(lambda0.to_vec()),
    }];

    let steps = config.step_count();
    let h_nominal = R::from_f64(config.step);
    let horizon = R::from_f64(config.horizon);
    let mut in_velocity_band = false;
    let mut y: Vec<R> = x0.iter().chain(lambda0).copied().collect();
    for k in 0..steps {
        let t = R::from_f64(k as f64) * h_nominal;
        let h = if k + 1 == steps { horizon - t } else { h_nominal };
        let t_next = if k + 1 == steps { horizon } else { t + h };
        let next = rk4_step(t, &y, h, |_, yy| law.rhs(yy)).and_then(|yn| {
            if yn.iter().all(|v| v.re().is_finite()) {
                let (u1, flag) = law.u1(&yn[..dim], &yn[dim..])?;
                Ok((yn, u1, flag))
            } else {
                Err(Error::Invalid("state or costate became non-finite".into()))
            }
        });
        match next {
            Ok((yn, u1, flag)) => {
                if let Some(mut f) = flag {
                    f.t = t_next.re();
                    meta.flags.push(f);
                }
                y = yn;
                let xf: Vec<f64> = y[..dim].iter().map(|v| v.re()).collect();
                let vel_ok = model.rk_check(&xf, tol).velocity;
                if !vel_ok && !in_velocity_band {
                    meta.flags.push(RunFlag {
                        kind: FlagKind::RkVelocityBand,
                        t: t_next.re(),
                        detail: "velocity part of the R_k condition fails".into(),
                    });
                }
                in_velocity_band = !vel_ok;
                samples.push(Sample {
                    t: t_next,
                    x: y[..dim].to_vec(),
                    u: vec![u1, R::from_f64(c)],
                    lambda: Some(y[dim..].to_vec()),
                });
            }
            Err(e) => {
                let mut f = flag_from(&e);
                f.t = t.re();
                meta.aborted = Some(f.kind);
                meta.flags.push(f);
                break;
            }
        }
    }
    Ok(Trajectory { samples, meta })
}

/// Piecewise control given on sample times.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSignal {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub interpolation: Interpolation,
}

impl ControlSignal {
    pub fn from_trajectory(traj: &Trajectory, interpolation: Interpolation) -> Self {
        Self {
            times: traj.times(),
            values: traj.samples.iter().map(|s| s.u.clone()).collect(),
            interpolation,
        }
    }

    /// Control on segment `[t_k, t_{k+1}]` at time `t`.
    fn on_segment(&self, k: usize, t: f64) -> Vec<f64> {
        match self.interpolation {
            Interpolation::ZeroOrderHold => self.values[k].clone(),
            Interpolation::Linear => {
                let (t0, t1) = (self.times[k], self.times[k + 1]);
                let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                self.values[k]
                    .iter()
                    .zip(&self.values[k + 1])
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    }
}

/// State-only integration under `control`. Each sample interval is split
/// into equal substeps no longer than `step`; the output has one sample per
/// control sample.
pub fn resimulate<M: MechModel>(model: &M, x0: &[f64], control: &ControlSignal, step: f64) -> Result<Trajectory> {
    if control.times.is_empty() || control.times.len() != control.values.len() {
        return Err(Error::Invalid("control signal is empty or ragged".into()));
    }
    if !(step > 0.0) {
        return Err(Error::Config(format!("step must be > 0, got {step}")));
    }
    if x0.len() != model.state_dim() {
        return Err(Error::Invalid(format!("x0 must have length {}", model.state_dim())));
    }
    let mut meta = TrajectoryMeta::new(Source::Resimulated, model.fingerprint());
    meta.config = serde_json::json!({ "step": step, "interpolation": control.interpolation });
    let mut x = x0.to_vec();
    let mut samples = Vec::with_capacity(control.times.len());
    samples.push(Sample {
        t: control.times[0],
        x: x.clone(),
        u: control.values[0].clone(),
        lambda: None,
    });
    for k in 0..control.times.len() - 1 {
        let (t0, t1) = (control.times[k], control.times[k + 1]);
        let sub = ((t1 - t0) / step * (1.0 - 1e-9)).ceil().max(1.0) as usize;
        let h = (t1 - t0) / sub as f64;
        for j in 0..sub {
            let t = t0 + j as f64 * h;
            x = rk4_step(t, &x, h, |tt, xx| model.controlled_field(xx, &control.on_segment(k, tt)))?;
        }
        if x.iter().any(|v| !v.is_finite()) {
            meta.aborted = Some(FlagKind::NonFinite);
            meta.flags.push(RunFlag {
                kind: FlagKind::NonFinite,
                t: t1,
                detail: "state became non-finite".into(),
            });
            break;
        }
        samples.push(Sample {
            t: t1,
            x: x.clone(),
            u: control.values[k + 1].clone(),
            lambda: None,
        });
    }
    Ok(Trajectory { samples, meta })
}

/// `H(t) = ⟨λ, f + g u⟩ − 1` at every sample.
pub fn hamiltonian_trace<M: MechModel, R: Real>(model: &M, traj: &Trajectory<R>) -> Result<Vec<R>> {
    traj.samples
        .iter()
        .map(|s| {
            let lambda = s.lambda.as_ref().ok_or(Error::MissingCostates)?;
            hamiltonian(model, &s.x, &s.u, lambda)
        })
        .collect()
}

/// `max_t |H(t) − H(0)|`.
pub fn hamiltonian_variation(trace: &[f64]) -> f64 {
    let Some(h0) = trace.first() else { return 0.0 };
    trace.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max)
}
