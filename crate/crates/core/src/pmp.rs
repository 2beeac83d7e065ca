//! Maximum-principle quantities for the minimum-time problem.
//!
//! Hamiltonian `H = ⟨λ, f + g u⟩ − 1`, adjoint `λ̇ = −(∂(f + g u)/∂x)ᵀ λ`,
//! switching functions `φ_i = ⟨λ, g_i⟩`, `φ_i′ = ⟨λ, fg_i⟩` and
//! `φ_i″ = ⟨λ, ffg_i⟩ + Σ_k β_ik φ_k`.
//!
//! Channel indices are 0-based throughout: channel `0` is `u1`, channel `1`
//! is `u2`. The closed-form law below is the `u1`-singular / `u2`-bang case of
//! a two-input model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegeom::{self, alpha_coefficients, eval_field, Letter, VectorField};
use crate::linalg::{dot, norm, singular_values, SquareMatrix};
use crate::model::{ControlBounds, MechModel};
use crate::scalar::{Real, Scalar};

/// Thresholds used by the PMP layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PmpTolerances {
    /// A channel is singular when `|φ_i| ≤ phi · max(1, ‖λ‖)`.
    pub phi: f64,
    /// Exclusion band around `θ2 = kπ/2` [rad].
    pub rk_angle: f64,
    /// Exclusion band around `θ̇1 + θ̇2 = 0` [rad/s].
    pub rk_velocity: f64,
    /// `|λ4| ≤ costate · ‖λ‖` counts as degenerate.
    pub costate: f64,
    /// Relative threshold on `α1`, `⟨b, g2⟩`, `μ` and `Δ_k`.
    pub degenerate: f64,
    /// Slack when checking a singular control against its bounds [N·m].
    pub bounds_slack: f64,
}

impl Default for PmpTolerances {
    fn default() -> Self {
        Self {
            phi: 1e-6,
            rk_angle: 1e-3,
            rk_velocity: 1e-3,
            costate: 1e-9,
            degenerate: 1e-10,
            bounds_slack: 1e-9,
        }
    }
}

/// `|φ_i|` band for singular classification at this costate.
pub fn singular_band<R: Real>(tol: &PmpTolerances, lambda: &[R]) -> f64 {
    tol.phi * 1.0_f64.max(norm_re(lambda))
}

fn norm_re<R: Scalar>(v: &[R]) -> f64 {
    norm(&v.iter().map(|a| a.re()).collect::<Vec<_>>())
}

pub fn hamiltonian<M: MechModel, R: Real>(model: &M, x: &[R], u: &[R], lambda: &[R]) -> Result<R> {
    let xdot = model.controlled_field(x, u)?;
    Ok(dot(lambda, &xdot) - R::one())
}

/// `−(∂(f + g u)/∂x)ᵀ λ`, one dual evaluation per state direction.
pub fn adjoint_rhs<M: MechModel, R: Real>(model: &M, x: &[R], u: &[R], lambda: &[R]) -> Result<Vec<R>> {
    let dim = x.len();
    let u_up: Vec<R::Up> = u.iter().map(|v| R::lift(*v)).collect();
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim {
        let seeded = x
            .iter()
            .enumerate()
            .map(|(i, xi)| R::seed(*xi, if i == k { R::one() } else { R::zero() }))
            .collect::<Option<Vec<R::Up>>>()
            .ok_or(Error::DerivativeUnavailable { needed: 1, available: 0 })?;
        let col: Vec<R> = model
            .controlled_field(&seeded, &u_up)?
            .into_iter()
            .map(|v| R::split(v).1)
            .collect();
        out.push(-dot(lambda, &col));
    }
    Ok(out)
}

/// `φ_i` and `φ_i′` for every channel.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwitchingRecord<R> {
    pub phi: Vec<R>,
    pub phi_dot: Vec<R>,
}

pub fn switching<M: MechModel, R: Real>(model: &M, x: &[R], lambda: &[R]) -> Result<SwitchingRecord<R>> {
    let n = model.dof();
    let g = model.input_columns(x)?;
    let mut phi = Vec::with_capacity(n);
    let mut phi_dot = Vec::with_capacity(n);
    for (i, gi) in g.iter().enumerate() {
        phi.push(dot(lambda, gi));
        let fg = eval_field(model, &VectorField::bracket(VectorField::f(), VectorField::g(i)), x)?;
        phi_dot.push(dot(lambda, &fg));
    }
    Ok(SwitchingRecord { phi, phi_dot })
}

/// `φ_i″ = ⟨λ, ffg_i⟩ + Σ_k β_ik(x, u) φ_k`, valid with or without singularity.
pub fn phi_ddot<M: MechModel, R: Real>(model: &M, x: &[R], lambda: &[R], u: &[R]) -> Result<Vec<R>> {
    let n = model.dof();
    let alpha = alpha_coefficients(model, x)?;
    let beta = alpha.beta(u);
    let g = model.input_columns(x)?;
    let phi: Vec<R> = g.iter().map(|gi| dot(lambda, gi)).collect();
    (0..n)
        .map(|i| {
            let ffg = liegeom::iterated_bracket(model, &[Letter::Drift, Letter::Drift, Letter::Input(i)], x)?;
            let mut acc = dot(lambda, &ffg);
            for (k, pk) in phi.iter().enumerate() {
                acc += beta.get(i, k) * *pk;
            }
            Ok(acc)
        })
        .collect()
}

/// Control selected by the sign rule on one channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ChannelControl {
    Upper(f64),
    Lower(f64),
    /// `|φ_i|` inside the singular band; the sign rule does not decide.
    Undetermined,
}

impl ChannelControl {
    pub fn value(&self) -> Option<f64> {
        match self {
            ChannelControl::Upper(v) | ChannelControl::Lower(v) => Some(*v),
            ChannelControl::Undetermined => None,
        }
    }
}

/// `u_i = M_i` if `φ_i > 0`, `u_i = L_i` if `φ_i < 0`.
pub fn bang_control<R: Real>(switch: &SwitchingRecord<R>, bounds: &ControlBounds, band: f64) -> Vec<ChannelControl> {
    switch
        .phi
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let p = p.re();
            if p.abs() <= band {
                ChannelControl::Undetermined
            } else if p > 0.0 {
                ChannelControl::Upper(bounds.upper[i])
            } else {
                ChannelControl::Lower(bounds.lower[i])
            }
        })
        .collect()
}

/// Relative threshold for "all switching data vanish".
pub const LEMMA1_TOL: f64 = 1e-12;

/// `true` iff not every `(φ_i, φ_i′)` vanishes at `(x, λ)`.
pub fn lemma1_certificate<M: MechModel, R: Real>(model: &M, x: &[R], lambda: &[R]) -> Result<bool> {
    let sw = switching(model, x, lambda)?;
    let lam = norm_re(lambda);
    if lam == 0.0 {
        return Ok(false);
    }
    let data: Vec<f64> = sw.phi.iter().chain(&sw.phi_dot).map(|v| v.re()).collect();
    let g = model.input_columns(x)?;
    let scale = g.iter().map(|c| norm_re(c)).fold(0.0, f64::max);
    Ok(norm(&data) > LEMMA1_TOL * lam * scale)
}

/// Membership in the region where the closed-form `u1` law is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RkCheck {
    /// Configuration part (the law's denominators are nonzero there).
    pub configuration: bool,
    /// Velocity part (the spanning condition on `{g1, g2, fg1, ffg1}`).
    pub velocity: bool,
}

impl RkCheck {
    pub fn contains(&self) -> bool {
        self.configuration && self.velocity
    }
}

/// Closed-form description of the admissible set for the singular law.
pub trait SingularRegion {
    fn rk_check(&self, x: &[f64], tol: &PmpTolerances) -> RkCheck;
}

impl SingularRegion for crate::arm2dof::Arm2Dof {
    /// `θ2 ≠ kπ/2` and `θ̇1 + θ̇2 ≠ 0`, each with an exclusion band.
    fn rk_check(&self, x: &[f64], tol: &PmpTolerances) -> RkCheck {
        let quarter = std::f64::consts::FRAC_PI_2;
        let theta2 = x[1];
        let dist = (theta2 - (theta2 / quarter).round() * quarter).abs();
        RkCheck {
            configuration: dist > tol.rk_angle,
            velocity: (x[2] + x[3]).abs() > tol.rk_velocity,
        }
    }
}

pub fn in_rk<M: SingularRegion>(model: &M, x: &[f64], tol: &PmpTolerances) -> bool {
    model.rk_check(x, tol).contains()
}

/// Ingredients of the `u1`-singular law at a state.
///
/// `g1 = [0, 0, μ, ν]`, `fg1 = [−μ, −ν, δ, γ]` (`δ ≡ 0` for the arm), and any
/// `λ ⟂ {g1, fg1}` decomposes as `λ = λ2·a(x) + λ4·b(x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SingularLawCoeffs<R> {
    pub mu: R,
    pub nu: R,
    pub gamma: R,
    pub delta: R,
    pub a_basis: [R; 4],
    pub b_basis: [R; 4],
    /// g2-coefficient of `g1 f g1`.
    pub alpha1: R,
    /// g2-coefficient of `g1 f g2`.
    pub alpha2: R,
    /// `⟨b(x), g2(x)⟩`.
    pub b_dot_g2: R,
    pub r: R,
    pub s: R,
    /// Bang value of `u2` used in `s`.
    pub c: R,
}

/// `μ, ν, γ, δ` and the bases `a(x)`, `b(x)`.
fn surface_basis<M: MechModel, R: Real>(model: &M, x: &[R], tol: &PmpTolerances) -> Result<(R, R, R, R, [R; 4], [R; 4])> {
    if model.dof() != 2 {
        return Err(Error::Invalid("the closed-form singular law needs a two-input model".into()));
    }
    let g1 = model.input_column(x, 0)?;
    let fg1 = eval_field(model, &VectorField::bracket(VectorField::f(), VectorField::g(0)), x)?;
    let (mu, nu) = (g1[2], g1[3]);
    let (delta, gamma) = (fg1[2], fg1[3]);
    if !(mu.re().abs() > tol.degenerate * norm_re(&g1)) {
        return Err(Error::RkViolation {
            reason: format!("μ = {:e} vanishes", mu.re()),
        });
    }
    let z = R::zero();
    let nu_mu = nu / mu;
    let a = [-nu_mu, R::one(), z, z];
    let b = [(gamma - delta * nu_mu) / mu, z, -nu_mu, R::one()];
    Ok((mu, nu, gamma, delta, a, b))
}

/// `λ2·a(x) + λ4·b(x)`: the costate on `{φ1 = 0, φ1′ = 0}` with given `λ2`, `λ4`.
pub fn singular_surface_costate<M: MechModel, R: Real>(model: &M, x: &[R], lambda2: R, lambda4: R) -> Result<Vec<R>> {
    let (_, _, _, _, a, b) = surface_basis(model, x, &PmpTolerances::default())?;
    Ok((0..4).map(|i| lambda2 * a[i] + lambda4 * b[i]).collect())
}

/// Coefficients `r(x)`, `s(x)` of `u1 = r·λ2/λ4 + s` with `u2 = c`.
///
/// From `φ1″ = ⟨λ, ffg1⟩ + (α1 u1 + α2 u2)⟨λ, g2⟩ = 0` and `⟨a, g2⟩ = 0`:
/// `r = −⟨a, ffg1⟩ / (α1 ⟨b, g2⟩)`, `s = −⟨b, ffg1⟩ / (α1 ⟨b, g2⟩) − (α2/α1)·c`.
pub fn singular_law_coeffs<M, R>(model: &M, x: &[R], c: R, tol: &PmpTolerances) -> Result<SingularLawCoeffs<R>>
where
    M: MechModel + SingularRegion,
    R: Real,
{
    let xf: Vec<f64> = x.iter().map(|v| v.re()).collect();
    if !model.rk_check(&xf, tol).configuration {
        return Err(Error::RkViolation {
            reason: format!("θ2 = {} within {} rad of a multiple of π/2", xf[1], tol.rk_angle),
        });
    }
    let (mu, nu, gamma, delta, a, b) = surface_basis(model, x, tol)?;
    let alpha = alpha_coefficients(model, x)?;
    let alpha1 = alpha.get(0, 0, 1);
    let alpha2 = alpha.get(0, 1, 1);
    let alpha_scale = (0..2)
        .flat_map(|i| (0..2).flat_map(move |j| (0..2).map(move |k| (i, j, k))))
        .map(|(i, j, k)| alpha.get(i, j, k).re().abs())
        .fold(0.0, f64::max);
    if !(alpha1.re().abs() > tol.degenerate * alpha_scale) {
        return Err(Error::RkViolation {
            reason: format!("α1 = {:e} vanishes", alpha1.re()),
        });
    }
    let g2 = model.input_column(x, 1)?;
    let b_dot_g2 = dot(&b, &g2);
    if !(b_dot_g2.re().abs() > tol.degenerate * norm_re(&b) * norm_re(&g2)) {
        return Err(Error::RkViolation {
            reason: format!("⟨b, g2⟩ = {:e} vanishes", b_dot_g2.re()),
        });
    }
    let ffg1 = liegeom::iterated_bracket(model, &[Letter::Drift, Letter::Drift, Letter::Input(0)], x)?;
    let denom = alpha1 * b_dot_g2;
    let r = -dot(&a, &ffg1) / denom;
    let s = -dot(&b, &ffg1) / denom - alpha2 / alpha1 * c;
    Ok(SingularLawCoeffs {
        mu,
        nu,
        gamma,
        delta,
        a_basis: a,
        b_basis: b,
        alpha1,
        alpha2,
        b_dot_g2,
        r,
        s,
        c,
    })
}

/// Closed-form `u1 = r(x)·λ2/λ4 + s(x)`. Not clamped; callers check bounds.
pub fn singular_u1<M, R>(model: &M, x: &[R], lambda: &[R], c: R, tol: &PmpTolerances) -> Result<R>
where
    M: MechModel + SingularRegion,
    R: Real,
{
    let lam4 = lambda[3];
    if !(lam4.re().abs() > tol.costate * norm_re(lambda)) {
        return Err(Error::CostateDegenerate {
            reason: format!("λ4 = {:e} relative to ‖λ‖ = {:e}", lam4.re(), norm_re(lambda)),
        });
    }
    let k = singular_law_coeffs(model, x, c, tol)?;
    Ok(k.r * (lambda[1] / lam4) + k.s)
}

/// The linear system `0 = ψ_k + b_kk c_k φ_k + ūᵀ A_k φ_k` for bang channel `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeneralSingularSystem<R> {
    /// Bang channel (0-based).
    pub k: usize,
    /// `⟨λ, ffg_i⟩`, `i ≠ k`.
    pub psi: Vec<R>,
    /// `α_ikk`, `i ≠ k`.
    pub b_kk: Vec<R>,
    /// `A[i][j] = α_ijk`, `i, j ≠ k`.
    pub a_k: Vec<Vec<R>>,
    pub delta_k: R,
    pub phi_k: R,
    pub c_k: R,
}

/// Singular controls `ū = (u_i)_{i≠k}` with `u_k = c_k` held at a bound.
pub fn general_singular_solve<M: MechModel, R: Real>(
    model: &M,
    x: &[R],
    lambda: &[R],
    k: usize,
    c_k: R,
    tol: &PmpTolerances,
) -> Result<(Vec<R>, GeneralSingularSystem<R>)> {
    let n = model.dof();
    if k >= n {
        return Err(Error::Invalid(format!("channel {k} out of range for n = {n}")));
    }
    let alpha = alpha_coefficients(model, x)?;
    let others: Vec<usize> = (0..n).filter(|i| *i != k).collect();
    let phi_k = dot(lambda, &model.input_column(x, k)?);
    let mut psi = Vec::with_capacity(n - 1);
    for &i in &others {
        let ffg = liegeom::iterated_bracket(model, &[Letter::Drift, Letter::Drift, Letter::Input(i)], x)?;
        psi.push(dot(lambda, &ffg));
    }
    let b_kk: Vec<R> = others.iter().map(|&i| alpha.get(i, k, k)).collect();
    let a_k: Vec<Vec<R>> = others
        .iter()
        .map(|&i| others.iter().map(|&j| alpha.get(i, j, k)).collect())
        .collect();
    let a_mat = SquareMatrix::from_rows(&a_k);
    let delta_k = a_mat.determinant();
    let system = GeneralSingularSystem {
        k,
        psi,
        b_kk,
        a_k,
        delta_k,
        phi_k,
        c_k,
    };

    let alpha_scale = (0..n * n * n)
        .map(|idx| alpha.get(idx / (n * n), (idx / n) % n, idx % n).re().abs())
        .fold(0.0, f64::max);
    if !(delta_k.re().abs() > tol.degenerate * alpha_scale.powi((n - 1) as i32)) {
        return Err(Error::DegenerateSystem {
            channel: k,
            reason: format!("Δ_k = {:e}", delta_k.re()),
        });
    }
    if !(phi_k.re().abs() > singular_band(tol, lambda)) {
        return Err(Error::DegenerateSystem {
            channel: k,
            reason: format!("φ_k = {:e} inside the singular band", phi_k.re()),
        });
    }
    // Row i: Σ_j α_ijk φ_k u_j = −(ψ_i + α_ikk c_k φ_k)
    let mut lhs = a_mat;
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            lhs[(i, j)] *= phi_k;
        }
    }
    let rhs: Vec<R> = system
        .psi
        .iter()
        .zip(&system.b_kk)
        .map(|(p, b)| -(*p + *b * c_k * phi_k))
        .collect();
    let u_bar = lhs.solve(&rhs)?;
    Ok((u_bar, system))
}

/// Smallest relevant singular value of `{g_i} ∪ {fg_i, i≠k} ∪ {ffg_i, i≠k}`.
pub fn sk_rank<M: MechModel, R: Real>(model: &M, x: &[R], k: usize) -> Result<f64> {
    let n = model.dof();
    let mut cols: Vec<Vec<R>> = model.input_columns(x)?;
    for i in (0..n).filter(|i| *i != k) {
        cols.push(liegeom::iterated_bracket(model, &[Letter::Drift, Letter::Input(i)], x)?);
        cols.push(liegeom::iterated_bracket(model, &[Letter::Drift, Letter::Drift, Letter::Input(i)], x)?);
    }
    let cols: Vec<Vec<f64>> = cols.iter().map(|c| c.iter().map(|v| v.re()).collect()).collect();
    let sv = singular_values(&cols);
    let rank_slots = (2 * n).min(cols.len());
    Ok(if sv.len() >= rank_slots && rank_slots == 2 * n { sv[rank_slots - 1] } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm2dof::{default_bounds, Arm2Dof};
    use std::f64::consts::PI;

    const X0: [f64; 4] = [PI / 20.0, PI / 20.0, 0.30, 0.5];

    fn reference_lambda(arm: &Arm2Dof) -> Vec<f64> {
        singular_surface_costate(arm, &X0, -3.0, -6.0).unwrap()
    }

    #[test]
    fn hamiltonian_of_zero_costate() {
        let arm = Arm2Dof::default();
        assert_eq!(hamiltonian(&arm, &X0, &[3.0, -1.0], &[0.0; 4]).unwrap(), -1.0);
    }

    #[test]
    fn adjoint_is_linear_in_costate() {
        let arm = Arm2Dof::default();
        let u = [4.0, -10.0];
        assert!(adjoint_rhs(&arm, &X0, &u, &[0.0; 4]).unwrap().iter().all(|v| *v == 0.0));
        let l = [1.0, -2.0, 0.5, 3.0];
        let a = adjoint_rhs(&arm, &X0, &u, &l).unwrap();
        let l2: Vec<f64> = l.iter().map(|v| 2.5 * v).collect();
        let b = adjoint_rhs(&arm, &X0, &u, &l2).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((2.5 * p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn switching_scales_linearly() {
        let arm = Arm2Dof::default();
        let l = [1.0, -2.0, 0.5, 3.0];
        let l2: Vec<f64> = l.iter().map(|v| 2.0 * v).collect();
        let a = switching(&arm, &X0, &l).unwrap();
        let b = switching(&arm, &X0, &l2).unwrap();
        for i in 0..2 {
            assert_eq!(2.0 * a.phi[i], b.phi[i]);
            assert_eq!(2.0 * a.phi_dot[i], b.phi_dot[i]);
        }
        let z = switching(&arm, &X0, &[0.0; 4]).unwrap();
        assert!(z.phi.iter().chain(&z.phi_dot).all(|v| *v == 0.0));
    }

    #[test]
    fn bang_rule_examples() {
        let b = default_bounds();
        let sw = |phi: [f64; 2]| SwitchingRecord {
            phi: phi.to_vec(),
            phi_dot: vec![0.0, 0.0],
        };
        assert_eq!(
            bang_control(&sw([1.0, -1.0]), &b, 1e-9),
            vec![ChannelControl::Upper(20.0), ChannelControl::Lower(-10.0)]
        );
        assert_eq!(
            bang_control(&sw([0.0, -1.0]), &b, 1e-9),
            vec![ChannelControl::Undetermined, ChannelControl::Lower(-10.0)]
        );
        assert_eq!(
            bang_control(&sw([1e-15, 1.0]), &b, 1e-9),
            vec![ChannelControl::Undetermined, ChannelControl::Upper(10.0)]
        );
    }

    #[test]
    fn lemma1_examples() {
        let arm = Arm2Dof::default();
        assert!(!lemma1_certificate(&arm, &X0, &[0.0; 4]).unwrap());
        assert!(lemma1_certificate(&arm, &X0, &[0.3, -1.0, 2.0, 0.1]).unwrap());
        // λ ⟂ {g1, fg1}: channel 2 keeps the certificate alive
        let lam = reference_lambda(&arm);
        let sw = switching(&arm, &X0, &lam).unwrap();
        assert!(sw.phi[0].abs() < 1e-14 && sw.phi_dot[0].abs() < 1e-14);
        assert!(sw.phi[1].abs() > 0.1);
        assert!(lemma1_certificate(&arm, &X0, &lam).unwrap());
    }

    #[test]
    fn surface_basis_orthogonality() {
        let arm = Arm2Dof::default();
        let k = singular_law_coeffs(&arm, &X0, -10.0, &PmpTolerances::default()).unwrap();
        let g1 = arm.input_column(&X0, 0).unwrap();
        let g2 = arm.input_column(&X0, 1).unwrap();
        let fg1 = liegeom::iterated_bracket(&arm, &[Letter::Drift, Letter::Input(0)], &X0).unwrap();
        for basis in [&k.a_basis, &k.b_basis] {
            assert!(dot(basis, &g1).abs() <= 1e-12);
            assert!(dot(basis, &fg1).abs() <= 1e-12);
        }
        assert!(dot(&k.a_basis, &g2).abs() <= 1e-12);
        assert!(k.delta.abs() < 1e-15);
        assert!((k.mu - g1[2]).abs() == 0.0 && (k.nu - g1[3]).abs() == 0.0);
        // ⟨b, g2⟩ = det L / L11 = 1 / M22
        assert!((k.b_dot_g2 - 1.0 / 10.5).abs() < 1e-14);
    }

    #[test]
    fn closed_form_is_admissible_at_reference_state() {
        let arm = Arm2Dof::default();
        let lam = reference_lambda(&arm);
        let u1 = singular_u1(&arm, &X0, &lam, -10.0, &PmpTolerances::default()).unwrap();
        assert!(u1.abs() <= 20.0, "u1 = {u1}");
    }

    #[test]
    fn closed_form_depends_only_on_costate_ratio() {
        let arm = Arm2Dof::default();
        let tol = PmpTolerances::default();
        let lam = reference_lambda(&arm);
        let u = singular_u1(&arm, &X0, &lam, -10.0, &tol).unwrap();
        for s in [0.01, 3.0, 1e4] {
            let scaled: Vec<f64> = lam.iter().map(|v| s * v).collect();
            let us = singular_u1(&arm, &X0, &scaled, -10.0, &tol).unwrap();
            assert!((u - us).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_rejects_degenerate_costate_and_right_angle() {
        let arm = Arm2Dof::default();
        let tol = PmpTolerances::default();
        let err = singular_u1(&arm, &X0, &[1.0, 2.0, 3.0, 0.0], -10.0, &tol);
        assert!(matches!(err, Err(Error::CostateDegenerate { .. })));
        let x = [0.2, PI / 2.0, 0.3, 0.5];
        assert!(matches!(singular_law_coeffs(&arm, &x, -10.0, &tol), Err(Error::RkViolation { .. })));
    }

    #[test]
    fn general_solve_agrees_with_closed_form() {
        let arm = Arm2Dof::default();
        let tol = PmpTolerances::default();
        let lam = reference_lambda(&arm);
        let (u_bar, sys) = general_singular_solve(&arm, &X0, &lam, 1, -10.0, &tol).unwrap();
        let u1 = singular_u1(&arm, &X0, &lam, -10.0, &tol).unwrap();
        assert!((u_bar[0] - u1).abs() < 1e-8, "{} vs {}", u_bar[0], u1);
        assert_eq!(sys.psi.len(), 1);
        let dd = phi_ddot(&arm, &X0, &lam, &[u_bar[0], -10.0]).unwrap();
        assert!(dd[0].abs() < 1e-8);
    }

    #[test]
    fn general_solve_channel_one_is_degenerate() {
        let arm = Arm2Dof::default();
        let lam = [0.3, -1.0, 2.0, 0.1];
        let err = general_singular_solve(&arm, &X0, &lam, 0, 20.0, &PmpTolerances::default());
        assert!(matches!(err, Err(Error::DegenerateSystem { channel: 0, .. })));
    }

    #[test]
    fn rk_membership_examples() {
        let arm = Arm2Dof::default();
        let tol = PmpTolerances::default();
        assert!(in_rk(&arm, &X0, &tol));
        assert!(!in_rk(&arm, &[0.0, PI / 2.0, 0.3, 0.5], &tol));
        assert!(!in_rk(&arm, &[0.0, 0.4, 0.3, -0.3], &tol));
        assert!(!in_rk(&arm, &[0.0, -PI, 0.3, 0.5], &tol));
        assert!(in_rk(&arm, &[0.0, PI / 2.0 + 2e-3, 0.3, 0.5], &tol));
    }

    #[test]
    fn sk_rank_tracks_velocity_condition() {
        let arm = Arm2Dof::default();
        assert!(sk_rank(&arm, &X0, 1).unwrap() > 1e-8);
        assert!(sk_rank(&arm, &[0.1, 0.6, 0.7, -0.7], 1).unwrap() < 1e-12);
    }
}
