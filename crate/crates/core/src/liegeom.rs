//! Lie brackets of the drift and input fields, evaluated with nested duals.
//!
//! `[a, b](x) = Db(x)·a(x) − Da(x)·b(x)`. Each directional derivative seeds one
//! fresh infinitesimal, so a right-nested word of length `p` needs `p − 1`
//! levels of [`Dual`](crate::scalar::Dual) above the base scalar. The base
//! types carry three levels, which covers words up to `fffg_i`.
//!
//! Words follow the right-nested convention `X1X2…Xp = [X1,[X2,[…,[Xp−1,Xp]…]]]`,
//! written as e.g. `fg1`, `g1fg2`, `fffg2` (inputs are 1-based in text form,
//! 0-based in code).

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, norm, SquareMatrix};
use crate::model::MechModel;
use crate::scalar::{Real, Tower};

/// A letter of a bracket word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    Drift,
    /// Input field `g_i`, 0-based.
    Input(usize),
}

/// A vector field built from the model's drift and input columns.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum VectorField {
    Drift,
    Input(usize),
    Bracket(Box<VectorField>, Box<VectorField>),
}

impl VectorField {
    pub fn f() -> Self {
        VectorField::Drift
    }

    pub fn g(i: usize) -> Self {
        VectorField::Input(i)
    }

    pub fn bracket(a: VectorField, b: VectorField) -> Self {
        VectorField::Bracket(Box::new(a), Box::new(b))
    }

    /// Right-nested bracket of a non-empty word.
    pub fn word(letters: &[Letter]) -> Result<Self> {
        let (last, rest) = letters
            .split_last()
            .ok_or_else(|| Error::Invalid("empty bracket word".into()))?;
        let leaf = |l: &Letter| match *l {
            Letter::Drift => VectorField::Drift,
            Letter::Input(i) => VectorField::Input(i),
        };
        Ok(rest.iter().rev().fold(leaf(last), |acc, l| Self::bracket(leaf(l), acc)))
    }

    /// Derivative nesting levels required to evaluate this field.
    pub fn depth(&self) -> usize {
        match self {
            VectorField::Drift | VectorField::Input(_) => 0,
            VectorField::Bracket(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorField::Drift => write!(f, "f"),
            VectorField::Input(i) => write!(f, "g{}", i + 1),
            VectorField::Bracket(a, b) => match **a {
                // right-nested words print compactly
                VectorField::Drift | VectorField::Input(_) if is_word(b) => write!(f, "{a}{b}"),
                _ => write!(f, "[{a},{b}]"),
            },
        }
    }
}

fn is_word(v: &VectorField) -> bool {
    match v {
        VectorField::Drift | VectorField::Input(_) => true,
        VectorField::Bracket(a, b) => matches!(**a, VectorField::Drift | VectorField::Input(_)) && is_word(b),
    }
}

impl FromStr for VectorField {
    type Err = Error;

    /// Parse a word such as `fg1`, `g1fg2`, `fffg_2`.
    fn from_str(s: &str) -> Result<Self> {
        let mut letters = Vec::new();
        let mut chars = s.trim().chars().peekable();
        while let Some(c) = chars.next() {
            match c {
                'f' => letters.push(Letter::Drift),
                'g' => {
                    if chars.peek() == Some(&'_') {
                        chars.next();
                    }
                    let mut digits = String::new();
                    while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                        digits.push(*d);
                        chars.next();
                    }
                    let i: usize = digits
                        .parse()
                        .map_err(|_| Error::Invalid(format!("input letter without index in '{s}'")))?;
                    if i == 0 {
                        return Err(Error::Invalid(format!("input indices are 1-based in '{s}'")));
                    }
                    letters.push(Letter::Input(i - 1));
                }
                _ => return Err(Error::Invalid(format!("unexpected character '{c}' in bracket word '{s}'"))),
            }
        }
        Self::word(&letters)
    }
}

/// Evaluate a field at `x`.
pub fn eval_field<M: MechModel, T: Tower>(model: &M, field: &VectorField, x: &[T]) -> Result<Vec<T>> {
    match field {
        VectorField::Drift => model.drift(x),
        VectorField::Input(i) => model.input_column(x, *i),
        VectorField::Bracket(a, b) => {
            let needed = field.depth();
            if needed > T::HEADROOM {
                return Err(Error::DerivativeUnavailable {
                    needed,
                    available: T::HEADROOM,
                });
            }
            let av = eval_field(model, a, x)?;
            let bv = eval_field(model, b, x)?;
            let db_a = directional(model, b, x, &av)?;
            let da_b = directional(model, a, x, &bv)?;
            Ok(db_a.into_iter().zip(da_b).map(|(p, q)| p - q).collect())
        }
    }
}

/// `D field(x) · v` via one dual level.
pub fn directional<M: MechModel, T: Tower>(model: &M, field: &VectorField, x: &[T], v: &[T]) -> Result<Vec<T>> {
    let seeded = x
        .iter()
        .zip(v)
        .map(|(xi, vi)| T::seed(*xi, *vi))
        .collect::<Option<Vec<T::Up>>>()
        .ok_or(Error::DerivativeUnavailable {
            needed: field.depth() + 1,
            available: T::HEADROOM,
        })?;
    let y = eval_field::<M, T::Up>(model, field, &seeded)?;
    Ok(y.into_iter().map(|yi| T::split(yi).1).collect())
}

pub fn lie_bracket<M: MechModel, R: Real>(model: &M, a: &VectorField, b: &VectorField, x: &[R]) -> Result<Vec<R>> {
    eval_field(model, &VectorField::bracket(a.clone(), b.clone()), x)
}

pub fn iterated_bracket<M: MechModel, R: Real>(model: &M, word: &[Letter], x: &[R]) -> Result<Vec<R>> {
    eval_field(model, &VectorField::word(word)?, x)
}

/// Relative tolerance for the span membership of `g_i f g_j`.
pub fn span_tolerance<R: Real>() -> f64 {
    1e-9_f64.max(1e3 * R::EPSILON)
}

/// Coefficients `α_ijk` with `g_i f g_j = Σ_k α_ijk g_k`.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaTensor<R> {
    n: usize,
    data: Vec<R>,
    /// Largest relative reconstruction residual over all `(i, j)`.
    pub max_residual: f64,
}

impl<R: Real> AlphaTensor<R> {
    pub fn dof(&self) -> usize {
        self.n
    }

    /// `α_ijk`, 0-based.
    pub fn get(&self, i: usize, j: usize, k: usize) -> R {
        self.data[(i * self.n + j) * self.n + k]
    }

    /// `β_ik = Σ_j u_j α_ijk`.
    pub fn beta(&self, u: &[R]) -> BetaMatrix<R> {
        let n = self.n;
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let mut acc = R::zero();
                for (j, uj) in u.iter().enumerate() {
                    acc += *uj * self.get(i, j, k);
                }
                m[(i, k)] = acc;
            }
        }
        BetaMatrix(m)
    }
}

/// `β_ik(x, u)`, linear in `u`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaMatrix<R>(pub SquareMatrix<R>);

impl<R: Real> BetaMatrix<R> {
    pub fn get(&self, i: usize, k: usize) -> R {
        self.0[(i, k)]
    }
}

/// Solve for `α_ijk` at `x` and check the reconstruction.
///
/// The bottom block of `g_i f g_j` equals `L(q)·α_ij·`, hence `α_ij· = M(q)·bottom`.
pub fn alpha_coefficients<M: MechModel, R: Real>(model: &M, x: &[R]) -> Result<AlphaTensor<R>> {
    let n = model.dof();
    let mass = model.mass_matrix(&x[..n]);
    let g = model.input_columns(x)?;
    let tol = span_tolerance::<R>();
    let mut data = Vec::with_capacity(n * n * n);
    let mut max_residual = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let field = VectorField::word(&[Letter::Input(i), Letter::Drift, Letter::Input(j)])?;
            let v = eval_field(model, &field, x)?;
            let coeffs = mass.mul_vec(&v[n..]);
            let mut recon = vec![R::zero(); 2 * n];
            for (k, ck) in coeffs.iter().enumerate() {
                for (r, gk) in recon.iter_mut().zip(&g[k]) {
                    *r += *ck * *gk;
                }
            }
            let diff: Vec<f64> = v.iter().zip(&recon).map(|(a, b)| (*a - *b).re()).collect();
            let scale = norm(&v.iter().map(|a| a.re()).collect::<Vec<_>>());
            let residual = if scale > 0.0 { norm(&diff) / scale } else { norm(&diff) };
            if !(residual <= tol) {
                return Err(Error::SpanViolation {
                    word: field.to_string(),
                    residual,
                });
            }
            max_residual = max_residual.max(residual);
            data.extend(coeffs);
        }
    }
    Ok(AlphaTensor { n, data, max_residual })
}

fn to_f64_cols<R: Real>(cols: &[Vec<R>]) -> Vec<Vec<f64>> {
    cols.iter().map(|c| c.iter().map(|v| v.re()).collect()).collect()
}

/// Smallest singular value of `[g_1 … g_n, fg_1 … fg_n]`.
pub fn frame_rank<M: MechModel, R: Real>(model: &M, x: &[R]) -> Result<f64> {
    let n = model.dof();
    let mut cols = model.input_columns(x)?;
    for i in 0..n {
        cols.push(eval_field(model, &VectorField::bracket(VectorField::f(), VectorField::g(i)), x)?);
    }
    Ok(linalg::smallest_singular_value(&to_f64_cols(&cols)))
}

/// Outcome of the linear-independence test defining the set `B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BSetCertificate {
    pub independent: bool,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `max_i |⟨dp1, v_i⟩| / (‖dp1‖·‖v_i‖)` over the four vectors, with `p1`
    /// the momentum conjugate to `q1`. Near zero when `q1` is cyclic, in which
    /// case the four vectors cannot be independent.
    pub momentum_annihilation: f64,
}

impl BSetCertificate {
    pub fn condition_ratio(&self) -> f64 {
        if self.sigma_max > 0.0 {
            self.sigma_min / self.sigma_max
        } else {
            0.0
        }
    }
}

/// Relative singular-value threshold below which the four vectors count as dependent.
pub const B_SET_RANK_TOL: f64 = 1e-9;

/// Independence of `{g2, fg2, ffg2, fffg2 + c·g1ffg2}` for a two-input model.
pub fn b_set_certificate<M: MechModel, R: Real>(model: &M, x: &[R], c: R) -> Result<BSetCertificate> {
    if model.dof() != 2 {
        return Err(Error::Invalid("the set B certificate is defined for two-input models".into()));
    }
    let (g1, g2) = (Letter::Input(0), Letter::Input(1));
    let f = Letter::Drift;
    let v1 = iterated_bracket(model, &[g2], x)?;
    let v2 = iterated_bracket(model, &[f, g2], x)?;
    let v3 = iterated_bracket(model, &[f, f, g2], x)?;
    let fffg2 = iterated_bracket(model, &[f, f, f, g2], x)?;
    let g1ffg2 = iterated_bracket(model, &[g1, f, f, g2], x)?;
    let v4: Vec<R> = fffg2.iter().zip(&g1ffg2).map(|(a, b)| *a + c * *b).collect();
    let cols = to_f64_cols(&[v1, v2, v3, v4]);
    let sv = linalg::singular_values(&cols);
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    let independent = sigma_max > 0.0 && sigma_min > B_SET_RANK_TOL * sigma_max;
    let dp: Vec<f64> = momentum_covector(model, x, 0)?.iter().map(|v| v.re()).collect();
    let momentum_annihilation = cols
        .iter()
        .map(|v| {
            let scale = linalg::norm(&dp) * linalg::norm(v);
            if scale > 0.0 {
                linalg::dot(&dp, v).abs() / scale
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok(BSetCertificate {
        independent,
        sigma_min,
        sigma_max,
        momentum_annihilation,
    })
}

/// Differential of the generalized momentum `p_j = (M(q) q̇)_j`.
///
/// If `M` and the bias terms do not depend on `q_j`, then `ṗ_j = u_j`, and
/// `dp_j` annihilates every input field other than `g_j` together with all
/// their brackets with `f` and `g_j`.
pub fn momentum_covector<M: MechModel, R: Real>(model: &M, x: &[R], j: usize) -> Result<Vec<R>> {
    let n = model.dof();
    if x.len() != 2 * n || j >= n {
        return Err(Error::Invalid(format!("momentum index {j} or state length {} invalid", x.len())));
    }
    (0..2 * n)
        .map(|k| {
            let seeded = x
                .iter()
                .enumerate()
                .map(|(i, v)| R::seed(*v, if i == k { R::one() } else { R::zero() }))
                .collect::<Option<Vec<R::Up>>>()
                .ok_or(Error::DerivativeUnavailable { needed: 1, available: 0 })?;
            let m = model.mass_matrix(&seeded[..n]);
            let p = (0..n).fold(R::lift(R::zero()), |acc, c| acc + m[(j, c)] * seeded[n + c]);
            Ok(R::split(p).1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm2dof::Arm2Dof;
    use std::f64::consts::PI;

    const X0: [f64; 4] = [PI / 20.0, PI / 20.0, 0.30, 0.5];

    #[test]
    fn parse_and_display_words() {
        let w: VectorField = "g1fg2".parse().unwrap();
        assert_eq!(w.to_string(), "g1fg2");
        assert_eq!(w.depth(), 2);
        let w: VectorField = "fffg_2".parse().unwrap();
        assert_eq!(w.to_string(), "fffg2");
        assert_eq!(w.depth(), 3);
        assert_eq!("f".parse::<VectorField>().unwrap(), VectorField::Drift);
        assert!("g0".parse::<VectorField>().is_err());
        assert!("fh".parse::<VectorField>().is_err());
        assert!("".parse::<VectorField>().is_err());
        let nested = VectorField::bracket(VectorField::bracket(VectorField::f(), VectorField::g(0)), VectorField::g(1));
        assert_eq!(nested.to_string(), "[fg1,g2]");
    }

    #[test]
    fn self_bracket_vanishes() {
        let arm = Arm2Dof::default();
        let fg1: VectorField = "fg1".parse().unwrap();
        let v = lie_bracket(&arm, &fg1, &fg1, &X0).unwrap();
        assert!(v.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn input_fields_commute() {
        let arm = Arm2Dof::default();
        let v = lie_bracket(&arm, &VectorField::g(0), &VectorField::g(1), &X0).unwrap();
        assert!(norm(&v) < 1e-14);
    }

    #[test]
    fn single_letter_word_is_plain_field() {
        let arm = Arm2Dof::default();
        assert_eq!(iterated_bracket(&arm, &[Letter::Drift], &X0).unwrap(), arm.drift(&X0).unwrap());
        assert_eq!(iterated_bracket(&arm, &[Letter::Input(1)], &X0).unwrap(), arm.input_column(&X0, 1).unwrap());
    }

    #[test]
    fn fg_top_block_is_minus_input_column() {
        let arm = Arm2Dof::default();
        for i in 0..2 {
            let fg = iterated_bracket(&arm, &[Letter::Drift, Letter::Input(i)], &X0).unwrap();
            let g = arm.input_column(&X0, i).unwrap();
            assert!((fg[0] + g[2]).abs() < 1e-15 && (fg[1] + g[3]).abs() < 1e-15);
        }
    }

    #[test]
    fn word_of_length_five_exceeds_depth() {
        let arm = Arm2Dof::default();
        let err = iterated_bracket(&arm, &[Letter::Drift; 4].iter().copied().chain([Letter::Input(0)]).collect::<Vec<_>>(), &X0);
        assert!(matches!(err, Err(Error::DerivativeUnavailable { needed: 4, available: 3 })));
        // length four is fine
        assert!(iterated_bracket(&arm, &[Letter::Drift, Letter::Drift, Letter::Drift, Letter::Input(1)], &X0).is_ok());
    }

    #[test]
    fn alpha_first_index_vanishes_and_is_symmetric() {
        let arm = Arm2Dof::default();
        let a = alpha_coefficients(&arm, &X0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(a.get(i, j, 0).abs() < 1e-12);
                for k in 0..2 {
                    assert!((a.get(i, j, k) - a.get(j, i, k)).abs() < 1e-12);
                }
            }
        }
        assert!(a.max_residual < 1e-12);
    }

    #[test]
    fn alpha_matches_two_by_two_least_squares() {
        // g1fg2 = a1 g1 + a2 g2 on the bottom block, solved directly.
        let arm = Arm2Dof::default();
        let v = iterated_bracket(&arm, &[Letter::Input(0), Letter::Drift, Letter::Input(1)], &X0).unwrap();
        let g = arm.input_columns(&X0).unwrap();
        let basis = SquareMatrix::from_rows(&[vec![g[0][2], g[1][2]], vec![g[0][3], g[1][3]]]);
        let ab = basis.solve(&v[2..]).unwrap();
        let a = alpha_coefficients(&arm, &X0).unwrap();
        assert!((ab[0] - a.get(0, 1, 0)).abs() < 1e-12);
        assert!((ab[1] - a.get(0, 1, 1)).abs() < 1e-12);
    }

    #[test]
    fn beta_is_linear_in_u() {
        let arm = Arm2Dof::default();
        let a = alpha_coefficients(&arm, &X0).unwrap();
        let b1 = a.beta(&[1.0, 2.0]);
        let b2 = a.beta(&[3.0, -1.0]);
        let b3 = a.beta(&[5.0, 3.0]);
        for i in 0..2 {
            for k in 0..2 {
                assert!((b3.get(i, k) - (2.0 * b1.get(i, k) + b2.get(i, k))).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn frame_rank_positive_at_reference_state() {
        let arm = Arm2Dof::default();
        assert!(frame_rank(&arm, &X0).unwrap() > 1e-4);
    }

    #[test]
    fn b_set_vectors_are_annihilated_by_cyclic_momentum() {
        // M(q) does not depend on q1, so dp1 kills all four vectors
        let arm = Arm2Dof::default();
        for c in [-20.0, 20.0] {
            let cert = b_set_certificate(&arm, &X0, c).unwrap();
            assert!(!cert.independent);
            assert!(cert.momentum_annihilation < 1e-12);
            assert!(cert.condition_ratio() < 1e-12);
        }
    }

    #[test]
    fn momentum_covector_pairs_with_inputs() {
        let arm = Arm2Dof::default();
        let dp = momentum_covector(&arm, &X0, 0).unwrap();
        let g = arm.input_columns(&X0).unwrap();
        assert!((linalg::dot(&dp, &g[0]) - 1.0).abs() < 1e-14);
        assert!(linalg::dot(&dp, &g[1]).abs() < 1e-14);
        assert_eq!(dp[0], 0.0);
    }

    #[test]
    fn f32_brackets_track_f64() {
        let arm = Arm2Dof::default();
        let x32: Vec<f32> = X0.iter().map(|v| *v as f32).collect();
        let w: VectorField = "ffg1".parse().unwrap();
        let a = eval_field(&arm, &w, &X0).unwrap();
        let b = eval_field(&arm, &w, &x32).unwrap();
        let scale = norm(&a);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - *q as f64).abs() < 1e-4 * scale);
        }
    }
}
