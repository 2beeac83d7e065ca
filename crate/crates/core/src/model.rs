//! Fully actuated mechanical systems in control-affine form.
//!
//! A model supplies `M(q)`, `C(q, q̇)` and optionally `G(q)`; the state-space
//! form `ẋ = f(x) + g(x)u` with `x = [q; q̇]` follows:
//!
//! ```text
//! f(x) = [ q̇ ; -L(q)(C + G) ]      g(x) = [ 0 ; L(q) ]      L = M⁻¹
//! ```
//!
//! All evaluation is generic over [`Scalar`] so the same code runs at dual
//! numbers for the Lie-bracket engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

pub trait MechModel: Send + Sync {
    /// Degrees of freedom `n`; the state has dimension `2n`.
    fn dof(&self) -> usize;

    fn mass_matrix<T: Scalar>(&self, q: &[T]) -> SquareMatrix<T>;

    fn coriolis<T: Scalar>(&self, q: &[T], qdot: &[T]) -> Vec<T>;

    fn gravity<T: Scalar>(&self, q: &[T]) -> Vec<T> {
        vec![T::zero(); q.len()]
    }

    /// `L(q) = M(q)⁻¹`.
    fn inverse_mass<T: Scalar>(&self, q: &[T]) -> Result<SquareMatrix<T>> {
        self.mass_matrix(q).inverse()
    }

    /// Stable identifier of the model and its parameters.
    fn fingerprint(&self) -> String;

    fn state_dim(&self) -> usize {
        2 * self.dof()
    }

    fn drift<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        let n = self.dof();
        check_state_len(x, n)?;
        let (q, qdot) = x.split_at(n);
        let l = self.inverse_mass(q)?;
        let bias: Vec<T> = self
            .coriolis(q, qdot)
            .into_iter()
            .zip(self.gravity(q))
            .map(|(c, g)| c + g)
            .collect();
        let acc = l.mul_vec(&bias);
        let mut out = qdot.to_vec();
        out.extend(acc.into_iter().map(|a| -a));
        Ok(out)
    }

    /// Input field `g_i(x) = [0; ℓ_i(q)]`, with `ℓ_i` column `i` of `L(q)`.
    fn input_column<T: Scalar>(&self, x: &[T], i: usize) -> Result<Vec<T>> {
        let n = self.dof();
        check_state_len(x, n)?;
        if i >= n {
            return Err(Error::Invalid(format!("input index {i} out of range for n = {n}")));
        }
        let l = self.inverse_mass(&x[..n])?;
        let mut out = vec![T::zero(); n];
        out.extend(l.column(i));
        Ok(out)
    }

    /// All input columns `[g_1, …, g_n]`.
    fn input_columns<T: Scalar>(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        let n = self.dof();
        check_state_len(x, n)?;
        let l = self.inverse_mass(&x[..n])?;
        Ok((0..n)
            .map(|i| {
                let mut col = vec![T::zero(); n];
                col.extend(l.column(i));
                col
            })
            .collect())
    }

    /// `f(x) + g(x)u`.
    fn controlled_field<T: Scalar>(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        let n = self.dof();
        if u.len() != n {
            return Err(Error::Invalid(format!("control has length {}, expected {n}", u.len())));
        }
        let mut out = self.drift(x)?;
        let l = self.inverse_mass(&x[..n])?;
        let lu = l.mul_vec(u);
        for (o, v) in out[n..].iter_mut().zip(lu) {
            *o += v;
        }
        Ok(out)
    }
}

fn check_state_len<T>(x: &[T], n: usize) -> Result<()> {
    if x.len() != 2 * n {
        return Err(Error::Invalid(format!("state has length {}, expected {}", x.len(), 2 * n)));
    }
    Ok(())
}

/// Generalized coordinates and velocities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

impl MechState {
    pub fn new(q: Vec<f64>, qdot: Vec<f64>) -> Result<Self> {
        if q.len() != qdot.len() {
            return Err(Error::Invalid("q and qdot lengths differ".into()));
        }
        if q.iter().chain(&qdot).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("state entries must be finite".into()));
        }
        Ok(Self { q, qdot })
    }

    pub fn from_vector(x: &[f64]) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::Invalid("state vector must have even length".into()));
        }
        let n = x.len() / 2;
        Self::new(x[..n].to_vec(), x[n..].to_vec())
    }

    /// `x = [q; q̇]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = self.q.clone();
        x.extend_from_slice(&self.qdot);
        x
    }
}

/// Box constraints `lower[i] ≤ u_i ≤ upper[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ControlBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Invalid("bound vectors differ in length".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l < u) {
                return Err(Error::Invalid(format!("bounds for u{}: lower {l} must be < upper {u}", i + 1)));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric bounds `|u_i| ≤ limit[i]`.
    pub fn symmetric(limit: &[f64]) -> Result<Self> {
        Self::new(limit.iter().map(|l| -l).collect(), limit.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, i: usize, value: f64, tol: f64) -> bool {
        value >= self.lower[i] - tol && value <= self.upper[i] + tol
    }

    /// The bound nearest to `value` on channel `i`.
    pub fn nearest_bound(&self, i: usize, value: f64) -> f64 {
        if (value - self.lower[i]).abs() <= (value - self.upper[i]).abs() {
            self.lower[i]
        } else {
            self.upper[i]
        }
    }
}
