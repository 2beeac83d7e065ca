//! Small dense linear algebra over [`Scalar`].
//!
//! Matrices here are tiny (n ≤ a handful) and must run on dual numbers, so a
//! row-major `Vec` with partial-pivot elimination is all that is needed. Rank
//! diagnostics on plain `f64` go through nalgebra's SVD.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = T::zero();
                for (j, vj) in v.iter().enumerate() {
                    acc += self[(i, j)] * *vj;
                }
                acc
            })
            .collect()
    }

    pub fn mul_mat(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc += self[(i, k)] * other[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Determinant by elimination (exact closed form for n ≤ 2).
    pub fn determinant(&self) -> T {
        match self.n {
            0 => T::one(),
            1 => self.data[0],
            2 => self.data[0] * self.data[3] - self.data[1] * self.data[2],
            n => {
                let mut a = self.data.clone();
                let mut det = T::one();
                for col in 0..n {
                    let piv = match pivot_row(&a, n, col) {
                        Some(p) => p,
                        None => return T::zero(),
                    };
                    if piv != col {
                        swap_rows(&mut a, n, piv, col);
                        det = -det;
                    }
                    let d = a[col * n + col];
                    det *= d;
                    for r in col + 1..n {
                        let factor = a[r * n + col] / d;
                        for c in col..n {
                            let v = a[col * n + c];
                            a[r * n + c] -= factor * v;
                        }
                    }
                }
                det
            }
        }
    }

    /// Solve `self · x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.n;
        if n == 2 {
            let det = self.determinant();
            if !(det.re().abs() > f64::MIN_POSITIVE) || !det.re().is_finite() {
                return Err(Error::LinearSolveFailure { dim: n });
            }
            let [a, b01, c, d] = [self.data[0], self.data[1], self.data[2], self.data[3]];
            return Ok(vec![(d * b[0] - b01 * b[1]) / det, (a * b[1] - c * b[0]) / det]);
        }
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let piv = pivot_row(&a, n, col).ok_or(Error::LinearSolveFailure { dim: n })?;
            if piv != col {
                swap_rows(&mut a, n, piv, col);
                x.swap(piv, col);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] / d;
                for c in col..n {
                    let v = a[col * n + c];
                    a[r * n + c] -= factor * v;
                }
                let xc = x[col];
                x[r] -= factor * xc;
            }
        }
        for col in (0..n).rev() {
            let mut acc = x[col];
            for c in col + 1..n {
                acc -= a[col * n + c] * x[c];
            }
            x[col] = acc / a[col * n + col];
        }
        Ok(x)
    }

    /// Inverse; closed form for n = 2, column-by-column solves otherwise.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        if n == 2 {
            let det = self.determinant();
            if !(det.re().abs() > f64::MIN_POSITIVE) || !det.re().is_finite() {
                return Err(Error::LinearSolveFailure { dim: n });
            }
            let [a, b, c, d] = [self.data[0], self.data[1], self.data[2], self.data[3]];
            return Ok(Self {
                n,
                data: vec![d / det, -b / det, -c / det, a / det],
            });
        }
        let mut inv = Self::zeros(n);
        for j in 0..n {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            let col = self.solve(&e)?;
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        Ok(inv)
    }
}

impl<T> std::ops::Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SquareMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

fn pivot_row<T: Scalar>(a: &[T], n: usize, col: usize) -> Option<usize> {
    let mut best = col;
    let mut best_abs = a[col * n + col].re().abs();
    for r in col + 1..n {
        let v = a[r * n + col].re().abs();
        if v > best_abs {
            best = r;
            best_abs = v;
        }
    }
    if best_abs > f64::MIN_POSITIVE && best_abs.is_finite() {
        Some(best)
    } else {
        None
    }
}

fn swap_rows<T: Copy>(a: &mut [T], n: usize, r1: usize, r2: usize) {
    for c in 0..n {
        a.swap(r1 * n + c, r2 * n + c);
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Singular values (descending) of the matrix whose columns are `cols`.
pub fn singular_values(cols: &[Vec<f64>]) -> Vec<f64> {
    if cols.is_empty() {
        return Vec::new();
    }
    let rows = cols[0].len();
    let m = DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Smallest singular value among the `min(rows, cols)` ones.
pub fn smallest_singular_value(cols: &[Vec<f64>]) -> f64 {
    singular_values(cols).last().copied().unwrap_or(0.0)
}
