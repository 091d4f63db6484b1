//! Minimal dense linear algebra: a partial-pivot LU solver for small complex
//! systems and a real matrix exponential by scaling and squaring.
//!
//! The complex solver backs the frequency-domain fluctuation system, whose
//! dimension is fixed at six; the real exponential backs the Fock-space
//! cross-checks of the Gaussian module, where matrices stay dense but small
//! (a few hundred rows).

use crate::{Error, Result};
use num_complex::Complex64;

/// Solves `a * x = b` in place for a square complex system.
///
/// `a` is a row-major `n x n` matrix and `b` holds one right-hand side of
/// length `n`; on success `b` contains the solution.  Fails on a singular
/// pivot.
pub fn solve_complex(a: &mut [Vec<Complex64>], b: &mut [Complex64]) -> Result<()> {
    let n = a.len();
    debug_assert!(a.iter().all(|row| row.len() == n) && b.len() == n);
    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, a[r][col].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty column");
        if pivot_mag == 0.0 || !pivot_mag.is_finite() {
            return Err(Error::Numerical(format!(
                "singular pivot in column {col} of the linear system"
            )));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let pivot = a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / pivot;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let upper = a[col][k];
                a[row][k] -= factor * upper;
            }
            let rhs = b[col];
            b[row] -= factor * rhs;
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * b[k];
        }
        b[col] = acc / a[col][col];
    }
    Ok(())
}

/// Inverts a square complex matrix by LU with partial pivoting.
pub fn invert_complex(m: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
    let n = m.len();
    let mut inv = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for col in 0..n {
        let mut a: Vec<Vec<Complex64>> = m.to_vec();
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        b[col] = Complex64::new(1.0, 0.0);
        solve_complex(&mut a, &mut b)?;
        for row in 0..n {
            inv[row][col] = b[row];
        }
    }
    Ok(inv)
}

/// Dense real matrix, row major.
#[derive(Debug, Clone)]
pub struct Mat {
    /// Number of rows and columns.
    pub n: usize,
    /// Row-major entries.
    pub a: Vec<f64>,
}

impl Mat {
    /// Zero matrix of size `n`.
    #[must_use]
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    /// Identity matrix of size `n`.
    #[must_use]
    pub fn eye(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    /// Entry accessor.
    #[inline]
    #[must_use]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    /// Entry mutator.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    /// Matrix product `self * rhs`.
    #[must_use]
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        let n = self.n;
        debug_assert_eq!(n, rhs.n);
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                let row = &rhs.a[k * n..(k + 1) * n];
                let dst = &mut out.a[i * n..(i + 1) * n];
                for (d, r) in dst.iter_mut().zip(row) {
                    *d += aik * r;
                }
            }
        }
        out
    }

    /// Transposed copy.
    #[must_use]
    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.a[j * n + i] = self.a[i * n + j];
            }
        }
        out
    }

    /// Sum of diagonal entries.
    #[must_use]
    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Largest absolute entry.
    #[must_use]
    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Infinity norm (max absolute row sum).
    #[must_use]
    pub fn norm_inf(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|i| self.a[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    /// In-place scaled addition `self += s * rhs`.
    pub fn add_scaled(&mut self, s: f64, rhs: &Mat) {
        debug_assert_eq!(self.n, rhs.n);
        for (d, r) in self.a.iter_mut().zip(&rhs.a) {
            *d += s * r;
        }
    }

    /// Scales every entry in place.
    pub fn scale(&mut self, s: f64) {
        for v in &mut self.a {
            *v *= s;
        }
    }
}

/// Matrix exponential `exp(m)` by scaling and squaring with a Taylor core.
///
/// The argument is scaled by a power of two until its infinity norm is at
/// most one quarter, the series is summed to machine precision, and the
/// result is squared back.  Accuracy is ample for the symmetric generators
/// used by the Fock-space oracle.
pub fn expm(m: &Mat) -> Result<Mat> {
    let norm = m.norm_inf();
    if !norm.is_finite() {
        return Err(Error::Numerical("matrix exponential of non-finite input".into()));
    }
    let squarings = if norm <= 0.25 {
        0
    } else {
        (norm / 0.25).log2().ceil() as u32
    };
    let mut scaled = m.clone();
    scaled.scale(0.5f64.powi(squarings as i32));

    let mut result = Mat::eye(m.n);
    let mut term = Mat::eye(m.n);
    for k in 1..200 {
        term = term.matmul(&scaled);
        term.scale(1.0 / k as f64);
        result.add_scaled(1.0, &term);
        if term.max_abs() <= f64::EPSILON * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn solve_roundtrip() {
        let m = vec![
            vec![c(2.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)],
            vec![c(0.5, 0.0), c(3.0, 0.0), c(0.0, 2.0)],
            vec![c(1.0, -1.0), c(0.0, 0.0), c(1.5, 0.5)],
        ];
        let x_true = [c(1.0, 2.0), c(-0.5, 0.0), c(0.0, -1.0)];
        let mut b: Vec<Complex64> = (0..3)
            .map(|i| (0..3).map(|j| m[i][j] * x_true[j]).sum())
            .collect();
        let mut a = m.clone();
        solve_complex(&mut a, &mut b).unwrap();
        for (got, want) in b.iter().zip(x_true) {
            assert!((got - want).norm() < 1e-13);
        }
    }

    #[test]
    fn singular_detected() {
        let mut a = vec![
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ];
        let mut b = vec![c(1.0, 0.0), c(2.0, 0.0)];
        assert!(solve_complex(&mut a, &mut b).is_err());
    }

    #[test]
    fn inverse_identity() {
        let m = vec![
            vec![c(1.0, 0.5), c(0.2, 0.0)],
            vec![c(0.0, -0.3), c(2.0, 0.0)],
        ];
        let inv = invert_complex(&m).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let prod: Complex64 = (0..2).map(|k| m[i][k] * inv[k][j]).sum();
                let want = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                assert!((prod - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn expm_diagonal() {
        let mut m = Mat::zeros(3);
        m.set(0, 0, -1.0);
        m.set(1, 1, 2.0);
        m.set(2, 2, 0.5);
        let e = expm(&m).unwrap();
        assert!((e.get(0, 0) - (-1.0f64).exp()).abs() < 1e-14);
        assert!((e.get(1, 1) - 2.0f64.exp()).abs() < 1e-13);
        assert!((e.get(2, 2) - 0.5f64.exp()).abs() < 1e-14);
        assert!(e.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn expm_rotation() {
        // exp of [[0, -t], [t, 0]] is a rotation by t.
        let t = 0.7;
        let mut m = Mat::zeros(2);
        m.set(0, 1, -t);
        m.set(1, 0, t);
        let e = expm(&m).unwrap();
        assert!((e.get(0, 0) - t.cos()).abs() < 1e-14);
        assert!((e.get(1, 0) - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn expm_large_norm() {
        // Scaling handles norms far above the Taylor radius.
        let mut m = Mat::zeros(2);
        m.set(0, 0, -30.0);
        m.set(0, 1, 5.0);
        m.set(1, 1, -20.0);
        let e = expm(&m).unwrap();
        // Upper triangular: exp picks up the closed-form off-diagonal
        // 5*(e^{-20} - e^{-30})/10.
        let want = 5.0 * ((-20.0f64).exp() - (-30.0f64).exp()) / 10.0;
        assert!((e.get(0, 1) - want).abs() < 1e-10 * want.abs());
        assert!((e.get(0, 0) - (-30.0f64).exp()).abs() < 1e-10 * (-30.0f64).exp());
    }
}
