//! Dense complex polynomials in one variable.
//!
//! Coefficients are stored in descending powers, so `coeffs[0]` multiplies
//! the highest power.  Root finding goes through the companion matrix of the
//! scaled monic polynomial, reduced by an explicitly shifted complex QR
//! iteration with Givens rotations, followed by a Newton polish against the
//! original coefficients.

use crate::{Error, Result};
use num_complex::Complex64;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Polynomial with complex coefficients in descending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    /// Builds a polynomial from descending-power coefficients.
    ///
    /// Exact leading zeros are trimmed; the zero polynomial is represented
    /// by an empty coefficient list.
    #[must_use]
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let first = coeffs.iter().position(|c| *c != ZERO);
        match first {
            Some(k) => Poly {
                coeffs: coeffs[k..].to_vec(),
            },
            None => Poly { coeffs: Vec::new() },
        }
    }

    /// Builds the monic polynomial with the given roots.
    #[must_use]
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut c = vec![ONE];
        for r in roots {
            c.push(ZERO);
            let n = c.len();
            for k in (1..n).rev() {
                let lower = c[k - 1];
                c[k] -= r * lower;
            }
        }
        Poly { coeffs: c }
    }

    /// Coefficients in descending powers.
    #[must_use]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Degree of the polynomial; zero for constants and the zero polynomial.
    #[must_use]
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Evaluates the polynomial at `z` by Horner's scheme.
    #[must_use]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for c in &self.coeffs {
            acc = acc * z + c;
        }
        acc
    }

    /// Formal derivative.
    #[must_use]
    pub fn derivative(&self) -> Poly {
        let n = self.coeffs.len();
        if n <= 1 {
            return Poly { coeffs: Vec::new() };
        }
        let deg = n - 1;
        let coeffs = self
            .coeffs
            .iter()
            .take(deg)
            .enumerate()
            .map(|(k, c)| c * ((deg - k) as f64))
            .collect();
        Poly::new(coeffs)
    }

    /// Product of two polynomials.
    #[must_use]
    pub fn mul(&self, other: &Poly) -> Poly {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Poly { coeffs: Vec::new() };
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    /// All complex roots, unordered.
    ///
    /// Closed forms handle degrees one and two; higher degrees go through
    /// the scaled companion matrix and shifted QR iteration, with a final
    /// Newton polish against the original coefficients.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let n = self.degree();
        if self.coeffs.is_empty() || n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.coeffs[0];
        if n == 1 {
            return Ok(vec![-self.coeffs[1] / lead]);
        }
        if n == 2 {
            let (r1, r2) = quadratic_roots(self.coeffs[0], self.coeffs[1], self.coeffs[2]);
            return Ok(vec![r1, r2]);
        }

        // Scale z = beta*y so the companion matrix is well balanced.
        let mut beta: f64 = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            let m = (c / lead).norm();
            if m > 0.0 {
                beta = beta.max(m.powf(1.0 / k as f64));
            }
        }
        if beta <= 0.0 {
            // All lower coefficients vanish: z^n with an n-fold zero root.
            return Ok(vec![ZERO; n]);
        }

        // Monic coefficients of p(beta*y)/ (lead*beta^n): m_k = (c_k/lead)*beta^{-k}.
        let mut monic = Vec::with_capacity(n);
        let mut scale = 1.0;
        for c in self.coeffs.iter().skip(1) {
            scale /= beta;
            monic.push(c / lead * scale);
        }

        // Top-row companion matrix, already upper Hessenberg.
        let mut h = vec![vec![ZERO; n]; n];
        for (k, m) in monic.iter().enumerate() {
            h[0][k] = -m;
        }
        for (k, row) in h.iter_mut().enumerate().skip(1) {
            row[k - 1] = ONE;
        }

        let mut roots = hessenberg_eigenvalues(&mut h)?;
        for r in &mut roots {
            *r *= beta;
        }

        // Newton polish against the original polynomial.
        let deriv = self.derivative();
        for r in &mut roots {
            let mut best = *r;
            let mut best_abs = self.eval(best).norm();
            let mut z = best;
            for _ in 0..6 {
                let p = self.eval(z);
                let dp = deriv.eval(z);
                if dp.norm() <= 1e-3 * f64::EPSILON * p.norm() {
                    break;
                }
                z -= p / dp;
                let a = self.eval(z).norm();
                if a < best_abs {
                    best_abs = a;
                    best = z;
                } else {
                    break;
                }
            }
            *r = best;
        }
        Ok(roots)
    }
}

/// Roots of `a z^2 + b z + c` with a cancellation-safe split.
#[must_use]
pub fn quadratic_roots(a: Complex64, b: Complex64, c: Complex64) -> (Complex64, Complex64) {
    let disc = (b * b - 4.0 * a * c).sqrt();
    // Pick the sign that avoids cancellation in -b -+ disc.
    let q = if (b.conj() * disc).re >= 0.0 {
        -0.5 * (b + disc)
    } else {
        -0.5 * (b - disc)
    };
    if q == ZERO {
        return (ZERO, ZERO);
    }
    (q / a, c / q)
}

fn negligible(sub: Complex64, d1: Complex64, d2: Complex64) -> bool {
    sub.norm() <= f64::EPSILON * (d1.norm() + d2.norm())
}

/// Eigenvalues of a complex upper Hessenberg matrix by explicitly shifted QR.
fn hessenberg_eigenvalues(h: &mut [Vec<Complex64>]) -> Result<Vec<Complex64>> {
    let n = h.len();
    let mut roots = Vec::with_capacity(n);
    let mut hi = n;
    let mut stuck = 0usize;
    let max_per_eig = 60usize;
    while hi > 0 {
        // Deflate negligible subdiagonals from the bottom of the window.
        let mut lo = hi - 1;
        while lo > 0 {
            if negligible(h[lo][lo - 1], h[lo - 1][lo - 1], h[lo][lo]) {
                h[lo][lo - 1] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            roots.push(h[lo][lo]);
            hi -= 1;
            stuck = 0;
            continue;
        }
        if lo == hi - 2 {
            let (r1, r2) = quadratic_eigen(h[lo][lo], h[lo][lo + 1], h[lo + 1][lo], h[lo + 1][lo + 1]);
            roots.push(r1);
            roots.push(r2);
            hi -= 2;
            stuck = 0;
            continue;
        }
        if stuck > max_per_eig {
            return Err(Error::Numerical(
                "companion QR iteration failed to converge".into(),
            ));
        }
        let sigma = if stuck > 0 && stuck % 10 == 0 {
            // Exceptional shift to break symmetry stalls.
            Complex64::new(h[hi - 1][hi - 2].norm() + h[hi - 2][hi - 3].norm(), 0.0)
        } else {
            let (e1, e2) = quadratic_eigen(
                h[hi - 2][hi - 2],
                h[hi - 2][hi - 1],
                h[hi - 1][hi - 2],
                h[hi - 1][hi - 1],
            );
            let d = h[hi - 1][hi - 1];
            if (e1 - d).norm() <= (e2 - d).norm() {
                e1
            } else {
                e2
            }
        };
        qr_step(h, lo, hi, sigma);
        stuck += 1;
    }
    Ok(roots)
}

/// Eigenvalues of the 2x2 block [[a, b], [c, d]].
fn quadratic_eigen(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * c).sqrt();
    let e1 = half_tr + disc;
    let e2 = half_tr - disc;
    let det = a * d - b * c;
    // Recompute the smaller eigenvalue from the determinant when possible.
    if e1.norm() >= e2.norm() && e1 != ZERO {
        (e1, det / e1)
    } else if e2 != ZERO {
        (det / e2, e2)
    } else {
        (e1, e2)
    }
}

/// Givens pair (c, s) with real c so that [[c, s], [-conj(s), c]] * [x, y] = [r, 0].
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let nx = x.norm();
    let r = (nx * nx + y.norm_sqr()).sqrt();
    if r == 0.0 {
        return (1.0, ZERO);
    }
    if nx == 0.0 {
        return (0.0, ONE);
    }
    (nx / r, (x / nx) * y.conj() / r)
}

/// One explicitly shifted QR sweep on the active window `lo..hi`.
fn qr_step(h: &mut [Vec<Complex64>], lo: usize, hi: usize, sigma: Complex64) {
    for k in lo..hi {
        h[k][k] -= sigma;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for k in lo..hi - 1 {
        let (c, s) = givens(h[k][k], h[k + 1][k]);
        for j in k..hi {
            let t1 = h[k][j];
            let t2 = h[k + 1][j];
            h[k][j] = c * t1 + s * t2;
            h[k + 1][j] = -s.conj() * t1 + c * t2;
        }
        rotations.push((c, s));
    }
    for (idx, (c, s)) in rotations.iter().enumerate() {
        let k = lo + idx;
        let top = (k + 2).min(hi);
        for row in h.iter_mut().take(top).skip(lo) {
            let t1 = row[k];
            let t2 = row[k + 1];
            row[k] = c * t1 + s.conj() * t2;
            row[k + 1] = -s * t1 + c * t2;
        }
    }
    for k in lo..hi {
        h[k][k] += sigma;
    }
}

/// Recovers the coefficients of a polynomial of known degree from samples on
/// a circle of radius `radius` around the origin.
///
/// The inversion is an exact discrete Fourier transform over `degree + 1`
/// equispaced nodes, so the result reproduces `f` exactly whenever `f` is a
/// polynomial of at most the stated degree.  Returns descending coefficients.
pub fn fit_on_circle<F>(mut f: F, degree: usize, radius: f64) -> Result<Vec<Complex64>>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let n = degree + 1;
    let mut values = Vec::with_capacity(n);
    for m in 0..n {
        let angle = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
        values.push(f(Complex64::from_polar(radius, angle))?);
    }
    let mut coeffs = vec![ZERO; n];
    for k in 0..n {
        let mut acc = ZERO;
        for (m, v) in values.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * (k * m) as f64 / n as f64;
            acc += v * Complex64::from_polar(1.0, angle);
        }
        // acc/n = c_k * radius^k with c_k the ascending coefficient.
        coeffs[degree - k] = acc / n as f64 / radius.powi(k as i32);
    }
    Ok(coeffs)
}
