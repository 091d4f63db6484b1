//! Gaussian density operator of a single beam's fluctuations.
//!
//! The quadrature fluctuations of one beam are described by the exponential
//! of a quadratic form in the ladder operators, parametrized by two
//! positive occupancy weights.  This module maps that exponential to its
//! ordered product form, evaluates its trace and second moments in closed
//! form, and squeezes it to a thermal oscillator.  A truncated number-basis
//! oracle rebuilds everything by explicit matrix algebra and serves as the
//! ground truth for the closed forms.
//!
//! The closed-form second moments are the exact expectations of the
//! operator: a squeezed thermal state with squeeze ratio set by the weight
//! imbalance and thermal factor `coth(nu/2)`.  Simpler interpolating
//! expressions reproduce them only in the weak- and strong-damping limits.

use crate::linalg::{expm, Mat};
use crate::{Error, Result};
use num_complex::Complex64;

/// Occupancy weights and quadrature scale of the Gaussian operator.
#[derive(Debug, Clone, Copy)]
pub struct GaussianParams {
    /// Weight conjugate to the phase quadrature.
    pub n_mu: f64,
    /// Weight conjugate to the amplitude quadrature.
    pub n_phi: f64,
    /// Quadrature scale relating fluctuations to the oscillator.
    pub k: f64,
}

/// Coefficients of the ordered product form.
#[derive(Debug, Clone, Copy)]
pub struct Disentangled {
    /// Diagonal coefficient; the diagonal factor is `exp(u (2n+1))` over two.
    pub u: f64,
    /// Raising-ladder coefficient.
    pub v: f64,
    /// Lowering-ladder coefficient, entering with a minus sign.
    pub w: f64,
}

/// Exact second moments of the quadrature pair.
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    /// Commutator expectation, purely imaginary and state independent.
    pub commutator: Complex64,
    /// Amplitude quadrature variance.
    pub mu_sq: f64,
    /// Phase quadrature variance.
    pub phi_sq: f64,
}

/// Squeeze angle and the thermal operator the state maps onto.
#[derive(Debug, Clone, Copy)]
pub struct ThermalForm {
    /// Squeeze angle.
    pub theta: f64,
    /// Geometric mean of the weights; the thermal exponent is `-2 nu K0`.
    pub nu: f64,
    /// Normalization of the thermal operator.
    pub normalization: f64,
}

impl GaussianParams {
    /// Validates the weights and scale.
    pub fn new(n_mu: f64, n_phi: f64, k: f64) -> Result<GaussianParams> {
        if !(n_mu > 0.0 && n_mu.is_finite()) || !(n_phi > 0.0 && n_phi.is_finite()) {
            return Err(Error::Validation(format!(
                "occupancy weights must be positive and finite, got ({n_mu}, {n_phi})"
            )));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Validation(format!("quadrature scale must be positive, got {k}")));
        }
        Ok(GaussianParams { n_mu, n_phi, k })
    }

    /// Geometric mean of the weights.
    #[must_use]
    pub fn nu(&self) -> f64 {
        (self.n_mu * self.n_phi).sqrt()
    }

    /// Half sum of the weights over their geometric mean.
    #[must_use]
    pub fn q(&self) -> f64 {
        (self.n_mu + self.n_phi) / (2.0 * self.nu())
    }

    /// Half difference of the weights over their geometric mean.
    #[must_use]
    pub fn p(&self) -> f64 {
        (self.n_mu - self.n_phi) / (2.0 * self.nu())
    }

    /// Hyperbolic cosine of the imbalance parameter; infinite for equal
    /// weights, negative beyond the balanced point where the parameter
    /// picks up an imaginary half turn.
    #[must_use]
    pub fn cosh_imbalance(&self) -> f64 {
        (self.n_mu + self.n_phi) / (self.n_mu - self.n_phi)
    }

    /// Maps the exponential to its ordered product coefficients.
    ///
    /// Equal weights are perfectly regular here: the ladder coefficients
    /// close to zero and the diagonal one to minus the common weight, the
    /// thermal operator.
    #[must_use]
    pub fn disentangle(&self) -> Disentangled {
        let nu = self.nu();
        let scale = self.p() * nu.sinh();
        // exp(-u) in closed form; u itself is its negated logarithm.
        let emu = nu.cosh() + self.q() * nu.sinh();
        Disentangled {
            u: -emu.ln(),
            v: scale * emu,
            w: -scale / emu,
        }
    }

    /// Trace of the operator.
    #[must_use]
    pub fn trace(&self) -> f64 {
        1.0 / (2.0 * (self.nu() / 2.0).sinh())
    }

    /// Exact second moments of the quadratures.
    #[must_use]
    pub fn moments(&self) -> Moments {
        let k_sq = self.k * self.k;
        let thermal = 1.0 / (self.nu() / 2.0).tanh();
        let ratio = (self.n_mu / self.n_phi).sqrt();
        Moments {
            commutator: Complex64::new(0.0, k_sq / 2.0),
            mu_sq: k_sq / 4.0 * ratio * thermal,
            phi_sq: k_sq / 4.0 / ratio * thermal,
        }
    }

    /// Squeeze angle and thermal form of the normalized state.
    pub fn squeeze_to_thermal(&self) -> Result<ThermalForm> {
        let ratio = self.p() / self.q();
        if !(ratio.abs() < 1.0) {
            return Err(Error::Numerical(format!(
                "squeeze angle undefined for weight ratio {ratio}"
            )));
        }
        let nu = self.nu();
        Ok(ThermalForm {
            theta: ratio.atanh() / 2.0,
            nu,
            normalization: 2.0 * (nu / 2.0).sinh(),
        })
    }
}

/// Trace of an arbitrary ordered product, not necessarily one produced by
/// [`GaussianParams::disentangle`].
pub fn trace_from_disentangled(d: &Disentangled) -> Result<f64> {
    let radicand = (d.v * d.w + 1.0) * d.u.exp() - 2.0 + (-d.u).exp();
    if !(radicand > 0.0) {
        return Err(Error::Numerical(format!(
            "operator is not trace class, radicand {radicand}"
        )));
    }
    Ok(1.0 / radicand.sqrt())
}

/// Recovers the occupancy weights from ordered product coefficients.
///
/// Inverts the two-by-two ladder representation of the product; the
/// combined matrix must be conjugate to a positive dilation for the
/// weights to exist.
pub fn entangle(d: &Disentangled) -> Result<(f64, f64)> {
    let (eu, emu) = (d.u.exp(), (-d.u).exp());
    let m11 = eu * (1.0 + d.v * d.w);
    let m12 = eu * d.v;
    let m21 = emu * d.w;
    let m22 = emu;
    let cosh_nu = (m11 + m22) / 2.0;
    if !(cosh_nu > 1.0) {
        return Err(Error::Numerical(format!(
            "no positive weights reproduce these coefficients, half trace {cosh_nu}"
        )));
    }
    let nu = cosh_nu.acosh();
    let sinh_nu = nu.sinh();
    let p = m12 / sinh_nu;
    let q = (m22 - m11) / (2.0 * sinh_nu);
    let (n_mu, n_phi) = (nu * (q + p), nu * (q - p));
    if !(n_mu > 0.0 && n_phi > 0.0) {
        return Err(Error::Numerical(format!(
            "recovered weights are not positive: ({n_mu}, {n_phi})"
        )));
    }
    // Consistency of the off-diagonal pair with the dilation structure.
    if (m21 * sinh_nu + p * sinh_nu * sinh_nu).abs() > 1e-9 * (1.0 + sinh_nu * sinh_nu) {
        return Err(Error::Numerical(
            "coefficients are inconsistent with a weight pair".into(),
        ));
    }
    Ok((n_mu, n_phi))
}

/// Everything the truncated number-basis oracle measures.
#[derive(Debug, Clone)]
pub struct FockOracle {
    /// Basis size used.
    pub dim: usize,
    /// Trace of the ordered product.
    pub trace: f64,
    /// Second moments measured on the normalized state.
    pub moments: Moments,
    /// Largest occupancy in the top tenth of the basis, after
    /// normalization.
    pub tail: f64,
    /// Largest entry difference between the ordered product and the single
    /// exponential, relative to the operator scale.
    pub split_residual: f64,
    /// Largest entry difference between the squeezed state and the thermal
    /// operator, on the normalized state.
    pub squeeze_residual: f64,
}

fn ladder(dim: usize) -> Mat {
    let mut a = Mat::zeros(dim);
    for n in 1..dim {
        a.set(n - 1, n, (n as f64).sqrt());
    }
    a
}

/// One-sided ladder exponential: `exp(c adag^2 / 2)` when `raising`, else
/// `exp(c a^2 / 2)`, built from the closed-form band entries.
fn ladder_exponential(dim: usize, c: f64, raising: bool) -> Mat {
    let mut m = Mat::eye(dim);
    for start in 0..dim {
        let mut term = 1.0;
        let mut level = start;
        let mut order = 0.0;
        while level + 2 < dim {
            order += 1.0;
            term *= c * (((level + 1) * (level + 2)) as f64).sqrt() / (2.0 * order);
            level += 2;
            if raising {
                m.set(level, start, term);
            } else {
                m.set(start, level, term);
            }
        }
    }
    m
}

/// Measures the Gaussian operator by explicit matrix algebra in a
/// truncated number basis of size `dim`.
pub fn fock_oracle(gp: &GaussianParams, dim: usize) -> Result<FockOracle> {
    if dim < 16 {
        return Err(Error::Validation(format!("basis size must be at least 16, got {dim}")));
    }
    let d = gp.disentangle();

    // Ordered product: diagonal times raising band times lowering band.
    let mut rho = ladder_exponential(dim, d.v, true);
    for i in 0..dim {
        let diag = (d.u * (i as f64 + 0.5)).exp();
        for j in 0..dim {
            rho.set(i, j, diag * rho.get(i, j));
        }
    }
    let rho = rho.matmul(&ladder_exponential(dim, -d.w, false));

    // Single exponential of the quadratic form, as an independent route.
    let a = ladder(dim);
    let adag = a.transpose();
    let a_sq = a.matmul(&a);
    let adag_sq = adag.transpose().matmul(&adag.transpose()).transpose();
    let mut x = Mat::zeros(dim);
    for i in 0..dim {
        x.set(i, i, -(gp.n_mu + gp.n_phi) * (i as f64 + 0.5) / 2.0);
    }
    x.add_scaled((gp.n_mu - gp.n_phi) / 4.0, &adag_sq);
    x.add_scaled((gp.n_mu - gp.n_phi) / 4.0, &a_sq);
    let rho_single = expm(&x)?;
    let mut split_residual = 0.0f64;
    let scale = rho_single.max_abs().max(1e-300);
    for i in 0..dim {
        for j in 0..dim {
            split_residual = split_residual.max((rho.get(i, j) - rho_single.get(i, j)).abs());
        }
    }
    let split_residual = split_residual / scale;

    let trace = rho.trace();
    if !(trace > 0.0 && trace.is_finite()) {
        return Err(Error::Numerical(format!("oracle trace came out as {trace}")));
    }

    let mut tail = 0.0f64;
    for i in (dim - dim / 10).max(1)..dim {
        tail = tail.max(rho.get(i, i).abs() / trace);
    }
    if tail >= 1e-8 {
        return Err(Error::Numerical(format!(
            "basis size {dim} is too small, normalized occupancy tail {tail:.3e}"
        )));
    }

    // Quadrature operators over the scale k: mu = k (a + adag) / 2 and
    // phi = -i k (adag - a) / 2 = -i k y with y real antisymmetric.
    let k_sq = gp.k * gp.k;
    let mut mu_sq_op = a_sq.clone();
    mu_sq_op.add_scaled(1.0, &adag_sq);
    let mut phi_sq_op = Mat::zeros(dim);
    phi_sq_op.add_scaled(-1.0, &a_sq);
    phi_sq_op.add_scaled(-1.0, &adag_sq);
    for i in 0..dim {
        let number = 2.0 * i as f64 + 1.0;
        mu_sq_op.set(i, i, mu_sq_op.get(i, i) + number);
        phi_sq_op.set(i, i, phi_sq_op.get(i, i) + number);
    }
    let mu_sq = k_sq / 4.0 * rho.matmul(&mu_sq_op).trace() / trace;
    let phi_sq = k_sq / 4.0 * rho.matmul(&phi_sq_op).trace() / trace;

    // [phi, mu] = -i k^2 [y, x] / 4 with x = a + adag, y = adag - a; the
    // real commutator [y, x] has expectation -2 exactly, so the measured
    // value lands on +i k^2 / 2.
    let mut xq = a.clone();
    xq.add_scaled(1.0, &adag);
    let mut yq = adag.clone();
    yq.add_scaled(-1.0, &a);
    let mut comm = yq.matmul(&xq);
    comm.add_scaled(-1.0, &xq.matmul(&yq));
    let comm_real = rho.matmul(&comm).trace() / trace;
    let commutator = Complex64::new(0.0, -k_sq / 4.0 * comm_real);

    // Squeeze to thermal on the normalized state.
    let thermal = gp.squeeze_to_thermal()?;
    let mut gen = a_sq;
    gen.add_scaled(-1.0, &adag_sq);
    gen.scale(thermal.theta / 2.0);
    let s = expm(&gen)?;
    let squeezed = s.matmul(&rho).matmul(&s.transpose());
    let mut squeeze_residual = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let want = if i == j {
                trace * thermal.normalization * (-thermal.nu * (i as f64 + 0.5)).exp()
            } else {
                0.0
            };
            squeeze_residual = squeeze_residual.max((squeezed.get(i, j) - want).abs());
        }
    }
    let squeeze_residual = squeeze_residual / trace;

    Ok(FockOracle {
        dim,
        trace,
        moments: Moments {
            commutator,
            mu_sq,
            phi_sq,
        },
        tail,
        split_residual,
        squeeze_residual,
    })
}
