//! Two-time correlations of the beam quadratures.
//!
//! Closing the response contour turns each correlation kernel into a sum of
//! five exponentials, one per characteristic root.  The kernels combine the
//! quadrature residues of one beam row with the conjugated response of
//! another row at the mirrored root, weighted by the source strengths.  On
//! top of these kernels sit the displayed observables: ordered and
//! symmetrized correlations, equal-quadrature commutators, phase diffusion
//! variances, the beam linewidth and first-order coherence functions.
//!
//! The slow free-phase pole is split off analytically: it shows up as the
//! linear diffusion terms and the exponential linewidth prefactors, not in
//! the kernel sums.

use crate::model::{effective_excitation, NormalizedParams};
use crate::spectra::NoiseWeights;
use crate::transfer::{k_eval, residues, Quadrature, Route};
use crate::{Error, Result};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// The four quadrature kernels of a row pair at one delay.
#[derive(Debug, Clone, Copy)]
pub struct KernelValues {
    /// Delay the kernels are evaluated at.
    pub tau: f64,
    /// Phase-phase kernel.
    pub phi_phi: Complex64,
    /// Amplitude-amplitude kernel.
    pub mu_mu: Complex64,
    /// Amplitude-phase kernel.
    pub mu_phi: Complex64,
    /// Phase-amplitude kernel.
    pub phi_mu: Complex64,
}

/// Pole expansion of the four quadrature kernels for one beam row pair.
#[derive(Debug, Clone)]
pub struct KernelSet {
    /// Row observed at delay `tau`.
    pub j: u8,
    /// Row observed at delay zero.
    pub l: u8,
    /// Characteristic roots the expansion runs over.
    pub roots: [Complex64; 5],
    coef_phi_phi: [Complex64; 5],
    coef_mu_mu: [Complex64; 5],
    coef_mu_phi: [Complex64; 5],
    coef_phi_mu: [Complex64; 5],
}

fn check_beam(j: u8) -> Result<()> {
    if j == 1 || j == 2 {
        Ok(())
    } else {
        Err(Error::Validation(format!("beam index must be 1 or 2, got {j}")))
    }
}

impl KernelSet {
    /// Builds the kernel expansion for rows `j` (delayed) and `l` (fixed).
    pub fn new(np: &NormalizedParams, e: f64, j: u8, l: u8) -> Result<KernelSet> {
        check_beam(j)?;
        check_beam(l)?;
        let weights = NoiseWeights::new(np, e, 0.0, 0.0)?;
        let table = residues(np, e)?;
        let mut set = KernelSet {
            j,
            l,
            roots: table.roots,
            coef_phi_phi: [Complex64::new(0.0, 0.0); 5],
            coef_mu_mu: [Complex64::new(0.0, 0.0); 5],
            coef_mu_phi: [Complex64::new(0.0, 0.0); 5],
            coef_phi_mu: [Complex64::new(0.0, 0.0); 5],
        };
        for (r, root) in table.roots.iter().enumerate() {
            let back = k_eval(np, e, root.conj(), Route::General, 0.0)?;
            for k in [1u8, 2u8, 0u8] {
                let z = weights.zeta_for(k);
                let res_amp = table.res(Quadrature::Amp, j, k, r);
                let res_phase = table.res(Quadrature::Phase, j, k, r);
                let amp_back = back.amp(l, k).conj();
                let phase_back = back.phase(l, k).conj();
                set.coef_phi_phi[r] += z * res_phase * phase_back;
                set.coef_mu_mu[r] += z * res_amp * amp_back;
                set.coef_mu_phi[r] += z * res_amp * phase_back;
                set.coef_phi_mu[r] += z * res_phase * amp_back;
            }
        }
        Ok(set)
    }

    /// Evaluates the four kernels at delay `tau >= 0`.
    pub fn eval(&self, tau: f64) -> Result<KernelValues> {
        if !(tau >= 0.0) {
            return Err(Error::Validation(format!("delay must be nonnegative, got {tau}")));
        }
        let mut v = KernelValues {
            tau,
            phi_phi: Complex64::new(0.0, 0.0),
            mu_mu: Complex64::new(0.0, 0.0),
            mu_phi: Complex64::new(0.0, 0.0),
            phi_mu: Complex64::new(0.0, 0.0),
        };
        for r in 0..5 {
            let g = (I * self.roots[r] * tau).exp();
            v.phi_phi += g * self.coef_phi_phi[r];
            v.mu_mu += g * self.coef_mu_mu[r];
            v.mu_phi += g * self.coef_mu_phi[r];
            v.phi_mu += g * self.coef_phi_mu[r];
        }
        Ok(v)
    }
}

/// All four row pairings of the twin beams.
#[derive(Debug, Clone)]
pub struct BeamKernels {
    /// Pair (j, j).
    pub jj: KernelSet,
    /// Pair (j', j').
    pub twin: KernelSet,
    /// Pair (j, j').
    pub cross: KernelSet,
    /// Pair (j', j).
    pub cross_rev: KernelSet,
}

impl BeamKernels {
    /// Builds all pairings with beam `j` taken as the primary row.
    pub fn new(np: &NormalizedParams, e: f64, j: u8) -> Result<BeamKernels> {
        check_beam(j)?;
        let jp = if j == 1 { 2 } else { 1 };
        Ok(BeamKernels {
            jj: KernelSet::new(np, e, j, j)?,
            twin: KernelSet::new(np, e, jp, jp)?,
            cross: KernelSet::new(np, e, j, jp)?,
            cross_rev: KernelSet::new(np, e, jp, j)?,
        })
    }
}

/// Equal-beam commutator averages at one delay, in units of the inverse
/// squared photon-number scale.
///
/// The three commutator entries are anti-Hermitian averages; their values
/// are the listed reals times `i`.  The anticommutator entry is real as
/// stored.
#[derive(Debug, Clone, Copy)]
pub struct CommutatorValues {
    /// Phase-phase commutator over `i`.
    pub phi_phi: f64,
    /// Amplitude-amplitude commutator over `i`.
    pub mu_mu: f64,
    /// Phase-amplitude anticommutator.
    pub phi_mu_anti: f64,
    /// Phase-amplitude commutator over `i`.
    pub phi_mu: f64,
}

/// Which entries of [`CommutatorValues`] vanish identically at zero
/// detuning, in field order.
pub const RESONANT_NULL: [bool; 4] = [true, true, false, true];

/// Evaluates the equal-beam commutator averages from the (j, j) kernels.
pub fn commutators(jj: &KernelSet, tau: f64, c_sq: f64) -> Result<CommutatorValues> {
    let v = jj.eval(tau)?;
    let s = 1.0 / (2.0 * c_sq);
    Ok(CommutatorValues {
        phi_phi: s * v.phi_phi.re,
        mu_mu: -s * v.mu_mu.re,
        phi_mu_anti: s * v.phi_mu.im,
        phi_mu: s * v.phi_mu.re,
    })
}

/// Ordered drift correlation of the beam phase,
/// the average of `(phi(tau) - phi(0)) phi(0)`.
pub fn phase_drift_correlation(
    jj: &KernelSet,
    tau: f64,
    c_sq: f64,
    dnu_j: f64,
) -> Result<Complex64> {
    let now = jj.eval(tau)?;
    let zero = jj.eval(0.0)?;
    Ok(I / (4.0 * c_sq) * (now.phi_phi - zero.phi_phi) - dnu_j * tau)
}

/// Ordered amplitude autocorrelation, the average of `mu(tau) mu(0)`.
pub fn amplitude_autocorrelation(jj: &KernelSet, tau: f64, c_sq: f64) -> Result<Complex64> {
    Ok(I / (4.0 * c_sq) * jj.eval(tau)?.mu_mu)
}

/// Antisymmetric cross correlation between amplitude and phase, the average
/// of `mu_j(tau) phi_l(0)` minus the average of `phi_j(tau) mu_l(0)`.
pub fn quadrature_asymmetry(ks: &KernelSet, tau: f64, c_sq: f64) -> Result<Complex64> {
    let v = ks.eval(tau)?;
    Ok((v.mu_phi + v.phi_mu) / (4.0 * c_sq))
}

/// Variance of the phase change accumulated over `tau`.
pub fn phase_delay_variance(jj: &KernelSet, tau: f64, c_sq: f64, dnu_j: f64) -> Result<f64> {
    let now = jj.eval(tau)?;
    let zero = jj.eval(0.0)?;
    Ok((now.phi_phi - zero.phi_phi).im / (2.0 * c_sq) + 2.0 * dnu_j * tau)
}

/// Variance of the locked phase sum of the twin beams at delay `tau`.
pub fn phase_sum_variance(bk: &BeamKernels, tau: f64, c_sq: f64, dnu_j: f64) -> Result<f64> {
    let cross = bk.cross.eval(tau)?.phi_phi;
    let cross_rev = bk.cross_rev.eval(tau)?.phi_phi;
    let self_zero = bk.jj.eval(0.0)?.phi_phi;
    let twin_zero = bk.twin.eval(0.0)?.phi_phi;
    let combo = cross - cross_rev.conj() + self_zero - twin_zero.conj();
    Ok(combo.im / (4.0 * c_sq) + 2.0 * dnu_j * tau)
}

/// Beam linewidth split into its drive and spontaneous parts.
#[derive(Debug, Clone, Copy)]
pub struct Linewidth {
    /// Full linewidth.
    pub total: f64,
    /// Broadening factor multiplying the drive linewidth.
    pub broadening: f64,
    /// Drive contribution.
    pub drive: f64,
    /// Spontaneous phase-diffusion contribution.
    pub spontaneous: f64,
}

/// Drive-linewidth broadening factor of beam `j`.
pub fn broadening_factor(np: &NormalizedParams, e: f64, j: u8) -> Result<f64> {
    check_beam(j)?;
    let ex = effective_excitation(e, np.psi)?;
    if !(ex.script_e > 1.0) {
        return Err(Error::Validation(
            "pump parameter must exceed one above threshold".into(),
        ));
    }
    let t = np.psi.tan();
    let dj = np.delta_j(j as usize);
    let num = Complex64::new(ex.e_eff - 1.0, 0.0)
        - Complex64::new(t * t - (ex.e_eff - 1.0), ex.e_eff * t) * dj;
    let f = num / (2.0 * ex.e_eff) * (e * np.psi.cos() / (ex.e_eff - 1.0));
    Ok(f.norm_sqr())
}

/// Linewidth of beam `j` for a drive of linewidth `dnu_l`.
pub fn linewidth(np: &NormalizedParams, e: f64, j: u8, c_sq: f64, dnu_l: f64) -> Result<Linewidth> {
    if !(c_sq > 0.0) {
        return Err(Error::Validation("photon-number scale must be positive".into()));
    }
    if !(dnu_l >= 0.0) {
        return Err(Error::Validation("drive linewidth must be nonnegative".into()));
    }
    let broadening = broadening_factor(np, e, j)?;
    let nu = 1.0 - np.delta_tilde * np.delta_tilde;
    let cos = np.psi.cos();
    let spontaneous = nu * nu / (8.0 * c_sq * cos.powi(4));
    Ok(Linewidth {
        total: broadening * dnu_l + spontaneous,
        broadening,
        drive: broadening * dnu_l,
        spontaneous,
    })
}

/// Phase-factor autocorrelation of one beam, the average of
/// `exp(i phi(tau)) exp(-i phi(0))`.
pub fn phase_factor_self(jj: &KernelSet, tau: f64, c_sq: f64, dnu_j: f64) -> Result<Complex64> {
    let now = jj.eval(tau)?;
    let zero = jj.eval(0.0)?;
    Ok((-dnu_j * tau).exp() * (1.0 + I / (4.0 * c_sq) * (now.phi_phi - zero.phi_phi)))
}

/// Phase-factor cross correlation of the twin beams, the average of
/// `exp(-i phi_j(tau)) exp(-i phi_j'(0))`.
pub fn phase_factor_cross(cross: &KernelSet, tau: f64, c_sq: f64, dnu_j: f64) -> Result<Complex64> {
    let now = cross.eval(tau)?;
    let zero = cross.eval(0.0)?;
    Ok((-dnu_j * tau).exp() * (1.0 + I / (4.0 * c_sq) * (now.phi_phi - zero.phi_phi)))
}

/// First-order coherence of one beam, the average of
/// `a_dag(tau) a(0)`, for squared amplitude `r_sq`.
pub fn first_order_coherence(
    jj: &KernelSet,
    tau: f64,
    c_sq: f64,
    dnu_j: f64,
    r_sq: f64,
) -> Result<Complex64> {
    let now = jj.eval(tau)?;
    let zero = jj.eval(0.0)?;
    let combo = now.mu_mu + now.phi_phi - zero.phi_phi - now.mu_phi - now.phi_mu;
    Ok(r_sq * (-dnu_j * tau).exp() * (1.0 + I / (4.0 * c_sq) * combo))
}

/// Cross coherence of the twin beams, the average of `a_j(tau) a_j'(0)`,
/// for squared amplitudes `r_sq = [r_j^2, r_j'^2]`.
pub fn cross_coherence(
    cross: &KernelSet,
    tau: f64,
    c_sq: f64,
    dnu_j: f64,
    r_sq: [f64; 2],
) -> Result<Complex64> {
    let now = cross.eval(tau)?;
    let zero = cross.eval(0.0)?;
    let combo = now.mu_mu + now.phi_phi - zero.phi_phi - now.mu_phi - now.phi_mu;
    Ok((r_sq[0] * r_sq[1]).sqrt() * (-dnu_j * tau).exp() * (1.0 + I / (4.0 * c_sq) * combo))
}

/// Normalized time-ordered intensity autocovariance kernel of one beam.
///
/// Its even Fourier transform reproduces the ordered intensity spectrum.
pub fn intensity_kernel(jj: &KernelSet, tau: f64) -> Result<f64> {
    let v = jj.eval(tau)?;
    Ok(-2.0 * v.mu_mu.im - v.phi_mu.re)
}

/// Time-ordered intensity autocovariance of one beam with squared
/// amplitude `r_sq`.
pub fn intensity_variance(jj: &KernelSet, tau: f64, c_sq: f64, r_sq: f64) -> Result<f64> {
    Ok(r_sq * r_sq / (2.0 * c_sq) * intensity_kernel(jj, tau)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::pump_parameter;

    fn np(g0: f64, d: f64, psi: f64) -> NormalizedParams {
        NormalizedParams::new(g0, d, psi).unwrap()
    }

    fn close(a: Complex64, re: f64, im: f64, tol: f64) -> bool {
        (a - Complex64::new(re, im)).norm() <= tol * Complex64::new(re, im).norm().max(1.0)
    }

    #[test]
    fn balanced_kernels_match_references() {
        let p = np(4.0, 0.0, 0.1);

        let e_low = pump_parameter(1.5, 0.1).unwrap();
        assert!((e_low - 1.498333796347805).abs() < 1e-12);
        let ks = KernelSet::new(&p, e_low, 1, 1).unwrap();
        let v = ks.eval(0.5).unwrap();
        assert!(close(v.mu_mu, -0.02482727450404565, -0.8320574995701956, 1e-8));
        assert!(close(v.phi_mu, 0.012914540410138814, -0.12166336091705492, 1e-8));
        assert!(close(v.phi_phi, 0.018548195266411088, -0.08444984867123104, 1e-8));
        let v = ks.eval(2.0).unwrap();
        assert!(close(v.mu_mu, -0.004672845226574747, -0.08821420335563315, 1e-8));
        assert!(close(v.phi_mu, 0.00041195512247126537, 0.0014117570227145763, 1e-8));
        assert!(close(v.phi_phi, 0.0009234602658288489, 0.0009619947339405201, 1e-8));

        let e_high = pump_parameter(4.0, 0.1).unwrap();
        assert!((e_high - 3.996251367427749).abs() < 1e-12);
        let ks = KernelSet::new(&p, e_high, 1, 1).unwrap();
        let v = ks.eval(0.5).unwrap();
        assert!(close(v.mu_mu, -0.0016791935122669071, 0.011724936650521696, 1e-8));
        assert!(close(v.phi_mu, 0.0068000756310429246, 0.06731822495088732, 1e-8));
        assert!(close(v.phi_phi, 0.018548195266399743, 0.04359104090498223, 1e-8));
        let v = ks.eval(2.0).unwrap();
        assert!(close(v.mu_mu, 0.0005220059909945335, 0.005497673045250387, 1e-8));
        assert!(close(v.phi_mu, 0.0004323427502507503, 0.001272142222723366, 1e-8));
        assert!(close(v.phi_phi, 0.0009234602658287267, 0.0010255761706627485, 1e-8));
    }

    #[test]
    fn mismatched_phase_kernels_match_references() {
        let p = np(4.0, 0.2, 0.1);
        let refs_low = [
            (0.5, 0.008080503308545322, -0.13474953650316177),
            (1.0, -0.0004480813407205077, -0.0118721140283968),
            (2.0, -0.0009696288491300828, 0.0018567216376615117),
            (4.0, -8.940774435627294e-05, 2.1572744902209264e-05),
        ];
        let refs_high = [
            (0.5, 0.01441221915596544, 0.07322671089997435),
            (1.0, 0.007577008697150451, 0.005327768565874433),
            (2.0, 0.0009623006010890411, 0.0015434949750180826),
            (4.0, 2.27174818735526e-05, -2.5076855119839323e-06),
        ];
        for (script_e, refs) in [(1.5, refs_low), (4.0, refs_high)] {
            let e = pump_parameter(script_e, 0.1).unwrap();
            let ks = KernelSet::new(&p, e, 1, 1).unwrap();
            for (tau, re, im) in refs {
                let v = ks.eval(tau).unwrap();
                assert!(
                    close(v.phi_phi, re, im, 1e-7),
                    "script_e = {script_e}, tau = {tau}: {}",
                    v.phi_phi
                );
            }
        }
    }

    #[test]
    fn resonant_kernels_are_purely_imaginary() {
        let p = np(2.0, 0.1, 0.0);
        let ks = KernelSet::new(&p, 3.0, 1, 1).unwrap();
        for tau in [0.001, 0.3, 1.0] {
            let v = ks.eval(tau).unwrap();
            for part in [v.phi_phi.re, v.mu_mu.re, v.mu_phi.re, v.phi_mu.re] {
                assert!(part.abs() < 1e-9, "tau = {tau}: {part}");
            }
        }
        let v = ks.eval(0.001).unwrap();
        assert!((v.phi_mu.im - -0.603789).abs() < 1e-5);
        assert!((v.mu_phi.im - -1.098789).abs() < 1e-5);
        let v = ks.eval(0.3).unwrap();
        assert!(((v.mu_phi + v.phi_mu).im - -0.88280953).abs() < 1e-6);
    }

    #[test]
    fn detuned_kernels_match_probe_values() {
        let p = np(2.0, 0.1, 0.1);
        let ks = KernelSet::new(&p, 3.0, 1, 1).unwrap();
        let v = ks.eval(0.3).unwrap();
        assert!((v.phi_phi.re - 0.023676).abs() < 1e-5);
        assert!((v.mu_mu.re - -0.021044).abs() < 1e-5);
        assert!((v.phi_mu.im - -0.219828).abs() < 1e-5);
        assert!((v.phi_mu.re - 0.012390).abs() < 1e-5);
        assert!((v.mu_phi.im - -0.665537).abs() < 1e-5);
        assert!((v.mu_phi.re - -0.011396).abs() < 1e-5);
    }

    #[test]
    fn commutator_null_pattern_follows_detuning() {
        let c_sq = 50.0;
        let p = np(2.0, 0.1, 0.0);
        let ks = KernelSet::new(&p, 3.0, 1, 1).unwrap();
        let cv = commutators(&ks, 0.3, c_sq).unwrap();
        assert!(cv.phi_phi.abs() < 1e-10);
        assert!(cv.mu_mu.abs() < 1e-10);
        assert!(cv.phi_mu.abs() < 1e-10);
        assert!(cv.phi_mu_anti.abs() > 1e-4);

        let p = np(2.0, 0.1, 0.1);
        let ks = KernelSet::new(&p, 3.0, 1, 1).unwrap();
        let cv = commutators(&ks, 0.3, c_sq).unwrap();
        for value in [cv.phi_phi, cv.mu_mu, cv.phi_mu_anti, cv.phi_mu] {
            assert!(value.abs() > 1e-6);
        }
    }

    #[test]
    fn broadening_factor_quarter_at_resonance() {
        let f = broadening_factor(&np(2.0, 0.0, 0.0), 3.0, 1).unwrap();
        assert!((f - 0.25).abs() < 1e-12);
        let f = broadening_factor(&np(0.7, 0.0, 0.0), 1.4, 2).unwrap();
        assert!((f - 0.25).abs() < 1e-12);
    }

    #[test]
    fn broadening_factor_matches_zero_frequency_response() {
        let p = np(2.0, 0.1, 0.3);
        let e = 3.0;
        let ex = effective_excitation(e, p.psi).unwrap();
        for j in [1u8, 2u8] {
            let k0 = k_eval(&p, e, Complex64::new(0.0, 0.0), Route::General, 0.0)
                .unwrap()
                .phase(j, 0);
            let want = (k0 * e * p.psi.cos() / (ex.e_eff - 1.0)).norm_sqr();
            let got = broadening_factor(&p, e, j).unwrap();
            assert!((got - want).abs() < 1e-10 * want, "j = {j}: {got} vs {want}");
        }
    }

    #[test]
    fn linewidth_combines_drive_and_spontaneous_parts() {
        let p = np(2.0, 0.1, 0.3);
        let lw = linewidth(&p, 3.0, 1, 40.0, 0.02).unwrap();
        assert!((lw.total - lw.drive - lw.spontaneous).abs() < 1e-15);
        assert!((lw.drive - lw.broadening * 0.02).abs() < 1e-15);
        let nu = 1.0 - 0.01;
        let want = nu * nu / (8.0 * 40.0 * 0.3f64.cos().powi(4));
        assert!((lw.spontaneous - want).abs() < 1e-15);
        assert!(linewidth(&p, 3.0, 1, 0.0, 0.02).is_err());
    }

    #[test]
    fn phase_variances_accumulate() {
        let p = np(4.0, 0.2, 0.1);
        let e = pump_parameter(1.5, 0.1).unwrap();
        let bk = BeamKernels::new(&p, e, 1).unwrap();
        let c_sq = 60.0;
        let dnu = linewidth(&p, e, 1, c_sq, 0.0).unwrap().total;
        let mut last = 0.0;
        for tau in [0.2, 0.8, 2.0, 6.0] {
            let v = phase_delay_variance(&bk.jj, tau, c_sq, dnu).unwrap();
            assert!(v > last, "tau = {tau}: {v} <= {last}");
            last = v;
        }
        let v = phase_sum_variance(&bk, 1.0, c_sq, dnu).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn coherence_functions_decay() {
        let p = np(4.0, 0.2, 0.1);
        let e = pump_parameter(4.0, 0.1).unwrap();
        let bk = BeamKernels::new(&p, e, 1).unwrap();
        let c_sq = 80.0;
        let dnu = linewidth(&p, e, 1, c_sq, 0.0).unwrap().total;
        let g_short = first_order_coherence(&bk.jj, 0.1, c_sq, dnu, 2.5).unwrap();
        let g_long = first_order_coherence(&bk.jj, 40.0, c_sq, dnu, 2.5).unwrap();
        assert!(g_short.norm() > g_long.norm());
        assert!((phase_factor_self(&bk.jj, 0.0, c_sq, dnu).unwrap() - 1.0).norm() < 1e-12);
        let cross = phase_factor_cross(&bk.cross, 0.0, c_sq, dnu).unwrap();
        assert!((cross - 1.0).norm() < 1e-12);
        let g2 = cross_coherence(&bk.cross, 0.5, c_sq, dnu, [2.5, 2.2]).unwrap();
        assert!(g2.is_finite());
    }

    #[test]
    fn intensity_kernel_decays() {
        let p = np(2.0, 0.1, 0.1);
        let ks = KernelSet::new(&p, 3.0, 1, 1).unwrap();
        let near = intensity_kernel(&ks, 0.3).unwrap();
        let far = intensity_kernel(&ks, 12.0).unwrap();
        assert!(near.abs() > far.abs());
        let v = intensity_variance(&ks, 0.3, 50.0, 2.0).unwrap();
        assert!((v - 4.0 / 100.0 * near).abs() < 1e-12 * near.abs());
    }

    #[test]
    fn invalid_requests_rejected() {
        let p = np(2.0, 0.1, 0.1);
        assert!(KernelSet::new(&p, 3.0, 0, 1).is_err());
        assert!(KernelSet::new(&p, 3.0, 1, 3).is_err());
        let ks = KernelSet::new(&p, 3.0, 1, 1).unwrap();
        assert!(ks.eval(-0.5).is_err());
        assert!(broadening_factor(&p, 3.0, 0).is_err());
        assert!(linewidth(&p, 3.0, 1, 50.0, -1.0).is_err());
    }
}
