//! Noise spectra of the emitted beams.
//!
//! The amplitude-quadrature spectrum of a single beam splits into a quantum
//! part, two pump technical-noise parts (amplitude and phase) and a
//! commutator part that accounts for the ordering of the measured
//! quadratures at nonzero cavity detuning.  The same decomposition applies
//! to the weighted intensity difference of the twin beams, the observable
//! of sub-shot-noise correlation measurements.
//!
//! One-sided responses are evaluated at both signs of the frequency and
//! summed, so every reported spectrum is even.  Output spectra can be
//! normalized to the shot-noise level of the measured beam.

use crate::model::{effective_excitation, NormalizedParams};
use crate::transfer::{col_index, k_eval, residues, Quadrature, Route, TransferEval};
use crate::{Error, Result};
use num_complex::Complex64;

/// Noise weights of the intracavity sources and the pump technical noise.
#[derive(Debug, Clone, Copy)]
pub struct NoiseWeights {
    /// Source weights indexed like [`col_index`]: beam 1, beam 2, pump.
    pub zeta: [f64; 3],
    /// Squared drive-to-pump transfer factor weighting the technical parts.
    pub pump_prefactor: f64,
    /// Phase offset between the drive and the intracavity pump.
    pub psi_p: f64,
    /// Flat spectral density of the drive amplitude noise.
    pub s_eps: f64,
    /// Drive linewidth; the drive phase spectral density is its square
    /// over the squared frequency.
    pub dnu_l: f64,
}

impl NoiseWeights {
    /// Builds the weights for a working point, with technical noise levels.
    pub fn new(np: &NormalizedParams, e: f64, s_eps: f64, dnu_l: f64) -> Result<NoiseWeights> {
        if !(s_eps >= 0.0) || !(dnu_l >= 0.0) {
            return Err(Error::Validation(
                "technical noise levels must be nonnegative".into(),
            ));
        }
        let ex = effective_excitation(e, np.psi)?;
        let cos = np.psi.cos();
        let ratio = e / (ex.script_e - 1.0);
        Ok(NoiseWeights {
            zeta: [2.0 * cos, 2.0 * cos, 2.0 / (ex.script_e - 1.0)],
            pump_prefactor: ratio * ratio,
            psi_p: (np.psi.sin() / e).asin(),
            s_eps,
            dnu_l,
        })
    }

    /// Weight of the source attached to mode `k`.
    #[must_use]
    pub fn zeta_for(&self, k: u8) -> f64 {
        self.zeta[col_index(k)]
    }

    /// Drive phase spectral density at frequency `w`.
    #[must_use]
    pub fn s_phi(&self, w: f64) -> f64 {
        if self.dnu_l == 0.0 {
            0.0
        } else if w == 0.0 {
            f64::INFINITY
        } else {
            let r = self.dnu_l / w;
            r * r
        }
    }
}

/// Which field the spectrum refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Intracavity fluctuations.
    Internal,
    /// Beam leaving through the coupling mirror.
    Output,
}

/// One spectrum sample, split into its physical contributions.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumPoint {
    /// Analysis frequency.
    pub omega: f64,
    /// Quantum part.
    pub quantum: f64,
    /// Drive amplitude-noise part, fully weighted.
    pub pump_amp: f64,
    /// Drive phase-noise part, fully weighted.
    pub pump_phase: f64,
    /// Commutator part from the quadrature ordering.
    pub commutator: f64,
}

impl SpectrumPoint {
    /// Sum of all contributions.
    #[must_use]
    pub fn total(&self) -> f64 {
        self.quantum + self.pump_amp + self.pump_phase + self.commutator
    }
}

/// Single-beam spectrum over a frequency grid.
#[derive(Debug, Clone)]
pub struct SpectrumSeries {
    /// Field the spectrum refers to.
    pub target: Target,
    /// Beam index.
    pub j: u8,
    /// Shot-noise level of the measured beam.
    pub snl: f64,
    /// True when every contribution has been divided by the shot noise.
    pub normalized: bool,
    /// Samples in grid order.
    pub points: Vec<SpectrumPoint>,
}

/// Weighted intensity-difference spectrum over a frequency grid.
#[derive(Debug, Clone)]
pub struct DifferenceSeries {
    /// Mean photocurrent of beam 1.
    pub i1: f64,
    /// Mean photocurrent of beam 2.
    pub i2: f64,
    /// Shot-noise level of the weighted difference current.
    pub snl_d: f64,
    /// True when every contribution has been divided by the shot noise.
    pub normalized: bool,
    /// Samples in grid order.
    pub points: Vec<SpectrumPoint>,
}

/// Zero-frequency summary of the difference spectrum.
///
/// The drive phase density diverges at zero frequency, so the phase part is
/// reported as a transfer coefficient: the factor multiplying that density.
#[derive(Debug, Clone, Copy)]
pub struct DifferenceZero {
    /// Quantum part of the difference spectrum at zero frequency.
    pub quantum: f64,
    /// Fully weighted drive amplitude-noise part.
    pub pump_amp: f64,
    /// Drive phase-noise transfer coefficient (the diverging density is
    /// left out).
    pub phase_transfer: f64,
    /// Shot-noise level of the weighted difference current.
    pub snl_d: f64,
}

fn check_beam(j: u8) -> Result<()> {
    if j == 1 || j == 2 {
        Ok(())
    } else {
        Err(Error::Validation(format!("beam index must be 1 or 2, got {j}")))
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::Validation("frequency grid contains non-finite values".into()));
    }
    Ok(())
}

fn shot_noise(np: &NormalizedParams, j: u8) -> Result<f64> {
    let mirror = np.mirror(j as usize);
    if mirror <= 0.0 {
        return Err(Error::Validation(format!(
            "beam {j} has no coupling-mirror transmission left after crystal losses"
        )));
    }
    Ok(np.gamma_tot(j as usize) / (mirror * np.psi.cos()))
}

/// Quantum part of the single-beam spectrum at one signed frequency.
fn sigma_quantum(
    np: &NormalizedParams,
    weights: &NoiseWeights,
    k: &TransferEval,
    j: u8,
    target: Target,
) -> f64 {
    let jp = if j == 1 { 2 } else { 1 };
    let kjj = k.amp(j, j);
    let kjjp = k.amp(j, jp);
    let kj0 = k.amp(j, 0);
    match target {
        Target::Internal => {
            kjj.norm_sqr() * weights.zeta_for(j)
                + kjjp.norm_sqr() * weights.zeta_for(jp)
                + kj0.norm_sqr() * weights.zeta_for(0)
        }
        Target::Output => {
            let gtot = np.gamma_tot(j as usize);
            let mirror = np.mirror(j as usize);
            let crystal = np.crystal(j as usize);
            let sub = Complex64::new(1.0, np.psi.tan()) * gtot / (2.0 * mirror);
            kjjp.norm_sqr() * weights.zeta_for(jp)
                + ((kjj - sub).norm_sqr() * mirror / gtot + kjj.norm_sqr() * crystal / gtot)
                    * weights.zeta_for(j)
                + kj0.norm_sqr() * weights.zeta_for(0)
        }
    }
}

/// Symmetrized drive-noise quadrature sums for beam `j`: the amplitude-like
/// and phase-like combinations of the pump-source response, unweighted.
pub fn pump_quadrature_sums(np: &NormalizedParams, e: f64, j: u8, w: f64) -> Result<(f64, f64)> {
    check_beam(j)?;
    let psi_p = (np.psi.sin() / e).asin();
    let ep = Complex64::from_polar(1.0, psi_p);
    let mut eps = 0.0;
    let mut phi = 0.0;
    for ww in [w, -w] {
        let kv = k_eval(np, e, Complex64::new(ww, 0.0), Route::General, 0.0)?.amp(j, 0);
        let kd = k_eval(np, e, Complex64::new(-ww, 0.0), Route::General, 0.0)?
            .amp(j, 0)
            .conj();
        eps += ((ep * kv + kd / ep) / 2.0).norm_sqr();
        phi += ((ep * kv - kd / ep) / 2.0).norm_sqr();
    }
    Ok((eps, phi))
}

/// Precomputed pole expansion of the commutator-part spectrum.
struct CommutatorKernel {
    terms: Vec<(Complex64, Complex64)>,
}

impl CommutatorKernel {
    /// Single-beam kernel: phase-quadrature residues against the conjugated
    /// amplitude response, summed over all sources.
    fn single_beam(np: &NormalizedParams, e: f64, weights: &NoiseWeights, j: u8) -> Result<Self> {
        let table = residues(np, e)?;
        let mut terms = Vec::with_capacity(15);
        for k in [1u8, 2u8, 0u8] {
            let z = weights.zeta_for(k);
            for (r, root) in table.roots.iter().enumerate() {
                let amp_at = k_eval(np, e, root.conj(), Route::General, 0.0)?.amp(j, k);
                let coef = z * table.res(Quadrature::Phase, j, k, r) * amp_at.conj();
                terms.push((*root, coef));
            }
        }
        Ok(CommutatorKernel { terms })
    }

    /// Difference kernel: the beam rows enter through the same weighted
    /// combination as the measured current, residues included.
    fn difference(
        np: &NormalizedParams,
        e: f64,
        weights: &NoiseWeights,
        w1: f64,
        w2: f64,
    ) -> Result<Self> {
        let table = residues(np, e)?;
        let mut terms = Vec::with_capacity(15);
        for k in [1u8, 2u8, 0u8] {
            let z = weights.zeta_for(k);
            for (r, root) in table.roots.iter().enumerate() {
                let at = k_eval(np, e, root.conj(), Route::General, 0.0)?;
                let amp = w1 * at.amp(1, k) + w2 * at.amp(2, k);
                let res = w1 * table.res(Quadrature::Phase, 1, k, r)
                    + w2 * table.res(Quadrature::Phase, 2, k, r);
                terms.push((*root, z * res * amp.conj()));
            }
        }
        Ok(CommutatorKernel { terms })
    }

    fn eval(&self, w: f64) -> f64 {
        self.terms
            .iter()
            .map(|(root, coef)| {
                let wc = Complex64::new(w, 0.0);
                coef * (1.0 / (root - wc) + 1.0 / (root + wc))
            })
            .sum::<Complex64>()
            .im
    }
}

/// Computes the single-beam amplitude-quadrature spectrum of beam `j` on
/// `grid`, split into quantum, drive amplitude, drive phase and commutator
/// contributions.
pub fn single_beam_spectrum(
    np: &NormalizedParams,
    e: f64,
    weights: &NoiseWeights,
    j: u8,
    target: Target,
    grid: &[f64],
    normalize: bool,
) -> Result<SpectrumSeries> {
    check_beam(j)?;
    check_grid(grid)?;
    if normalize && target == Target::Internal {
        return Err(Error::Validation(
            "shot-noise normalization applies to the output spectrum only".into(),
        ));
    }
    let snl = match target {
        Target::Output => shot_noise(np, j)?,
        Target::Internal => shot_noise(np, j).unwrap_or(f64::NAN),
    };
    let comm = CommutatorKernel::single_beam(np, e, weights, j)?;
    let scale = if normalize { 1.0 / snl } else { 1.0 };

    let mut points = Vec::with_capacity(grid.len());
    for &w in grid {
        let mut quantum = 0.0;
        for ww in [w, -w] {
            let kv = k_eval(np, e, Complex64::new(ww, 0.0), Route::General, 0.0)?;
            quantum += sigma_quantum(np, weights, &kv, j, target);
        }
        let (eps_sum, phi_sum) = pump_quadrature_sums(np, e, j, w)?;
        points.push(SpectrumPoint {
            omega: w,
            quantum: quantum * scale,
            pump_amp: weights.pump_prefactor * weights.s_eps * eps_sum * scale,
            pump_phase: weights.pump_prefactor * weights.s_phi(w) * phi_sum * scale,
            commutator: comm.eval(w) * scale,
        });
    }
    Ok(SpectrumSeries {
        target,
        j,
        snl,
        normalized: normalize,
        points,
    })
}

fn difference_weights(np: &NormalizedParams) -> Result<(f64, f64, f64, f64, f64)> {
    let cos = np.psi.cos();
    let mut currents = [0.0; 2];
    for j in [1usize, 2usize] {
        let mirror = np.mirror(j);
        if mirror <= 0.0 {
            return Err(Error::Validation(format!(
                "beam {j} has no coupling-mirror transmission left after crystal losses"
            )));
        }
        currents[j - 1] = 2.0 * mirror / np.gamma_tot(j) * cos;
    }
    let [i1, i2] = currents;
    let itot = i1 + i2;
    let (w1, w2) = (i1 / itot, -i2 / itot);
    let snl_d = (i1 / itot).powi(2) * np.gamma_tot(1) / (np.mirror(1) * cos)
        + (i2 / itot).powi(2) * np.gamma_tot(2) / (np.mirror(2) * cos);
    Ok((i1, i2, w1, w2, snl_d))
}

/// Quantum part of the difference spectrum at one signed frequency.
fn sigma_difference(
    np: &NormalizedParams,
    weights: &NoiseWeights,
    k: &TransferEval,
    w1: f64,
    w2: f64,
) -> f64 {
    let mut s = 0.0;
    let dk = |col: u8| w1 * k.amp(1, col) + w2 * k.amp(2, col);
    for (j, wj) in [(1u8, w1), (2u8, w2)] {
        let gtot = np.gamma_tot(j as usize);
        let mirror = np.mirror(j as usize);
        let crystal = np.crystal(j as usize);
        let dkj = dk(j);
        let sub = Complex64::new(1.0, np.psi.tan()) * wj * gtot / (2.0 * mirror);
        s += ((dkj - sub).norm_sqr() * mirror / gtot + dkj.norm_sqr() * crystal / gtot)
            * weights.zeta_for(j);
    }
    s + dk(0).norm_sqr() * weights.zeta_for(0)
}

/// Computes the weighted intensity-difference spectrum on `grid`.
pub fn difference_spectrum(
    np: &NormalizedParams,
    e: f64,
    weights: &NoiseWeights,
    grid: &[f64],
    normalize: bool,
) -> Result<DifferenceSeries> {
    check_grid(grid)?;
    let (i1, i2, w1, w2, snl_d) = difference_weights(np)?;
    let comm = CommutatorKernel::difference(np, e, weights, w1, w2)?;
    let scale = if normalize { 1.0 / snl_d } else { 1.0 };
    let psi_p = (np.psi.sin() / e).asin();
    let ep = Complex64::from_polar(1.0, psi_p);

    let mut points = Vec::with_capacity(grid.len());
    for &w in grid {
        let mut quantum = 0.0;
        let mut eps_sum = 0.0;
        let mut phi_sum = 0.0;
        for ww in [w, -w] {
            let kv = k_eval(np, e, Complex64::new(ww, 0.0), Route::General, 0.0)?;
            quantum += sigma_difference(np, weights, &kv, w1, w2);
            let dk0 = w1 * kv.amp(1, 0) + w2 * kv.amp(2, 0);
            let back = k_eval(np, e, Complex64::new(-ww, 0.0), Route::General, 0.0)?;
            let dk0d = (w1 * back.amp(1, 0) + w2 * back.amp(2, 0)).conj();
            eps_sum += ((ep * dk0 + dk0d / ep) / 2.0).norm_sqr();
            phi_sum += ((ep * dk0 - dk0d / ep) / 2.0).norm_sqr();
        }
        points.push(SpectrumPoint {
            omega: w,
            quantum: quantum * scale,
            pump_amp: weights.pump_prefactor * weights.s_eps * eps_sum * scale,
            pump_phase: weights.pump_prefactor * weights.s_phi(w) * phi_sum * scale,
            commutator: comm.eval(w) * scale,
        });
    }
    Ok(DifferenceSeries {
        i1,
        i2,
        snl_d,
        normalized: normalize,
        points,
    })
}

/// Evaluates the difference spectrum exactly at zero frequency.
///
/// The amplitude responses are regular there, so the quantum and drive
/// amplitude parts are exact; the drive phase part is returned as a
/// transfer coefficient since its spectral density diverges.
pub fn difference_zero_frequency(
    np: &NormalizedParams,
    e: f64,
    weights: &NoiseWeights,
) -> Result<DifferenceZero> {
    let (_, _, w1, w2, snl_d) = difference_weights(np)?;
    let kv = k_eval(np, e, Complex64::new(0.0, 0.0), Route::General, 0.0)?;
    let quantum = 2.0 * sigma_difference(np, weights, &kv, w1, w2);
    let dk0 = w1 * kv.amp(1, 0) + w2 * kv.amp(2, 0);
    let ep = Complex64::from_polar(1.0, (np.psi.sin() / e).asin());
    let eps_sum = 2.0 * ((ep * dk0 + dk0.conj() / ep) / 2.0).norm_sqr();
    let phi_sum = 2.0 * ((ep * dk0 - dk0.conj() / ep) / 2.0).norm_sqr();
    Ok(DifferenceZero {
        quantum,
        pump_amp: weights.pump_prefactor * weights.s_eps * eps_sum,
        phase_transfer: weights.pump_prefactor * phi_sum,
        snl_d,
    })
}

/// Commutator-part spectrum of beam `j` at one frequency, standalone.
pub fn commutator_spectrum(
    np: &NormalizedParams,
    e: f64,
    weights: &NoiseWeights,
    j: u8,
    w: f64,
) -> Result<f64> {
    check_beam(j)?;
    Ok(CommutatorKernel::single_beam(np, e, weights, j)?.eval(w))
}

/// Internal quantum spectrum of beam `j` at one signed frequency.
pub fn sigma_mu_internal(np: &NormalizedParams, e: f64, weights: &NoiseWeights, j: u8, w: f64) -> Result<f64> {
    check_beam(j)?;
    let kv = k_eval(np, e, Complex64::new(w, 0.0), Route::General, 0.0)?;
    Ok(sigma_quantum(np, weights, &kv, j, Target::Internal))
}

/// Output quantum spectrum of beam `j` at one signed frequency.
pub fn sigma_mu_output(np: &NormalizedParams, e: f64, weights: &NoiseWeights, j: u8, w: f64) -> Result<f64> {
    check_beam(j)?;
    shot_noise(np, j)?;
    let kv = k_eval(np, e, Complex64::new(w, 0.0), Route::General, 0.0)?;
    Ok(sigma_quantum(np, weights, &kv, j, Target::Output))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn np(g0: f64, d: f64, psi: f64) -> NormalizedParams {
        NormalizedParams::new(g0, d, psi).unwrap()
    }

    fn np_loss(g0: f64, d: f64, psi: f64, loss: [f64; 3]) -> NormalizedParams {
        NormalizedParams::new(g0, d, psi)
            .unwrap()
            .with_crystal_loss(loss)
            .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn internal_quantum_reference() {
        let p = np(2.0, 0.1, 0.3);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let s = sigma_mu_internal(&p, 3.0, &w, 1, 2.0).unwrap();
        assert!(rel(s, 0.9470510621104041) < 1e-12, "{s}");
    }

    #[test]
    fn output_quantum_reference() {
        let p = np_loss(2.0, 0.1, 0.3, [0.2, 0.15, 0.05]);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let s = sigma_mu_output(&p, 3.0, &w, 1, 2.0).unwrap();
        assert!(rel(s, 0.7824872936453424) < 1e-12, "{s}");
    }

    #[test]
    fn commutator_kernel_reference() {
        let p = np(2.0, 0.1, 0.3);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let s = commutator_spectrum(&p, 3.0, &w, 1, 2.0).unwrap();
        assert!(rel(s, -0.04088010491402843) < 1e-9, "{s}");
    }

    #[test]
    fn commutator_vanishes_at_resonance() {
        let p = np(2.0, 0.1, 0.0);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        for omega in [0.5, 1.5, 3.0] {
            let s = commutator_spectrum(&p, 3.0, &w, 1, omega).unwrap();
            assert!(s.abs() < 1e-12, "psi = 0 must kill the commutator part, got {s}");
        }
    }

    #[test]
    fn single_beam_series_matches_references() {
        // gtilde0 = 4, delta = 0.05, E = 3, crystal losses 0.3/0.3/0.1.
        let e = 3.0;
        let quiet = |p: &NormalizedParams| NoiseWeights::new(p, e, 0.0, 0.0).unwrap();

        let p0 = np_loss(4.0, 0.05, 0.0, [0.3, 0.3, 0.1]);
        let s0 = single_beam_spectrum(&p0, e, &quiet(&p0), 1, Target::Output, &[0.7, 3.3], false).unwrap();
        assert!(rel(s0.snl, 1.4) < 1e-12);
        assert!(rel(s0.points[0].quantum, 1.0890748059243118) < 1e-12);
        assert!(rel(s0.points[1].quantum, 1.5454137100289997) < 1e-12);
        assert!(s0.points[0].commutator.abs() < 1e-12);

        let p25 = np_loss(4.0, 0.05, 0.25, [0.3, 0.3, 0.1]);
        let s25 = single_beam_spectrum(&p25, e, &quiet(&p25), 1, Target::Output, &[0.7, 3.3], false).unwrap();
        assert!(rel(s25.snl, 1.4449190335781399) < 1e-12);
        assert!(rel(s25.points[0].quantum, 1.1175193498052276) < 1e-12);
        assert!(rel(s25.points[0].commutator, -0.05964278675049906) < 1e-9);
        assert!(rel(s25.points[1].quantum, 1.596818682918384) < 1e-12);
        assert!(rel(s25.points[1].commutator, -0.029107429243911367) < 1e-9);
    }

    #[test]
    fn pump_sums_match_references() {
        let p = np_loss(4.0, 0.05, 0.25, [0.3, 0.3, 0.1]);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        assert!(rel(w.pump_prefactor, 2.2037701973217065) < 1e-12);
        let (e07, f07) = pump_quadrature_sums(&p, 3.0, 1, 0.7).unwrap();
        assert!(rel(e07, 0.5246704676417578) < 1e-12, "{e07}");
        assert!(rel(f07, 1.4951648361977466e-06) < 1e-9, "{f07}");
        let (e33, f33) = pump_quadrature_sums(&p, 3.0, 1, 3.3).unwrap();
        assert!(rel(e33, 0.7254674950733581) < 1e-12);
        assert!(rel(f33, 0.00099682893825795) < 1e-9);
    }

    #[test]
    fn pump_sums_obey_parallelogram_identity() {
        // The two quadrature sums together recover the unsplit response
        // power, independent of the pump phase offset.
        let p = np(2.0, 0.1, 0.3);
        let e = 3.0;
        for w in [0.6, 2.0, 4.5] {
            let (eps, phi) = pump_quadrature_sums(&p, e, 1, w).unwrap();
            let mut want = 0.0;
            for ww in [w, -w] {
                let k = k_eval(&p, e, Complex64::new(ww, 0.0), Route::General, 0.0)
                    .unwrap()
                    .amp(1, 0);
                let kd = k_eval(&p, e, Complex64::new(-ww, 0.0), Route::General, 0.0)
                    .unwrap()
                    .amp(1, 0)
                    .conj();
                want += (k.norm_sqr() + kd.norm_sqr()) / 2.0;
            }
            assert!(rel(eps + phi, want) < 1e-12);
        }
    }

    #[test]
    fn difference_series_matches_references() {
        let p = np_loss(4.0, 0.05, 0.0, [0.3, 0.3, 0.1]);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let s = difference_spectrum(&p, 3.0, &w, &[0.3, 2.0], true).unwrap();
        assert!(rel(s.points[0].total(), 0.3163521438708657) < 1e-12, "{}", s.points[0].total());
        assert!(rel(s.points[1].total(), 0.6524117218253026) < 1e-12);
    }

    #[test]
    fn difference_zero_frequency_reference() {
        let p = np_loss(4.0, 0.05, 0.0, [0.3, 0.3, 0.1]);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let z = difference_zero_frequency(&p, 3.0, &w).unwrap();
        assert!((z.quantum / z.snl_d - 0.3009).abs() < 2e-3, "{}", z.quantum / z.snl_d);
        // At zero detuning the phase-like combination closes at zero
        // frequency, so no drive phase noise leaks into the difference.
        assert!(z.phase_transfer.abs() < 1e-20);
    }

    #[test]
    fn balanced_lossless_difference_closes_at_zero_frequency() {
        let p = np(2.0, 0.0, 0.0);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let z = difference_zero_frequency(&p, 3.0, &w).unwrap();
        assert!(z.quantum.abs() < 1e-12, "{}", z.quantum);
    }

    #[test]
    fn lossless_resonant_output_reaches_shot_noise() {
        let p = np(2.0, 0.1, 0.0);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let s = sigma_mu_output(&p, 3.0, &w, 1, 1e3).unwrap();
        assert!((2.0 * s - 1.0).abs() < 1e-4, "{}", 2.0 * s);
    }

    #[test]
    fn lossy_detuned_output_asymptote() {
        let p = np_loss(4.0, 0.05, 0.4, [0.3, 0.3, 0.1]);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let s = 2.0 * sigma_mu_output(&p, 3.0, &w, 1, 3e3).unwrap();
        let asym = 1.05 / ((1.05 - 0.3) * 0.4f64.cos());
        assert!(rel(s, asym) < 1e-5, "{s} vs {asym}");
    }

    #[test]
    fn spectra_are_even() {
        let p = np_loss(2.0, 0.1, 0.3, [0.1, 0.1, 0.0]);
        let w = NoiseWeights::new(&p, 3.0, 1.0, 0.5).unwrap();
        let s = single_beam_spectrum(&p, 3.0, &w, 1, Target::Output, &[1.3, -1.3], false).unwrap();
        assert!(rel(s.points[0].total(), s.points[1].total()) < 1e-12);
        let d = difference_spectrum(&p, 3.0, &w, &[0.8, -0.8], false).unwrap();
        assert!(rel(d.points[0].total(), d.points[1].total()) < 1e-12);
    }

    #[test]
    fn normalization_divides_by_shot_noise() {
        let p = np_loss(4.0, 0.05, 0.0, [0.3, 0.3, 0.1]);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let raw = single_beam_spectrum(&p, 3.0, &w, 1, Target::Output, &[0.9], false).unwrap();
        let norm = single_beam_spectrum(&p, 3.0, &w, 1, Target::Output, &[0.9], true).unwrap();
        assert!(rel(norm.points[0].quantum, raw.points[0].quantum / raw.snl) < 1e-12);
    }

    #[test]
    fn invalid_requests_rejected() {
        let p = np(2.0, 0.1, 0.3);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        assert!(single_beam_spectrum(&p, 3.0, &w, 3, Target::Output, &[1.0], false).is_err());
        assert!(single_beam_spectrum(&p, 3.0, &w, 1, Target::Internal, &[1.0], true).is_err());
        assert!(single_beam_spectrum(&p, 3.0, &w, 1, Target::Output, &[f64::NAN], false).is_err());
        assert!(NoiseWeights::new(&p, 3.0, -1.0, 0.0).is_err());
        // Crystal loss eating the whole beam decay leaves no output port.
        let dead = np_loss(2.0, 0.1, 0.0, [1.1, 0.0, 0.0]);
        assert!(sigma_mu_output(&dead, 3.0, &w, 1, 1.0).is_err());
    }
}
