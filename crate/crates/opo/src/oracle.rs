//! Independent validation paths for the frequency-domain responses.
//!
//! Two routes cross-check the analytic transfer compositions.  The first
//! assembles the full six-dimensional fluctuation system and solves it
//! numerically per source, which validates every composition at once.  The
//! second integrates the linearized time-domain equations as classical
//! stochastic differential equations and estimates quadrature spectra with
//! segment-averaged periodograms.
//!
//! The stochastic route replaces the quantum inputs by complex white noises
//! reproducing the nonvanishing source correlators.  That validates the
//! filtering structure of the spectra, not operator-ordering observables,
//! which only the residue route reaches.

use crate::model::{effective_excitation, NormalizedParams};
use crate::resonances::{charpoly, roots, DEFAULT_SNAP_TOL};
use crate::spectra::NoiseWeights;
use crate::transfer::delta_set;
use crate::{linalg, Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which source is set to one in the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Injection {
    /// Intracavity source of mode `k` (1, 2 or 0 for the pump).
    Source(u8),
    /// Mirrored partner of the source of mode `k`.
    SourceDagger(u8),
    /// Drive amplitude noise, entering both pump rows.
    DriveAmp,
    /// Drive phase noise, entering both pump rows.
    DrivePhase,
}

fn source_row(k: u8) -> Result<usize> {
    match k {
        1 => Ok(0),
        2 => Ok(1),
        0 => Ok(2),
        _ => Err(Error::Validation(format!("mode index must be 0, 1 or 2, got {k}"))),
    }
}

/// Assembles the six-dimensional fluctuation system at frequency `w`.
///
/// Rows order the two beam equations, the pump equation and their mirrored
/// partners; columns order the unknowns the same way.
pub fn system_matrix(np: &NormalizedParams, e: f64, w: Complex64) -> Result<[[Complex64; 6]; 6]> {
    let d = delta_set(np, e, w)?;
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    Ok([
        [d.d1, zero, -one, zero, -one, zero],
        [zero, d.d2, -one, -one, zero, zero],
        [one, one, d.d0, zero, zero, zero],
        [zero, -one, zero, d.d1d, zero, -one],
        [-one, zero, zero, zero, d.d2d, -one],
        [zero, zero, zero, one, one, d.d0d],
    ])
}

fn drive_coefficient(np: &NormalizedParams, e: f64) -> Result<Complex64> {
    let ex = effective_excitation(e, np.psi)?;
    let psi_p = (np.psi.sin() / e).asin();
    Ok(e / (ex.script_e - 1.0) * Complex64::from_polar(1.0, psi_p))
}

/// Solves the assembled system for one unit injection.
///
/// The result orders the mode responses like the unknowns.  Frequencies on
/// a system resonance, including the free-phase zero, are rejected.
pub fn direct_solve(
    np: &NormalizedParams,
    e: f64,
    w: Complex64,
    injection: Injection,
) -> Result<[Complex64; 6]> {
    let cp = charpoly(np, e)?;
    let set = roots(&cp, DEFAULT_SNAP_TOL)?;
    if w.norm() < 1e-8 {
        return Err(Error::Numerical(
            "frequency sits on the free-phase resonance at the origin".into(),
        ));
    }
    for root in set.roots {
        if (w - root).norm() < 1e-8 * (1.0 + root.norm()) {
            return Err(Error::Numerical(format!("frequency sits on the resonance at {root}")));
        }
    }

    let m = system_matrix(np, e, w)?;
    let mut rows: Vec<Vec<Complex64>> = m.iter().map(|r| r.to_vec()).collect();
    let mut rhs = vec![Complex64::new(0.0, 0.0); 6];
    match injection {
        Injection::Source(k) => rhs[source_row(k)?] = Complex64::new(1.0, 0.0),
        Injection::SourceDagger(k) => rhs[source_row(k)? + 3] = Complex64::new(1.0, 0.0),
        Injection::DriveAmp => {
            let c = drive_coefficient(np, e)?;
            rhs[2] = c;
            rhs[5] = c.conj();
        }
        Injection::DrivePhase => {
            let c = -I * drive_coefficient(np, e)?;
            rhs[2] = c;
            rhs[5] = c.conj();
        }
    }
    linalg::solve_complex(&mut rows, &mut rhs)?;
    let mut out = [Complex64::new(0.0, 0.0); 6];
    out.copy_from_slice(&rhs);
    Ok(out)
}

/// Amplitude and phase quadrature responses of mode `j` from a solved
/// six-vector.
pub fn quadrature_response(x: &[Complex64; 6], j: u8) -> Result<(Complex64, Complex64)> {
    let row = source_row(j)?;
    Ok((x[row] + x[row + 3], x[row] - x[row + 3]))
}

/// Configuration of one stochastic integration run.
#[derive(Debug, Clone, Copy)]
pub struct SdeConfig {
    /// Integration step.
    pub dt: f64,
    /// Total steps, split evenly over the chunks.
    pub steps: u64,
    /// Seed; every chunk derives its own stream from it.
    pub seed: u64,
    /// Independent trajectory chunks, integrated in parallel.
    pub chunks: u32,
    /// Periodogram segment length.
    pub segment_len: usize,
}

impl SdeConfig {
    /// Reasonable defaults for a given step count.
    #[must_use]
    pub fn with_steps(steps: u64, seed: u64) -> SdeConfig {
        SdeConfig {
            dt: 0.0,
            steps,
            seed,
            chunks: 16,
            segment_len: 8192,
        }
    }
}

/// Estimated quadrature spectra of one stochastic run.
#[derive(Debug, Clone)]
pub struct SdeRun {
    /// Configuration actually used, with the resolved step.
    pub config: SdeConfig,
    /// Frequencies of the estimate.
    pub omega: Vec<f64>,
    /// Amplitude-quadrature spectra of the beams, same scale as the
    /// analytic internal spectra.
    pub s_mu: [Vec<f64>; 2],
    /// Standard errors of the estimates, overlap-corrected.
    pub stderr: [Vec<f64>; 2],
    /// Total periodogram segments averaged.
    pub segments: usize,
    /// Equivalent independent segment count after overlap correction.
    pub k_eff: f64,
}

/// Largest stable step for the stiffest rate in the system.
#[must_use]
pub fn max_stable_step(np: &NormalizedParams, e: f64) -> f64 {
    let fastest = 1.0_f64.max(np.gtilde0).max((2.0 * e * np.gtilde0).sqrt());
    0.01 / fastest
}

struct ChunkAccumulator {
    sum: [Vec<f64>; 2],
    sum_sq: [Vec<f64>; 2],
    segments: usize,
}

fn hann(n: usize) -> (Vec<f64>, f64) {
    let w: Vec<f64> = (0..n)
        .map(|i| (std::f64::consts::PI * i as f64 / n as f64).sin().powi(2))
        .collect();
    let power: f64 = w.iter().map(|x| x * x).sum();
    (w, power)
}

fn integrate_chunk(
    np: &NormalizedParams,
    e: f64,
    zeta: [f64; 3],
    cfg: &SdeConfig,
    chunk: u32,
    warmup: usize,
    n_steps: usize,
) -> Result<ChunkAccumulator> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chunk as u64);

    let ex = effective_excitation(e, np.psi)?;
    let kappa = [np.kappa_tilde(1), np.kappa_tilde(2)];
    let g0 = np.gtilde0;
    let pump_gain = (ex.script_e - 1.0) * Complex64::from_polar(1.0, -np.psi);
    let amp = [
        (zeta[0] * cfg.dt / 2.0).sqrt(),
        (zeta[1] * cfg.dt / 2.0).sqrt(),
        (zeta[2] * cfg.dt / 2.0).sqrt(),
    ];

    let mut a = [Complex64::new(0.0, 0.0); 3];
    let mut mu = [Vec::with_capacity(n_steps - warmup), Vec::with_capacity(n_steps - warmup)];
    for step in 0..n_steps {
        // Fixed draw order per step: beam 1, beam 2, pump, real part first.
        let dw = [
            Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * amp[0],
            Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * amp[1],
            Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * amp[2],
        ];
        let drift = [
            kappa[0] * (-a[0] + a[1].conj() + a[2]),
            kappa[1] * (-a[1] + a[0].conj() + a[2]),
            g0 * (-a[2] - pump_gain * (a[0] + a[1])),
        ];
        a[0] += cfg.dt * drift[0] + kappa[0] * dw[0];
        a[1] += cfg.dt * drift[1] + kappa[1] * dw[1];
        a[2] += cfg.dt * drift[2] + g0 * pump_gain * dw[2];
        if step % 1024 == 0 {
            let scale = a[0].norm() + a[1].norm() + a[2].norm();
            if !scale.is_finite() || scale > 1e9 {
                return Err(Error::Numerical(format!(
                    "trajectory blew up at step {step}; reduce the integration step"
                )));
            }
        }
        if step >= warmup {
            mu[0].push(a[0].re);
            mu[1].push(a[1].re);
        }
    }

    let n = cfg.segment_len;
    let (window, win_power) = hann(n);
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let bins = n / 2 - 1;
    let mut acc = ChunkAccumulator {
        sum: [vec![0.0; bins], vec![0.0; bins]],
        sum_sq: [vec![0.0; bins], vec![0.0; bins]],
        segments: 0,
    };
    let hop = n / 2;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut start = 0;
    while start + n <= mu[0].len() {
        for (beam, series) in mu.iter().enumerate() {
            for i in 0..n {
                buf[i] = Complex64::new(series[start + i] * window[i], 0.0);
            }
            fft.process(&mut buf);
            for k in 1..n / 2 {
                let p = cfg.dt * buf[k].norm_sqr() / win_power;
                acc.sum[beam][k - 1] += p;
                acc.sum_sq[beam][k - 1] += p * p;
            }
        }
        acc.segments += 1;
        start += hop;
    }
    Ok(acc)
}

/// Integrates the linearized fluctuations and estimates the beam
/// amplitude-quadrature spectra.
///
/// The run is deterministic for a fixed configuration: every chunk draws
/// from its own counter-selected stream and the partial results are merged
/// in chunk order.
pub fn sde_psd(
    np: &NormalizedParams,
    e: f64,
    weights: &NoiseWeights,
    cfg: &SdeConfig,
) -> Result<SdeRun> {
    let mut cfg = *cfg;
    let dt_max = max_stable_step(np, e);
    if cfg.dt == 0.0 {
        cfg.dt = dt_max;
    }
    if !(cfg.dt > 0.0) || cfg.dt > dt_max {
        return Err(Error::Validation(format!(
            "integration step {} exceeds the stable limit {dt_max:.6}",
            cfg.dt
        )));
    }
    if cfg.chunks == 0 {
        return Err(Error::Validation("at least one chunk is required".into()));
    }
    if cfg.segment_len < 16 || cfg.segment_len % 2 != 0 {
        return Err(Error::Validation(format!(
            "segment length must be an even number of at least 16 samples, got {}",
            cfg.segment_len
        )));
    }
    let n_steps = (cfg.steps / u64::from(cfg.chunks)) as usize;
    let warmup = ((20.0 / cfg.dt).ceil() as usize).min(n_steps / 5);
    let retained = n_steps.saturating_sub(warmup);
    if retained < 2 * cfg.segment_len {
        return Err(Error::Validation(format!(
            "each chunk retains {retained} samples, fewer than two segments of {}",
            cfg.segment_len
        )));
    }

    let zeta = weights.zeta;
    let partials: Vec<Result<ChunkAccumulator>> = (0..cfg.chunks)
        .into_par_iter()
        .map(|chunk| integrate_chunk(np, e, zeta, &cfg, chunk, warmup, n_steps))
        .collect();

    let bins = cfg.segment_len / 2 - 1;
    let mut sum = [vec![0.0; bins], vec![0.0; bins]];
    let mut sum_sq = [vec![0.0; bins], vec![0.0; bins]];
    let mut segments = 0usize;
    for partial in partials {
        let acc = partial?;
        for beam in 0..2 {
            for k in 0..bins {
                sum[beam][k] += acc.sum[beam][k];
                sum_sq[beam][k] += acc.sum_sq[beam][k];
            }
        }
        segments += acc.segments;
    }
    if segments < 64 {
        return Err(Error::Validation(format!(
            "only {segments} periodogram segments; at least 64 are required"
        )));
    }

    // Half-overlapping windowed segments are correlated; the equivalent
    // independent count shrinks by the squared window overlap weight.
    let k_eff = segments as f64 * 9.0 / 11.0;
    let omega: Vec<f64> = (1..cfg.segment_len / 2)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / (cfg.segment_len as f64 * cfg.dt))
        .collect();
    let mut s_mu = [vec![0.0; bins], vec![0.0; bins]];
    let mut stderr = [vec![0.0; bins], vec![0.0; bins]];
    for beam in 0..2 {
        for k in 0..bins {
            let mean = sum[beam][k] / segments as f64;
            let var = (sum_sq[beam][k] / segments as f64 - mean * mean).max(0.0)
                * segments as f64
                / (segments as f64 - 1.0);
            s_mu[beam][k] = 4.0 * mean;
            stderr[beam][k] = 4.0 * (var / k_eff).sqrt();
        }
    }
    Ok(SdeRun {
        config: cfg,
        omega,
        s_mu,
        stderr,
        segments,
        k_eff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::sigma_mu_internal;
    use crate::transfer::{k_eval, Route};

    fn np(g0: f64, d: f64, psi: f64) -> NormalizedParams {
        NormalizedParams::new(g0, d, psi).unwrap()
    }

    #[test]
    fn matrix_reflects_into_itself_under_partner_swap() {
        let e = 3.0;
        let w = Complex64::new(1.3, 0.2);
        let m = system_matrix(&np(2.0, 0.1, 0.3), e, w).unwrap();
        let flipped = system_matrix(&np(2.0, 0.1, -0.3), e, w).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let swapped = flipped[(i + 3) % 6][(j + 3) % 6];
                assert!(
                    (m[i][j] - swapped).norm() < 1e-14,
                    "entry ({i}, {j}): {} vs {swapped}",
                    m[i][j]
                );
            }
        }
    }

    #[test]
    fn direct_solve_matches_analytic_compositions() {
        let cases = [
            (2.0, 0.1, 0.3, 3.0, 2.0),
            (0.5, 0.05, 0.0, 3.0, 1.3),
            (4.0, 0.2, 0.1, 1.5, 0.7),
            (1.3, -0.25, 0.45, 2.4, 4.1),
        ];
        for (g0, d, psi, e, omega) in cases {
            let p = np(g0, d, psi);
            let w = Complex64::new(omega, 0.0);
            let kv = k_eval(&p, e, w, Route::General, 0.0).unwrap();
            for k in [1u8, 2u8, 0u8] {
                let x = direct_solve(&p, e, w, Injection::Source(k)).unwrap();
                for j in [1u8, 2u8] {
                    let (amp, phase) = quadrature_response(&x, j).unwrap();
                    let refer = kv.amp(j, k);
                    assert!((amp - refer).norm() < 1e-11 * (1.0 + refer.norm()));
                    let refer = kv.phase(j, k);
                    assert!((phase - refer).norm() < 1e-11 * (1.0 + refer.norm()));
                }
                if k != 0 {
                    let (amp, _) = quadrature_response(&x, 0).unwrap();
                    let refer = if k == 1 { kv.k0_01 } else { kv.k0_02 }.unwrap();
                    assert!((amp - refer).norm() < 1e-11 * (1.0 + refer.norm()));
                }
            }
        }
    }

    #[test]
    fn dagger_injection_mirrors_frequency_reversal() {
        let p = np(2.0, 0.1, 0.3);
        let e = 3.0;
        let w = Complex64::new(1.7, 0.0);
        for k in [1u8, 2u8, 0u8] {
            let fwd = direct_solve(&p, e, -w, Injection::Source(k)).unwrap();
            let mirrored = direct_solve(&p, e, w, Injection::SourceDagger(k)).unwrap();
            for i in 0..6 {
                let want = fwd[(i + 3) % 6].conj();
                assert!(
                    (mirrored[i] - want).norm() < 1e-12 * (1.0 + want.norm()),
                    "source {k}, component {i}"
                );
            }
        }
    }

    #[test]
    fn resonant_responses_swap_with_beam_relabeling() {
        let e = 3.0;
        let w = Complex64::new(0.9, 0.0);
        let x1 = direct_solve(&np(2.0, 0.15, 0.0), e, w, Injection::Source(1)).unwrap();
        let x2 = direct_solve(&np(2.0, -0.15, 0.0), e, w, Injection::Source(2)).unwrap();
        let swap = [1usize, 0, 2, 4, 3, 5];
        for i in 0..6 {
            assert!(
                (x1[i] - x2[swap[i]]).norm() < 1e-12 * (1.0 + x1[i].norm()),
                "component {i}"
            );
        }
    }

    #[test]
    fn drive_injections_compose_the_pump_column() {
        let p = np(4.0, 0.05, 0.25);
        let e = 3.0;
        let ex = effective_excitation(e, p.psi).unwrap();
        let scale = e / (ex.script_e - 1.0);
        let psi_p = (p.psi.sin() / e).asin();
        let ep = Complex64::from_polar(1.0, psi_p);
        for omega in [0.7, 3.3] {
            let w = Complex64::new(omega, 0.0);
            for j in [1u8, 2u8] {
                let k_fwd = k_eval(&p, e, w, Route::General, 0.0).unwrap().amp(j, 0);
                let k_back = k_eval(&p, e, -w, Route::General, 0.0).unwrap().amp(j, 0).conj();
                let x = direct_solve(&p, e, w, Injection::DriveAmp).unwrap();
                let (amp, _) = quadrature_response(&x, j).unwrap();
                let want = scale * (ep * k_fwd + k_back / ep);
                assert!((amp - want).norm() < 1e-11 * (1.0 + want.norm()));
                let x = direct_solve(&p, e, w, Injection::DrivePhase).unwrap();
                let (amp, _) = quadrature_response(&x, j).unwrap();
                let want = -I * scale * (ep * k_fwd - k_back / ep);
                assert!((amp - want).norm() < 1e-11 * (1.0 + want.norm()));
            }
        }
    }

    #[test]
    fn poles_are_rejected() {
        let p = np(2.0, 0.1, 0.3);
        let e = 3.0;
        assert!(direct_solve(&p, e, Complex64::new(0.0, 0.0), Injection::Source(1)).is_err());
        let cp = charpoly(&p, e).unwrap();
        let set = roots(&cp, DEFAULT_SNAP_TOL).unwrap();
        let on_pole = direct_solve(&p, e, set.roots[0], Injection::Source(1));
        assert!(on_pole.is_err());
        assert!(direct_solve(&p, e, Complex64::new(1.0, 0.0), Injection::Source(5)).is_err());
    }

    fn short_config(seed: u64) -> SdeConfig {
        SdeConfig {
            dt: 0.0,
            steps: 200_000,
            seed,
            chunks: 8,
            segment_len: 1024,
        }
    }

    #[test]
    fn sde_is_deterministic() {
        let p = np(2.0, 0.1, 0.0);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let a = sde_psd(&p, 3.0, &w, &short_config(7)).unwrap();
        let b = sde_psd(&p, 3.0, &w, &short_config(7)).unwrap();
        assert_eq!(a.segments, b.segments);
        for beam in 0..2 {
            assert_eq!(a.s_mu[beam], b.s_mu[beam]);
        }
        let c = sde_psd(&p, 3.0, &w, &short_config(8)).unwrap();
        assert_ne!(a.s_mu[0], c.s_mu[0]);
    }

    #[test]
    fn sde_zero_drive_gives_zero_spectrum() {
        let p = np(2.0, 0.1, 0.0);
        let mut w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        w.zeta = [0.0; 3];
        let run = sde_psd(&p, 3.0, &w, &short_config(3)).unwrap();
        for beam in 0..2 {
            assert!(run.s_mu[beam].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sde_tracks_analytic_spectrum() {
        let p = np(4.0, 0.05, 0.0);
        let e = 3.0;
        let w = NoiseWeights::new(&p, e, 0.0, 0.0).unwrap();
        let cfg = SdeConfig {
            dt: 0.0,
            steps: 400_000,
            seed: 11,
            chunks: 8,
            segment_len: 8192,
        };
        let run = sde_psd(&p, e, &w, &cfg).unwrap();
        let mut chi_sq = 0.0;
        let mut count = 0usize;
        for (i, &omega) in run.omega.iter().enumerate() {
            if !(0.2..=5.0).contains(&omega) {
                continue;
            }
            let analytic = sigma_mu_internal(&p, e, &w, 1, omega).unwrap()
                + sigma_mu_internal(&p, e, &w, 1, -omega).unwrap();
            let pull = (run.s_mu[0][i] - analytic) / run.stderr[0][i];
            chi_sq += pull * pull;
            count += 1;
        }
        let reduced = chi_sq / count as f64;
        assert!(count > 10, "band too sparse: {count} points");
        assert!((0.3..2.0).contains(&reduced), "reduced chi-square {reduced}");
    }

    #[test]
    fn sde_validates_configuration() {
        let p = np(2.0, 0.1, 0.0);
        let w = NoiseWeights::new(&p, 3.0, 0.0, 0.0).unwrap();
        let mut cfg = short_config(1);
        cfg.dt = 1.0;
        assert!(sde_psd(&p, 3.0, &w, &cfg).is_err());
        let mut cfg = short_config(1);
        cfg.steps = 10_000;
        cfg.segment_len = 8192;
        assert!(sde_psd(&p, 3.0, &w, &cfg).is_err());
        let mut cfg = short_config(1);
        cfg.chunks = 0;
        assert!(sde_psd(&p, 3.0, &w, &cfg).is_err());
    }
}
