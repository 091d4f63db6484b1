//! Frequency-domain transfer functions of the fluctuation dynamics.
//!
//! Each emitted-beam quadrature responds to the six intracavity noise
//! sources through a 3x3 block of transfer functions per quadrature: `Amp`
//! collects the in-phase (amplitude) responses and `Phase` the out-of-phase
//! ones.  The primary evaluation route eliminates the conjugate partners
//! analytically, producing the pair-coupling functions `F` and from them
//! every transfer entry in closed form.  Secondary routes specialize to
//! zero detuning and to the fast-pump (adiabatic) limit.
//!
//! The module also reconstructs the polynomial numerators of the entries
//! over the common characteristic denominator and tabulates the residues
//! at the five finite resonances, which drive the spectra and time-domain
//! kernels downstream.

use crate::model::{effective_excitation, NormalizedParams};
use crate::poly::{fit_on_circle, Poly};
use crate::resonances::{charpoly, resonant_factors, roots, CharPoly, ResonanceSet, DEFAULT_SNAP_TOL};
use crate::{Error, Result};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Quadrature selector for transfer entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    /// In-phase (amplitude) quadrature responses.
    Amp,
    /// Out-of-phase quadrature responses.
    Phase,
}

/// Evaluation route for the transfer entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Full detuned closed forms through the pair-coupling functions.
    General,
    /// Zero-detuning closed forms over the cubic/quadratic factors.
    Resonant,
    /// Fast-pump limit at zero detuning.
    Adiabatic,
}

/// Identifier of one transfer entry: quadrature, response row and source
/// column.  Rows and columns use mode tags `1`, `2` (beams) and `0` (pump);
/// the pump row exists only in the amplitude quadrature and only for beam
/// sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KId {
    /// Quadrature of the responding mode.
    pub quad: Quadrature,
    /// Responding mode tag.
    pub row: u8,
    /// Source mode tag.
    pub col: u8,
}

impl KId {
    /// Validates and builds an entry identifier.
    pub fn new(quad: Quadrature, row: u8, col: u8) -> Result<KId> {
        let ok = match (quad, row) {
            (Quadrature::Amp, 1 | 2) => col == 0 || col == 1 || col == 2,
            (Quadrature::Amp, 0) => col == 1 || col == 2,
            (Quadrature::Phase, 1 | 2) => col == 0 || col == 1 || col == 2,
            _ => false,
        };
        if ok {
            Ok(KId { quad, row, col })
        } else {
            Err(Error::Validation(format!(
                "no transfer entry for quadrature {quad:?}, row {row}, column {col}"
            )))
        }
    }
}

/// Maps a source mode tag onto the column index used by residue tables.
#[must_use]
pub fn col_index(k: u8) -> usize {
    match k {
        1 => 0,
        2 => 1,
        _ => 2,
    }
}

/// Detuning factors of the six eliminated equations at one frequency.
///
/// The `d` suffix marks the conjugate-parameter image of a factor, taken at
/// the same frequency.
#[derive(Debug, Clone, Copy)]
pub struct DeltaSet {
    /// Beam-1 factor.
    pub d1: Complex64,
    /// Beam-2 factor.
    pub d2: Complex64,
    /// Pump factor, carrying the working-point scale.
    pub d0: Complex64,
    /// Conjugate image of the beam-1 factor.
    pub d1d: Complex64,
    /// Conjugate image of the beam-2 factor.
    pub d2d: Complex64,
    /// Conjugate image of the pump factor.
    pub d0d: Complex64,
}

/// Builds the detuning factors at (possibly complex) frequency `w`.
pub fn delta_set(np: &NormalizedParams, e: f64, w: Complex64) -> Result<DeltaSet> {
    if !(e > 1.0) {
        return Err(Error::Validation(
            "pump parameter must exceed one above threshold".into(),
        ));
    }
    let ex = effective_excitation(e, np.psi)?;
    let scale = ex.script_e - 1.0;
    let k1 = np.kappa_tilde(1);
    let k2 = np.kappa_tilde(2);
    let g0 = np.gtilde0;
    let phase = Complex64::from_polar(1.0, np.psi);
    let pump = ONE + I * w / g0;
    Ok(DeltaSet {
        d1: ONE + I * w / k1,
        d2: ONE + I * w / k2,
        d0: pump * phase / scale,
        d1d: ONE + I * w / k1.conj(),
        d2d: ONE + I * w / k2.conj(),
        d0d: pump * phase.conj() / scale,
    })
}

/// Pair-coupling functions obtained by eliminating the conjugate partners.
///
/// `a*` are the self-couplings, `b*` the cross-couplings (self-conjugate by
/// construction) and `f*` the resulting response kernels; `m`/`p` tag the
/// difference/sum combinations and a trailing `d` the conjugate image.
#[derive(Debug, Clone, Copy)]
#[allow(missing_docs)]
pub struct AbfSet {
    pub a1: Complex64,
    pub a2: Complex64,
    pub a0: Complex64,
    pub a1d: Complex64,
    pub a2d: Complex64,
    pub a0d: Complex64,
    pub b1: Complex64,
    pub b2: Complex64,
    pub b0: Complex64,
    pub f1m: Complex64,
    pub f1p: Complex64,
    pub f2m: Complex64,
    pub f2p: Complex64,
    pub f0m: Complex64,
    pub f0p: Complex64,
    pub f1md: Complex64,
    pub f1pd: Complex64,
    pub f2md: Complex64,
    pub f2pd: Complex64,
    pub f0md: Complex64,
    pub f0pd: Complex64,
}

fn checked_div(num: Complex64, den: Complex64, what: &str) -> Result<Complex64> {
    if den.norm() == 0.0 || !den.is_finite() {
        return Err(Error::Numerical(format!(
            "vanishing denominator {what} while assembling pair couplings"
        )));
    }
    Ok(num / den)
}

struct BeamBlock {
    a1: Complex64,
    a1d: Complex64,
    b1: Complex64,
    f1m: Complex64,
    f1p: Complex64,
    f1md: Complex64,
    f1pd: Complex64,
    a2: Complex64,
    a2d: Complex64,
    b2: Complex64,
    f2m: Complex64,
    f2p: Complex64,
    f2md: Complex64,
    f2pd: Complex64,
}

struct PumpBlock {
    a0: Complex64,
    a0d: Complex64,
    b0: Complex64,
    f0m: Complex64,
    f0p: Complex64,
    f0md: Complex64,
    f0pd: Complex64,
}

fn beam_block(d: &DeltaSet) -> Result<BeamBlock> {
    // Beam-row denominators pair one beam with the pump.
    let p1 = d.d2 * d.d0 + ONE; // partners of beam 1
    let p1d = d.d2d * d.d0d + ONE;
    let p2 = d.d1 * d.d0 + ONE; // partners of beam 2
    let p2d = d.d1d * d.d0d + ONE;

    let a1 = d.d1 + checked_div(d.d2, p1, "beam-1 pair")? - checked_div(d.d0d, p1d, "beam-1 conjugate pair")?;
    let a1d = d.d1d + checked_div(d.d2d, p1d, "beam-1 conjugate pair")? - checked_div(d.d0, p1, "beam-1 pair")?;
    let b1 = checked_div(ONE, p1, "beam-1 pair")? + checked_div(ONE, p1d, "beam-1 conjugate pair")?;

    let a2 = d.d2 + checked_div(d.d1, p2, "beam-2 pair")? - checked_div(d.d0d, p2d, "beam-2 conjugate pair")?;
    let a2d = d.d2d + checked_div(d.d1d, p2d, "beam-2 conjugate pair")? - checked_div(d.d0, p2, "beam-2 pair")?;
    let b2 = checked_div(ONE, p2, "beam-2 pair")? + checked_div(ONE, p2d, "beam-2 conjugate pair")?;

    let den1 = a1 * a1d - b1 * b1;
    let den2 = a2 * a2d - b2 * b2;
    Ok(BeamBlock {
        a1,
        a1d,
        b1,
        f1m: checked_div(a1 - b1, den1, "beam-1 response")?,
        f1p: checked_div(a1 + b1, den1, "beam-1 response")?,
        f1md: checked_div(a1d - b1, den1, "beam-1 response")?,
        f1pd: checked_div(a1d + b1, den1, "beam-1 response")?,
        a2,
        a2d,
        b2,
        f2m: checked_div(a2 - b2, den2, "beam-2 response")?,
        f2p: checked_div(a2 + b2, den2, "beam-2 response")?,
        f2md: checked_div(a2d - b2, den2, "beam-2 response")?,
        f2pd: checked_div(a2d + b2, den2, "beam-2 response")?,
    })
}

fn pump_block(d: &DeltaSet) -> Result<PumpBlock> {
    // Pump-row denominators pair the two beams across conjugation; they
    // vanish at zero frequency, where the pump row has a removable 0/0.
    let q1 = d.d2 * d.d1d - ONE;
    let q2 = d.d1 * d.d2d - ONE;

    let a0 = d.d0 + checked_div(d.d1d, q1, "pump pair")? + checked_div(d.d2d, q2, "pump conjugate pair")?;
    let a0d = d.d0d + checked_div(d.d1, q2, "pump conjugate pair")? + checked_div(d.d2, q1, "pump pair")?;
    let b0 = checked_div(ONE, q1, "pump pair")? + checked_div(ONE, q2, "pump conjugate pair")?;

    let den0 = a0 * a0d - b0 * b0;
    Ok(PumpBlock {
        a0,
        a0d,
        b0,
        f0m: checked_div(a0 - b0, den0, "pump response")?,
        f0p: checked_div(a0 + b0, den0, "pump response")?,
        f0md: checked_div(a0d - b0, den0, "pump response")?,
        f0pd: checked_div(a0d + b0, den0, "pump response")?,
    })
}

/// Eliminates the conjugate partners and forms the pair-coupling functions.
pub fn abf(d: &DeltaSet) -> Result<AbfSet> {
    let beam = beam_block(d)?;
    let pump = pump_block(d)?;
    Ok(AbfSet {
        a1: beam.a1,
        a2: beam.a2,
        a0: pump.a0,
        a1d: beam.a1d,
        a2d: beam.a2d,
        a0d: pump.a0d,
        b1: beam.b1,
        b2: beam.b2,
        b0: pump.b0,
        f1m: beam.f1m,
        f1p: beam.f1p,
        f2m: beam.f2m,
        f2p: beam.f2p,
        f0m: pump.f0m,
        f0p: pump.f0p,
        f1md: beam.f1md,
        f1pd: beam.f1pd,
        f2md: beam.f2md,
        f2pd: beam.f2pd,
        f0md: pump.f0md,
        f0pd: pump.f0pd,
    })
}

/// All transfer entries at one frequency.
///
/// Beam rows exist in both quadratures; the amplitude pump row is filled
/// only on the [`Route::General`] route, where its closed form is known.
#[derive(Debug, Clone, Copy)]
#[allow(missing_docs)]
pub struct TransferEval {
    pub route: Route,
    pub k0_11: Complex64,
    pub k0_12: Complex64,
    pub k0_10: Complex64,
    pub k0_22: Complex64,
    pub k0_21: Complex64,
    pub k0_20: Complex64,
    pub kp_11: Complex64,
    pub kp_12: Complex64,
    pub kp_10: Complex64,
    pub kp_22: Complex64,
    pub kp_21: Complex64,
    pub kp_20: Complex64,
    pub k0_01: Option<Complex64>,
    pub k0_02: Option<Complex64>,
}

impl TransferEval {
    /// Looks up an entry by identifier.
    pub fn get(&self, id: KId) -> Result<Complex64> {
        let v = match (id.quad, id.row, id.col) {
            (Quadrature::Amp, 1, 1) => Some(self.k0_11),
            (Quadrature::Amp, 1, 2) => Some(self.k0_12),
            (Quadrature::Amp, 1, 0) => Some(self.k0_10),
            (Quadrature::Amp, 2, 2) => Some(self.k0_22),
            (Quadrature::Amp, 2, 1) => Some(self.k0_21),
            (Quadrature::Amp, 2, 0) => Some(self.k0_20),
            (Quadrature::Amp, 0, 1) => self.k0_01,
            (Quadrature::Amp, 0, 2) => self.k0_02,
            (Quadrature::Phase, 1, 1) => Some(self.kp_11),
            (Quadrature::Phase, 1, 2) => Some(self.kp_12),
            (Quadrature::Phase, 1, 0) => Some(self.kp_10),
            (Quadrature::Phase, 2, 2) => Some(self.kp_22),
            (Quadrature::Phase, 2, 1) => Some(self.kp_21),
            (Quadrature::Phase, 2, 0) => Some(self.kp_20),
            _ => None,
        };
        v.ok_or_else(|| {
            Error::Validation(format!(
                "transfer entry ({:?}, {}, {}) is not available on route {:?}",
                id.quad, id.row, id.col, self.route
            ))
        })
    }

    /// Amplitude-quadrature entry for beam row `j` and source `k`.
    #[must_use]
    pub fn amp(&self, j: u8, k: u8) -> Complex64 {
        match (j, k) {
            (1, 1) => self.k0_11,
            (1, 2) => self.k0_12,
            (1, 0) => self.k0_10,
            (2, 2) => self.k0_22,
            (2, 1) => self.k0_21,
            (2, 0) => self.k0_20,
            _ => panic!("amp({j}, {k}) is not a beam-row entry"),
        }
    }

    /// Phase-quadrature entry for beam row `j` and source `k`.
    #[must_use]
    pub fn phase(&self, j: u8, k: u8) -> Complex64 {
        match (j, k) {
            (1, 1) => self.kp_11,
            (1, 2) => self.kp_12,
            (1, 0) => self.kp_10,
            (2, 2) => self.kp_22,
            (2, 1) => self.kp_21,
            (2, 0) => self.kp_20,
            _ => panic!("phase({j}, {k}) is not a beam-row entry"),
        }
    }
}

/// Evaluates all transfer entries at frequency `w` on the requested route.
///
/// A positive `eps_shift` displaces the undamped origin pole of the
/// phase-quadrature beam responses to `i * eps_shift`, regularizing the
/// free-phase divergence; at exactly zero frequency the displaced value is
/// taken from the origin residue.
pub fn k_eval(
    np: &NormalizedParams,
    e: f64,
    w: Complex64,
    route: Route,
    eps_shift: f64,
) -> Result<TransferEval> {
    let mut eval = match route {
        Route::General => k_general(np, e, w)?,
        Route::Resonant => k_resonant(np, e, w)?,
        Route::Adiabatic => k_adiabatic(np, e, w)?,
    };
    if eps_shift > 0.0 {
        let cos = np.psi.cos();
        let nu = 1.0 - np.delta_tilde * np.delta_tilde;
        let res_jj = -I * nu / (2.0 * cos * cos);
        let res_jjp = I * nu / (2.0 * cos * cos);
        if w.norm() == 0.0 {
            let at_zero = |r: Complex64| I * r / eps_shift;
            eval.kp_11 = at_zero(res_jj);
            eval.kp_22 = at_zero(res_jj);
            eval.kp_12 = at_zero(res_jjp);
            eval.kp_21 = at_zero(res_jjp);
        } else {
            let factor = w / (w - I * eps_shift);
            eval.kp_11 *= factor;
            eval.kp_22 *= factor;
            eval.kp_12 *= factor;
            eval.kp_21 *= factor;
        }
    }
    Ok(eval)
}

fn k_general(np: &NormalizedParams, e: f64, w: Complex64) -> Result<TransferEval> {
    if w.norm() == 0.0 {
        return k_general_origin(np, e);
    }
    let d = delta_set(np, e, w)?;
    let f = beam_block(&d)?;
    let p1 = d.d2 * d.d0 + ONE;
    let p2 = d.d1 * d.d0 + ONE;
    // The pump row is a removable 0/0 at zero frequency; leave it empty
    // there instead of failing the beam rows with it.
    let pump_row = pump_block(&d).ok().map(|f0| {
        let q1 = d.d2 * d.d1d - ONE;
        let q2 = d.d1 * d.d2d - ONE;
        (
            -(f0.f0m + f0.f0md * d.d2d) / q2,
            -(f0.f0m + f0.f0md * d.d1d) / q1,
        )
    });
    Ok(TransferEval {
        route: Route::General,
        k0_11: f.f1md,
        k0_12: (f.f1m * d.d0 - f.f1md) / p1,
        k0_10: (f.f1md * d.d2 + f.f1m) / p1,
        k0_22: f.f2md,
        k0_21: (f.f2m * d.d0 - f.f2md) / p2,
        k0_20: (f.f2md * d.d1 + f.f2m) / p2,
        kp_11: f.f1pd,
        kp_12: -(f.f1p * d.d0 + f.f1pd) / p1,
        kp_10: (f.f1pd * d.d2 - f.f1p) / p1,
        kp_22: f.f2pd,
        kp_21: -(f.f2p * d.d0 + f.f2pd) / p2,
        kp_20: (f.f2pd * d.d1 - f.f2p) / p2,
        k0_01: pump_row.map(|r| r.0),
        k0_02: pump_row.map(|r| r.1),
    })
}

/// Zero-frequency limits of the full route.
///
/// At the origin every pair-coupling combination degenerates to 0/0; the
/// amplitude row and the pump-source phase responses have finite limits,
/// recovered here from the first-order expansion of the couplings.  The
/// same-beam and twin-beam phase responses carry the free-phase pole and
/// come back unbounded.
fn k_general_origin(np: &NormalizedParams, e: f64) -> Result<TransferEval> {
    let ex = effective_excitation(e, np.psi)?;
    let s = ex.script_e - 1.0;
    let ep = Complex64::from_polar(1.0, np.psi) / s;
    let em = Complex64::from_polar(1.0, -np.psi) / s;
    let p = ep + ONE;
    let q = em + ONE;
    let beta = ONE / p + ONE / q;
    let a1 = I / np.kappa_tilde(1);
    let a2 = I / np.kappa_tilde(2);
    let b1 = I / np.kappa_tilde(1).conj();
    let b2 = I / np.kappa_tilde(2).conj();

    // First derivatives of the vanishing coupling combinations; x belongs
    // to the plain response, y to its conjugate image.
    let x1 = a1 + a2 / p + b2 * em / q;
    let y1 = b1 + b2 / q + a2 * ep / p;
    let x2 = a2 + a1 / p + b1 * em / q;
    let y2 = b2 + b1 / q + a1 * ep / p;

    let inf = Complex64::new(f64::INFINITY, f64::INFINITY);
    Ok(TransferEval {
        route: Route::General,
        k0_11: y1 / (beta * (x1 + y1)),
        k0_12: (x1 * ep - y1) / (beta * (x1 + y1) * p),
        k0_10: ONE / (beta * p),
        k0_22: y2 / (beta * (x2 + y2)),
        k0_21: (x2 * ep - y2) / (beta * (x2 + y2) * p),
        k0_20: ONE / (beta * p),
        kp_11: inf,
        kp_12: inf,
        kp_10: ((y1 - x1) / beta + 2.0 * a2) / ((x1 + y1) * p),
        kp_22: inf,
        kp_21: inf,
        kp_20: ((y2 - x2) / beta + 2.0 * a1) / ((x2 + y2) * p),
        k0_01: None,
        k0_02: None,
    })
}

fn k_resonant(np: &NormalizedParams, e: f64, w: Complex64) -> Result<TransferEval> {
    let f = resonant_factors(np, e)?;
    let d_plus = Poly::new(f.d_plus.to_vec()).eval(w);
    let d_minus = Poly::new(f.d_minus.to_vec()).eval(w);
    let g0 = np.gtilde0;
    let nu = 1.0 - np.delta_tilde * np.delta_tilde;
    let inf = Complex64::new(f64::INFINITY, f64::INFINITY);
    let beam = |dj: f64| -> (Complex64, Complex64, Complex64, Complex64, Complex64, Complex64) {
        let q = w * w - I * (1.0 + g0 - dj) * w - g0 * e * (1.0 - dj);
        let k0jj = -I * (1.0 + dj) * q / d_plus;
        let k0jjp = -nu * (w + I * g0 * (e - 2.0)) / d_plus;
        let k0j0 = -g0 * (e - 1.0) * (1.0 + dj) * (w - 2.0 * I * (1.0 - dj)) / d_plus;
        let (kpjj, kpjjp) = if w.norm() == 0.0 {
            (inf, inf)
        } else {
            (
                -I * (1.0 + dj) * q / (d_minus * w),
                nu * (w - I * g0 * e) / (d_minus * w),
            )
        };
        let kpj0 = -g0 * (e - 1.0) * (1.0 + dj) / d_minus;
        (k0jj, k0jjp, k0j0, kpjj, kpjjp, kpj0)
    };
    let (k0_11, k0_12, k0_10, kp_11, kp_12, kp_10) = beam(np.delta_tilde);
    let (k0_22, k0_21, k0_20, kp_22, kp_21, kp_20) = beam(-np.delta_tilde);
    Ok(TransferEval {
        route: Route::Resonant,
        k0_11,
        k0_12,
        k0_10,
        k0_22,
        k0_21,
        k0_20,
        kp_11,
        kp_12,
        kp_10,
        kp_22,
        kp_21,
        kp_20,
        k0_01: None,
        k0_02: None,
    })
}

fn k_adiabatic(np: &NormalizedParams, e: f64, w: Complex64) -> Result<TransferEval> {
    if np.psi != 0.0 {
        return Err(Error::Validation(
            "the adiabatic forms are written at zero detuning".into(),
        ));
    }
    if !(e > 1.0) {
        return Err(Error::Validation(
            "pump parameter must exceed one above threshold".into(),
        ));
    }
    let nu = 1.0 - np.delta_tilde * np.delta_tilde;
    let quad = w * w - 2.0 * I * e * w - 4.0 * (e - 1.0) * nu;
    let lin = w - 2.0 * I * e;
    let inf = Complex64::new(f64::INFINITY, f64::INFINITY);
    let beam = |dj: f64| -> (Complex64, Complex64, Complex64, Complex64, Complex64, Complex64) {
        let k0jj = -I * (1.0 + dj) * (w - I * e * (1.0 - dj)) / quad;
        let k0jjp = Complex64::new((e - 2.0) * nu, 0.0) / quad;
        let k0j0 = -I * (e - 1.0) * (1.0 + dj) * (w - 2.0 * I * (1.0 - dj)) / quad;
        let (kpjj, kpjjp) = if w.norm() == 0.0 {
            (inf, inf)
        } else {
            (
                -I * (1.0 + dj) * (w - I * e * (1.0 - dj)) / (lin * w),
                Complex64::new(e * nu, 0.0) / (lin * w),
            )
        };
        let kpj0 = -I * (e - 1.0) * (1.0 + dj) / lin;
        (k0jj, k0jjp, k0j0, kpjj, kpjjp, kpj0)
    };
    let (k0_11, k0_12, k0_10, kp_11, kp_12, kp_10) = beam(np.delta_tilde);
    let (k0_22, k0_21, k0_20, kp_22, kp_21, kp_20) = beam(-np.delta_tilde);
    Ok(TransferEval {
        route: Route::Adiabatic,
        k0_11,
        k0_12,
        k0_10,
        k0_22,
        k0_21,
        k0_20,
        kp_11,
        kp_12,
        kp_10,
        kp_22,
        kp_21,
        kp_20,
        k0_01: None,
        k0_02: None,
    })
}

/// Numerator polynomial of one transfer entry over the characteristic
/// denominator.
#[derive(Debug, Clone)]
pub struct NumeratorFit {
    /// Entry this numerator belongs to.
    pub id: KId,
    /// Descending coefficients of the numerator polynomial.
    pub coeffs: Vec<Complex64>,
    /// True when the denominator carries the extra origin zero.
    pub over_omega: bool,
    /// Worst held-out reconstruction error of the fit.
    pub fit_residual: f64,
}

impl NumeratorFit {
    /// Numerator as a polynomial.
    #[must_use]
    pub fn poly(&self) -> Poly {
        Poly::new(self.coeffs.clone())
    }
}

fn fit_spec(id: KId) -> (usize, bool) {
    match (id.quad, id.row == id.col, id.col) {
        (Quadrature::Amp, true, _) => (4, false),
        (Quadrature::Amp, false, 0) => (3, false),
        (Quadrature::Amp, false, _) => (3, false),
        (Quadrature::Phase, true, _) => (5, true),
        (Quadrature::Phase, false, 0) => (3, false),
        (Quadrature::Phase, false, _) => (4, true),
    }
}

fn expected_lead(id: KId, np: &NormalizedParams, e_eff: f64) -> Complex64 {
    if id.row == 0 {
        // Pump row: minus the matching beam-to-pump lead, with the source
        // beam's imbalance.
        let dj = np.delta_j(id.col as usize);
        return Complex64::new(np.gtilde0 * (e_eff - 1.0) * (1.0 + dj), 0.0);
    }
    let cos = np.psi.cos();
    let dj = np.delta_j(id.row as usize);
    let nu = 1.0 - np.delta_tilde * np.delta_tilde;
    match (id.quad, id.row == id.col, id.col) {
        (_, true, _) => -I * (1.0 + dj) * Complex64::from_polar(1.0, np.psi) / cos,
        (Quadrature::Amp, false, 1 | 2) => Complex64::new(-nu / (cos * cos), 0.0),
        (Quadrature::Phase, false, 1 | 2) => Complex64::new(nu / (cos * cos), 0.0),
        (_, false, _) => Complex64::new(-np.gtilde0 * (e_eff - 1.0) * (1.0 + dj), 0.0),
    }
}

fn fit_entry(
    np: &NormalizedParams,
    e: f64,
    id: KId,
    cp: &CharPoly,
    set: &ResonanceSet,
) -> Result<NumeratorFit> {
    let (degree, over_omega) = fit_spec(id);
    let value = |z: Complex64| -> Result<Complex64> {
        let eval = k_eval(np, e, z, Route::General, 0.0)?;
        let mut v = eval.get(id)? * cp.eval(z);
        if over_omega {
            v *= z;
        }
        Ok(v)
    };

    // Keep the sampling circle away from every pole modulus (and from the
    // origin pole for the entries carrying it).
    let mut moduli: Vec<f64> = set.roots.iter().map(|r| r.norm()).collect();
    if over_omega {
        moduli.push(0.0);
    }
    let top = moduli.iter().fold(1.0f64, |m, v| m.max(*v));
    let mut radius = 1.0;
    let mut best = -1.0;
    for k in 0..24 {
        let cand = 0.2 * (2.0 * top / 0.2f64).powf(k as f64 / 23.0);
        let sep = moduli.iter().map(|m| (m - cand).abs()).fold(f64::MAX, f64::min);
        if sep > best {
            best = sep;
            radius = cand;
        }
    }

    let coeffs = fit_on_circle(value, degree, radius)?;
    let poly = Poly::new(coeffs.clone());
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);

    let mut fit_residual = 0.0f64;
    for probe in [Complex64::new(0.9, 0.7), Complex64::new(-1.4, 0.3)] {
        let err = (poly.eval(probe) - value(probe)?).norm();
        fit_residual = fit_residual.max(err / scale.max(1.0));
    }
    if fit_residual > 1e-8 {
        return Err(Error::Numerical(format!(
            "transfer entry ({:?}, {}, {}) does not reduce to a degree-{degree} numerator \
             (held-out residual {fit_residual:e})",
            id.quad, id.row, id.col
        )));
    }

    if coeffs[0].norm() <= 1e-6 * scale {
        return Err(Error::Numerical(format!(
            "numerator of ({:?}, {}, {}) has an unexpectedly vanishing leading coefficient",
            id.quad, id.row, id.col
        )));
    }
    let lead = expected_lead(id, np, effective_excitation(e, np.psi)?.e_eff);
    let rel = (coeffs[0] - lead).norm() / lead.norm();
    if rel > 1e-6 {
        return Err(Error::Numerical(format!(
            "leading numerator coefficient of ({:?}, {}, {}) deviates from its closed form \
             by {rel:e}",
            id.quad, id.row, id.col
        )));
    }

    Ok(NumeratorFit {
        id,
        coeffs,
        over_omega,
        fit_residual,
    })
}

/// Reconstructs the numerator polynomial of entry `id` over the
/// characteristic denominator (times one power of frequency for the
/// singular phase entries).
///
/// Degree and leading coefficient are checked against their closed forms;
/// a held-out sample bound guards the polynomial structure itself.
pub fn k_times_dprime_poly(np: &NormalizedParams, e: f64, id: KId) -> Result<NumeratorFit> {
    let cp = charpoly(np, e)?;
    let set = roots(&cp, DEFAULT_SNAP_TOL)?;
    fit_entry(np, e, id, &cp, &set)
}

/// Residues of the beam-row transfer entries at the five finite resonances.
#[derive(Debug, Clone)]
pub struct ResidueTable {
    /// The five resonances, sorted by ascending imaginary part.
    pub roots: [Complex64; 5],
    /// Amplitude-quadrature residues `[row j][source column][resonance]`.
    pub amp: [[[Complex64; 5]; 3]; 2],
    /// Phase-quadrature residues `[row j][source column][resonance]`.
    pub phase: [[[Complex64; 5]; 3]; 2],
    /// Origin residues of the singular phase entries `[row j][0: same beam,
    /// 1: twin beam]`.
    pub phase_origin: [[Complex64; 2]; 2],
}

impl ResidueTable {
    /// Residue of the `(quad, j, k)` entry at resonance index `r`.
    #[must_use]
    pub fn res(&self, quad: Quadrature, j: u8, k: u8, r: usize) -> Complex64 {
        let row = (j - 1) as usize;
        let col = col_index(k);
        match quad {
            Quadrature::Amp => self.amp[row][col][r],
            Quadrature::Phase => self.phase[row][col][r],
        }
    }
}

/// Tabulates the residues of all beam-row entries at the five resonances,
/// plus the origin residues of the singular phase entries.
///
/// Fails when two resonances come closer than the residue extraction can
/// separate; perturbing the parameters slightly resolves such degeneracies.
pub fn residues(np: &NormalizedParams, e: f64) -> Result<ResidueTable> {
    let cp = charpoly(np, e)?;
    let set = roots(&cp, DEFAULT_SNAP_TOL)?;
    for a in 0..5 {
        for b in a + 1..5 {
            let dist = (set.roots[a] - set.roots[b]).norm();
            if dist < 1e-6 {
                return Err(Error::Numerical(format!(
                    "resonances {} and {} are separated by only {dist:e}; \
                     perturb the parameters to split them",
                    set.roots[a], set.roots[b]
                )));
            }
        }
    }
    let dprime = cp.poly();
    let dderiv = dprime.derivative();

    let mut table = ResidueTable {
        roots: set.roots,
        amp: [[[Complex64::new(0.0, 0.0); 5]; 3]; 2],
        phase: [[[Complex64::new(0.0, 0.0); 5]; 3]; 2],
        phase_origin: [[Complex64::new(0.0, 0.0); 2]; 2],
    };

    for j in [1u8, 2u8] {
        let row = (j - 1) as usize;
        for k in [1u8, 2u8, 0u8] {
            let col = col_index(k);
            for quad in [Quadrature::Amp, Quadrature::Phase] {
                let id = KId::new(quad, j, k)?;
                let fit = fit_entry(np, e, id, &cp, &set)?;
                let numer = fit.poly();
                for (r, root) in set.roots.iter().enumerate() {
                    let mut den = dderiv.eval(*root);
                    if fit.over_omega {
                        if root.norm() < 1e-6 {
                            return Err(Error::Numerical(
                                "a resonance sits on the origin pole; residues are undefined"
                                    .into(),
                            ));
                        }
                        den *= root;
                    }
                    let value = numer.eval(*root) / den;
                    match quad {
                        Quadrature::Amp => table.amp[row][col][r] = value,
                        Quadrature::Phase => table.phase[row][col][r] = value,
                    }
                }
                if fit.over_omega && (k == j || (k != 0 && k != j)) {
                    let origin = numer.eval(Complex64::new(0.0, 0.0))
                        / cp.eval(Complex64::new(0.0, 0.0));
                    let slot = usize::from(k != j);
                    table.phase_origin[row][slot] = origin;
                }
            }
        }
    }
    Ok(table)
}
