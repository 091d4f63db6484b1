//! Operating point of the triply resonant OPO.
//!
//! Raw cavity rates are reduced to the small normalized parameter set that
//! drives every other module: mean signal/idler decay rate, pump decay
//! ratio, damping asymmetry and the common detuning phase.  The module also
//! computes the oscillation threshold and the bright steady state above it.

use crate::{Error, Result};
use num_complex::Complex64;

/// Raw cavity and crystal rates of the three modes.
///
/// Beam indices follow the convention used throughout the crate: `1` and `2`
/// are the signal and idler modes, `0` is the pump.  Arrays store them as
/// `[mode 1, mode 2, pump]`.
#[derive(Debug, Clone, Copy)]
pub struct OpoParams {
    /// Mirror (output-coupling) loss rates of the three modes.
    pub mirror_loss: [f64; 3],
    /// Internal crystal loss rates of the three modes.
    pub crystal_loss: [f64; 3],
    /// Common cavity detuning phase, locked between pump and beams.
    pub psi: f64,
    /// Nonlinear coupling constant of the crystal.
    pub chi: f64,
}

impl OpoParams {
    /// Total decay rate of mode slot `k` (mirror plus crystal).
    #[must_use]
    pub fn total_loss(&self, k: usize) -> f64 {
        self.mirror_loss[k] + self.crystal_loss[k]
    }

    /// Checks that the rates describe a physical cavity.
    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if self.mirror_loss[k] < 0.0 || self.crystal_loss[k] < 0.0 {
                return Err(Error::Validation(format!(
                    "negative loss rate in mode slot {k}"
                )));
            }
            if self.total_loss(k) <= 0.0 {
                return Err(Error::Validation(format!(
                    "mode slot {k} has zero total decay rate"
                )));
            }
        }
        if !self.psi.is_finite() || self.psi.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Validation(
                "detuning phase must satisfy |psi| < pi/2".into(),
            ));
        }
        if !(self.chi > 0.0) {
            return Err(Error::Validation("coupling chi must be positive".into()));
        }
        Ok(())
    }

    /// Reduces the raw rates to normalized parameters.
    pub fn normalize(&self) -> Result<NormalizedParams> {
        self.validate()?;
        let g1 = self.total_loss(0);
        let g2 = self.total_loss(1);
        let g0 = self.total_loss(2);
        let gamma = 0.5 * (g1 + g2);
        NormalizedParams::new(g0 / gamma, (g1 - g2) / (2.0 * gamma), self.psi)?
            .with_crystal_loss([
                self.crystal_loss[0] / gamma,
                self.crystal_loss[1] / gamma,
                self.crystal_loss[2] / gamma,
            ])
    }
}

/// Normalized parameter set consumed by all downstream modules.
///
/// Frequencies are measured in units of the mean signal/idler total decay
/// rate, so the two beam decay rates become `1 + delta_tilde` and
/// `1 - delta_tilde`.
#[derive(Debug, Clone, Copy)]
pub struct NormalizedParams {
    /// Pump total decay rate over the mean signal/idler decay rate.
    pub gtilde0: f64,
    /// Signal/idler damping asymmetry, strictly inside (-1, 1).
    pub delta_tilde: f64,
    /// Common detuning phase.
    pub psi: f64,
    /// Normalized crystal losses `[mode 1, mode 2, pump]`; zero when the
    /// cavity has no internal loss or the split is unknown.
    pub crystal_loss: [f64; 3],
}

impl NormalizedParams {
    /// Builds a validated normalized parameter set without crystal losses.
    pub fn new(gtilde0: f64, delta_tilde: f64, psi: f64) -> Result<Self> {
        if !(gtilde0 > 0.0) || !gtilde0.is_finite() {
            return Err(Error::Validation(
                "normalized pump decay rate must be positive".into(),
            ));
        }
        if !(delta_tilde.abs() < 1.0) {
            return Err(Error::Validation(
                "damping asymmetry must satisfy |delta_tilde| < 1".into(),
            ));
        }
        if !psi.is_finite() || psi.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Validation(
                "detuning phase must satisfy |psi| < pi/2".into(),
            ));
        }
        Ok(NormalizedParams {
            gtilde0,
            delta_tilde,
            psi,
            crystal_loss: [0.0; 3],
        })
    }

    /// Attaches normalized crystal losses `[mode 1, mode 2, pump]`.
    pub fn with_crystal_loss(mut self, crystal: [f64; 3]) -> Result<Self> {
        for (k, loss) in crystal.iter().enumerate() {
            if *loss < 0.0 || !loss.is_finite() {
                return Err(Error::Validation(format!(
                    "negative crystal loss in mode slot {k}"
                )));
            }
        }
        if crystal[0] > self.gamma_tot(1) || crystal[1] > self.gamma_tot(2) {
            return Err(Error::Validation(
                "crystal loss exceeds the total beam decay rate".into(),
            ));
        }
        self.crystal_loss = crystal;
        Ok(self)
    }

    /// Signed asymmetry of beam `j`: `+delta_tilde` for 1, `-delta_tilde` for 2.
    #[must_use]
    pub fn delta_j(&self, j: usize) -> f64 {
        debug_assert!(j == 1 || j == 2);
        if j == 1 {
            self.delta_tilde
        } else {
            -self.delta_tilde
        }
    }

    /// Normalized total decay rate of beam `j`.
    #[must_use]
    pub fn gamma_tot(&self, j: usize) -> f64 {
        1.0 + self.delta_j(j)
    }

    /// Normalized crystal loss of beam `j`.
    #[must_use]
    pub fn crystal(&self, j: usize) -> f64 {
        debug_assert!(j == 1 || j == 2);
        self.crystal_loss[j - 1]
    }

    /// Normalized mirror loss of beam `j` (total minus crystal).
    #[must_use]
    pub fn mirror(&self, j: usize) -> f64 {
        self.gamma_tot(j) - self.crystal(j)
    }

    /// Complex decay constant of beam `j`, carrying the detuning phase.
    #[must_use]
    pub fn kappa_tilde(&self, j: usize) -> Complex64 {
        Complex64::new(1.0, self.psi.tan()) * self.gamma_tot(j)
    }

    /// Complex decay constant of the pump; real because the pump detuning
    /// phase is locked to the beam detuning phase.
    #[must_use]
    pub fn kappa_tilde0(&self) -> Complex64 {
        Complex64::new(self.gtilde0, 0.0)
    }
}

/// Effective excitation measures derived from the pump parameter.
#[derive(Debug, Clone, Copy)]
pub struct Excitation {
    /// Pump parameter `E` (drive over threshold drive).
    pub e: f64,
    /// Detuning-corrected excitation entering the steady state.
    pub script_e: f64,
    /// Pump parameter of the resonant system equivalent to the detuned one.
    pub e_eff: f64,
}

/// Computes the excitation measures for pump parameter `e` at detuning `psi`.
///
/// Fails when `e^2 < sin^2 psi`, where the phase lock between pump and beams
/// cannot be established.
pub fn effective_excitation(e: f64, psi: f64) -> Result<Excitation> {
    let s = psi.sin();
    let radicand = e * e - s * s;
    if radicand < 0.0 {
        return Err(Error::Validation(
            "pump parameter below the phase-locking range".into(),
        ));
    }
    let script_e = radicand.sqrt() + 1.0 - psi.cos();
    let e_eff = 1.0 + (script_e - 1.0) / psi.cos();
    Ok(Excitation { e, script_e, e_eff })
}

/// Inverts [`effective_excitation`]: pump parameter giving excitation
/// `script_e` at detuning `psi`.
pub fn pump_parameter(script_e: f64, psi: f64) -> Result<f64> {
    if script_e < 1.0 {
        return Err(Error::Validation(
            "excitation below its threshold value of one".into(),
        ));
    }
    let a = script_e - 1.0 + psi.cos();
    Ok((a * a + psi.sin() * psi.sin()).sqrt())
}

/// Oscillation threshold of the cavity.
#[derive(Debug, Clone, Copy)]
pub struct Threshold {
    /// Pump drive amplitude at threshold.
    pub eps_th: f64,
    /// Intracavity amplitude scale of the emitted beams.
    pub r0: f64,
}

/// Threshold drive and amplitude scale for the raw parameter set.
pub fn threshold(params: &OpoParams) -> Result<Threshold> {
    params.validate()?;
    let g1 = params.total_loss(0);
    let g2 = params.total_loss(1);
    let g0 = params.total_loss(2);
    let cos = params.psi.cos();
    let root = (g1 * g2).sqrt() / cos;
    Ok(Threshold {
        eps_th: g0 * root / (2.0 * params.chi),
        r0: root / (2.0 * params.chi),
    })
}

/// Bright steady state above threshold.
#[derive(Debug, Clone, Copy)]
pub struct SteadyState {
    /// Pump parameter `E`.
    pub e: f64,
    /// Excitation measures at this working point.
    pub excitation: Excitation,
    /// Threshold data of the cavity.
    pub threshold: Threshold,
    /// Squared beam amplitudes `[r_1^2, r_2^2]`.
    pub r_sq: [f64; 2],
    /// Common photon-number scale entering all correlation prefactors.
    pub c_sq: f64,
    /// Mirror-transmitted output fluxes `[I_1, I_2]`.
    pub flux: [f64; 2],
    /// Pump phase offset inside the cavity.
    pub psi_p: f64,
    /// Locked value of `phi_1 + phi_2 - phi_0`; equals the detuning phase.
    pub phase_sum: f64,
    /// Locked value of `phi_p - phi_0`.
    pub pump_phase: f64,
}

/// Solves the classical steady state at pump parameter `e > 1`.
pub fn steady_state(params: &OpoParams, e: f64) -> Result<SteadyState> {
    if !(e > 1.0) {
        return Err(Error::Validation(
            "pump parameter must exceed one for above-threshold operation".into(),
        ));
    }
    let th = threshold(params)?;
    let excitation = effective_excitation(e, params.psi)?;
    let cos = params.psi.cos();
    let g0 = params.total_loss(2);
    let c_sq = (excitation.script_e - 1.0) * g0 * th.r0 * th.r0;
    let mut r_sq = [0.0; 2];
    let mut flux = [0.0; 2];
    for j in 0..2 {
        let gtot = params.total_loss(j);
        // |kappa_j| = gamma_j' / cos(psi); r_j^2 = C^2 / |kappa_j|.
        r_sq[j] = c_sq * cos / gtot;
        flux[j] = 2.0 * params.mirror_loss[j] * r_sq[j];
    }
    let psi_p = (params.psi.sin() / e).asin();
    Ok(SteadyState {
        e,
        excitation,
        threshold: th,
        r_sq,
        c_sq,
        flux,
        psi_p,
        phase_sum: params.psi,
        pump_phase: params.psi - psi_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lossless() -> OpoParams {
        OpoParams {
            mirror_loss: [1.1, 0.9, 2.0],
            crystal_loss: [0.0; 3],
            psi: 0.3,
            chi: 0.5,
        }
    }

    #[test]
    fn threshold_reference_value() {
        let th = threshold(&lossless()).unwrap();
        assert!((th.eps_th - 2.0830093866032593).abs() < 1e-14);
        assert!((th.r0 - th.eps_th / 2.0).abs() < 1e-14);
    }

    #[test]
    fn excitation_reference_values() {
        let ex = effective_excitation(3.0, 0.3).unwrap();
        assert!((ex.script_e - 3.030072663311433).abs() < 1e-13);
        assert!((ex.e_eff - 3.1249818115599295).abs() < 1e-13);
    }

    #[test]
    fn excitation_resonant_identity() {
        let ex = effective_excitation(2.5, 0.0).unwrap();
        assert_eq!(ex.script_e, 2.5);
        assert_eq!(ex.e_eff, 2.5);
    }

    #[test]
    fn pump_parameter_inverts_excitation() {
        for (script_e, psi, want) in [
            (1.5, 0.1, 1.498333796347805),
            (4.0, 0.1, 3.996251367427749),
        ] {
            let e = pump_parameter(script_e, psi).unwrap();
            assert!((e - want).abs() < 1e-13, "{e}");
            let back = effective_excitation(e, psi).unwrap();
            assert!((back.script_e - script_e).abs() < 1e-13);
        }
    }

    #[test]
    fn excitation_even_in_detuning() {
        let a = effective_excitation(2.0, 0.4).unwrap();
        let b = effective_excitation(2.0, -0.4).unwrap();
        assert_eq!(a.script_e, b.script_e);
    }

    #[test]
    fn normalization_reference() {
        let np = lossless().normalize().unwrap();
        assert!((np.gtilde0 - 2.0).abs() < 1e-15);
        assert!((np.delta_tilde - 0.1).abs() < 1e-15);
        assert_eq!(np.psi, 0.3);
        assert!((np.gamma_tot(1) - 1.1).abs() < 1e-15);
        assert!((np.gamma_tot(2) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn steady_state_invariants() {
        let params = OpoParams {
            mirror_loss: [0.9, 0.7, 1.8],
            crystal_loss: [0.2, 0.2, 0.2],
            psi: 0.3,
            chi: 0.5,
        };
        let ss = steady_state(&params, 3.0).unwrap();
        let cos = params.psi.cos();
        // Both beams carry the same generalized photon flux scale.
        let k1 = params.total_loss(0) / cos;
        let k2 = params.total_loss(1) / cos;
        assert!((k1 * ss.r_sq[0] - ss.c_sq).abs() < 1e-12 * ss.c_sq);
        assert!((k2 * ss.r_sq[1] - ss.c_sq).abs() < 1e-12 * ss.c_sq);
        // The pump phase offset satisfies sin(psi) = E sin(psi_p).
        assert!((ss.e * ss.psi_p.sin() - params.psi.sin()).abs() < 1e-14);
        assert_eq!(ss.phase_sum, params.psi);
        assert!((ss.pump_phase - (params.psi - ss.psi_p)).abs() < 1e-15);
    }

    #[test]
    fn below_threshold_rejected() {
        let err = steady_state(&lossless(), 0.9).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn phase_locking_range_enforced() {
        assert!(effective_excitation(0.2, 0.4).is_err());
        assert!(effective_excitation(0.5, 0.4).is_ok());
    }

    #[test]
    fn validation_rejects_bad_rates() {
        let mut p = lossless();
        p.mirror_loss[1] = -0.1;
        assert!(p.validate().is_err());
        let mut p = lossless();
        p.psi = 1.6;
        assert!(p.validate().is_err());
        let np = NormalizedParams::new(2.0, 0.3, 0.0).unwrap();
        assert!(np.with_crystal_loss([1.5, 0.0, 0.0]).is_err());
    }
}
