//! Resonances of the linearized fluctuation dynamics.
//!
//! The frequency-domain system has a sixth-order determinant that factors
//! into one origin zero (the free phase of the beams) and a quintic whose
//! roots are the five finite resonances.  This module builds that quintic
//! from closed-form coefficients, finds and classifies its roots, and
//! provides the resonant-case factorization, the all-imaginary-root
//! predicate behind the relaxation-oscillation boundary, the large-pump
//! asymptotes and the adiabatic (fast pump) limit.

use crate::model::{effective_excitation, NormalizedParams};
use crate::poly::{quadratic_roots, Poly};
use crate::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default relative tolerance for snapping near-imaginary roots onto the axis.
pub const DEFAULT_SNAP_TOL: f64 = 1e-9;

/// Relative tolerance for matching a root with its mirror partner.
pub const PAIR_TOL: f64 = 1e-8;

/// Quintic factor of the characteristic polynomial, in descending powers.
///
/// The full determinant is this quintic times one power of the frequency;
/// the extra origin zero reflects the undamped common phase.
#[derive(Debug, Clone, Copy)]
pub struct CharPoly {
    /// Descending coefficients `[1, d5, d4, d3, d2, d1]`.
    pub coeffs: [Complex64; 6],
}

impl CharPoly {
    /// Evaluates the quintic at `w`.
    #[must_use]
    pub fn eval(&self, w: Complex64) -> Complex64 {
        self.coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, c| acc * w + c)
    }

    /// The quintic as a general polynomial.
    #[must_use]
    pub fn poly(&self) -> Poly {
        Poly::new(self.coeffs.to_vec())
    }

    /// The full sixth-order characteristic polynomial (quintic times `w`).
    #[must_use]
    pub fn full_poly(&self) -> Poly {
        let mut c = self.coeffs.to_vec();
        c.push(Complex64::new(0.0, 0.0));
        Poly::new(c)
    }
}

/// Closed-form coefficients of the characteristic quintic.
///
/// Odd coefficients are purely imaginary and even ones purely real, which
/// makes the root set symmetric under reflection across the imaginary axis.
pub fn charpoly(np: &NormalizedParams, e: f64) -> Result<CharPoly> {
    if !(e > 1.0) {
        return Err(Error::Validation(
            "pump parameter must exceed one above threshold".into(),
        ));
    }
    let ex = effective_excitation(e, np.psi)?;
    let g0 = np.gtilde0;
    let d2 = np.delta_tilde * np.delta_tilde;
    let t = np.psi.tan();
    let t2 = t * t;
    let x = ex.e_eff - 1.0;

    let d5 = -2.0 * (g0 + 2.0);
    let d4 = -((g0 + 2.0) * (g0 + 2.0) + 4.0 * g0 + 4.0 * d2 * t2 + 4.0 * x * g0);
    let d3 = 4.0 * g0 * (ex.e_eff * g0 + 2.0 + 3.0 * x + (1.0 - ex.e_eff + 2.0 * t2) * d2);
    let d2c = 4.0
        * g0
        * ((x * x + 3.0 * x + 1.0) * g0 + 2.0 * x - ((2.0 + g0) * x - g0 * t2) * d2);
    let d1 = -8.0 * g0 * g0 * ex.e_eff * x * (1.0 - d2);

    Ok(CharPoly {
        coeffs: [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, d5),
            Complex64::new(d4, 0.0),
            Complex64::new(0.0, d3),
            Complex64::new(d2c, 0.0),
            Complex64::new(0.0, d1),
        ],
    })
}

/// Classification of a finite resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootClass {
    /// Purely imaginary: overdamped, non-oscillating decay.
    Imaginary,
    /// Member of a complex pair mirrored across the imaginary axis.
    ComplexPair,
}

/// The five finite resonances of the quintic, classified and paired.
#[derive(Debug, Clone)]
pub struct ResonanceSet {
    /// Roots sorted by ascending imaginary part, ties by real part.
    pub roots: [Complex64; 5],
    /// Per-root classification.
    pub class: [RootClass; 5],
    /// Index of the mirror partner (`-conj`) of each root; imaginary roots
    /// are their own partner.
    pub partner: [usize; 5],
}

impl ResonanceSet {
    /// True when some complex pair oscillates faster than it decays,
    /// the regime with visible ringing in the time-domain kernels.
    #[must_use]
    pub fn oscillatory(&self) -> bool {
        self.roots
            .iter()
            .zip(&self.class)
            .any(|(r, c)| *c == RootClass::ComplexPair && r.re.abs() > r.im)
    }
}

/// Finds, snaps, sorts and pairs the roots of the quintic.
///
/// Roots with `|Re| <= snap_tol * (1 + |root|)` are snapped onto the
/// imaginary axis.  Fails when a complex root has no mirror partner within
/// [`PAIR_TOL`].
pub fn roots(cp: &CharPoly, snap_tol: f64) -> Result<ResonanceSet> {
    let mut rs = cp.poly().roots()?;
    if rs.len() != 5 {
        return Err(Error::Numerical(format!(
            "expected five finite resonances, found {}",
            rs.len()
        )));
    }
    for r in &mut rs {
        if r.re.abs() <= snap_tol * (1.0 + r.norm()) {
            r.re = 0.0;
        }
    }
    rs.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    let mut roots = [Complex64::new(0.0, 0.0); 5];
    roots.copy_from_slice(&rs);

    let mut class = [RootClass::Imaginary; 5];
    let mut partner = [0usize; 5];
    for (i, r) in roots.iter().enumerate() {
        if r.re == 0.0 {
            class[i] = RootClass::Imaginary;
            partner[i] = i;
            continue;
        }
        class[i] = RootClass::ComplexPair;
        let mirror = -r.conj();
        let (best, dist) = roots
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(j, s)| (j, (s - mirror).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("five roots");
        if dist > PAIR_TOL * (1.0 + r.norm()) {
            return Err(Error::Numerical(format!(
                "complex resonance {r} has no mirror partner (nearest at distance {dist:e})"
            )));
        }
        partner[i] = best;
    }
    Ok(ResonanceSet { roots, class, partner })
}

/// Cubic and quadratic factors of the quintic at zero detuning.
#[derive(Debug, Clone, Copy)]
pub struct ResonantFactors {
    /// Damping sum `2 + gtilde0`.
    pub g1: f64,
    /// Pump-beam exchange rate `2 E gtilde0`.
    pub g2: f64,
    /// Threshold-distance rate `4 (E - 1) gtilde0 (1 - delta_tilde^2)`.
    pub g3: f64,
    /// Cubic factor carrying the amplitude-quadrature resonances,
    /// descending coefficients.
    pub d_plus: [Complex64; 4],
    /// Quadratic factor carrying the phase-quadrature resonances,
    /// descending coefficients.
    pub d_minus: [Complex64; 3],
}

impl ResonantFactors {
    /// Roots of the cubic factor.
    pub fn d_plus_roots(&self) -> Result<Vec<Complex64>> {
        Poly::new(self.d_plus.to_vec()).roots()
    }

    /// Roots of the quadratic factor.
    #[must_use]
    pub fn d_minus_roots(&self) -> [Complex64; 2] {
        let (r1, r2) = quadratic_roots(self.d_minus[0], self.d_minus[1], self.d_minus[2]);
        [r1, r2]
    }
}

/// Exact factorization of the quintic at zero detuning.
///
/// Rejects detuned parameter sets; detuned cases factor the same way only
/// after mapping the pump parameter through its effective resonant value.
pub fn resonant_factors(np: &NormalizedParams, e: f64) -> Result<ResonantFactors> {
    if np.psi != 0.0 {
        return Err(Error::Validation(
            "resonant factorization requires zero detuning".into(),
        ));
    }
    if !(e > 1.0) {
        return Err(Error::Validation(
            "pump parameter must exceed one above threshold".into(),
        ));
    }
    let g0 = np.gtilde0;
    let nu = 1.0 - np.delta_tilde * np.delta_tilde;
    let g1 = 2.0 + g0;
    let g2 = 2.0 * e * g0;
    let g3 = 4.0 * (e - 1.0) * g0 * nu;
    Ok(ResonantFactors {
        g1,
        g2,
        g3,
        d_plus: [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -g1),
            Complex64::new(-g2, 0.0),
            Complex64::new(0.0, g3),
        ],
        d_minus: [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, -g1),
            Complex64::new(-g2, 0.0),
        ],
    })
}

/// Sign-based predicate for all three amplitude-quadrature resonances being
/// purely imaginary at zero detuning.
///
/// Evaluates the Sturm-chain conditions on the real cubic obtained by
/// rotating the frequency onto the imaginary axis, so no root finding is
/// involved.
pub fn all_imaginary(np: &NormalizedParams, e: f64) -> Result<bool> {
    let f = resonant_factors(np, e)?;
    Ok(sturm_conditions(f.g1, f.g2, f.g3))
}

fn sturm_conditions(g1: f64, g2: f64, g3: f64) -> bool {
    let c1 = g1 * g1 > 3.0 * g2;
    let c2 = g1 * g2 > 9.0 * g3;
    let lhs = (g1 * g1 - 4.0 * g2) * g2 * g2;
    let rhs = 27.0 * g3 * g3 + 2.0 * (2.0 * g1 * g1 * g1 - 9.0 * g1 * g2) * g3;
    c1 && c2 && lhs > rhs
}

/// One connected interval of pump parameters with all-imaginary resonances.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySegment {
    /// Lower edge of the interval.
    pub e_lo: f64,
    /// Upper edge of the interval.
    pub e_hi: f64,
}

/// Boundary data for one pump decay rate.
#[derive(Debug, Clone)]
pub struct BoundaryPoint {
    /// Pump decay rate of this scan point.
    pub gtilde0: f64,
    /// Top of the all-imaginary region connected to threshold; equals the
    /// scan cap when the region extends beyond it.
    pub e_max: f64,
    /// Detached all-imaginary intervals above the connected region.
    pub detached: Vec<BoundarySegment>,
}

/// Scans the relaxation-oscillation boundary over a pump decay grid.
///
/// For each grid value the pump-parameter axis is sampled geometrically up
/// to `e_cap` and every sign change of the all-imaginary predicate is
/// refined by bisection.  The first interval always starts at threshold;
/// any further interval is reported as a detached segment.
pub fn emax_boundary(
    gtilde0_grid: &[f64],
    delta_tilde: f64,
    e_cap: f64,
) -> Result<Vec<BoundaryPoint>> {
    if !(e_cap > 1.0) {
        return Err(Error::Validation("scan cap must exceed one".into()));
    }
    gtilde0_grid
        .par_iter()
        .map(|&g0| boundary_for(g0, delta_tilde, e_cap))
        .collect()
}

fn boundary_for(gtilde0: f64, delta_tilde: f64, e_cap: f64) -> Result<BoundaryPoint> {
    let np = NormalizedParams::new(gtilde0, delta_tilde, 0.0)?;
    let pred = |e: f64| all_imaginary(&np, e).unwrap_or(false);
    let n = 512;
    let lo = 1e-3;
    let ratio = ((e_cap - 1.0) / lo).powf(1.0 / (n - 1) as f64);
    let grid: Vec<f64> = (0..n).map(|k| 1.0 + lo * ratio.powi(k as i32)).collect();
    let flags: Vec<bool> = grid.iter().map(|&e| pred(e)).collect();

    let mut edges = Vec::new();
    for k in 1..n {
        if flags[k] != flags[k - 1] {
            let mut a = grid[k - 1];
            let mut b = grid[k];
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if pred(mid) == flags[k - 1] {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            edges.push(0.5 * (a + b));
        }
    }

    // Collect maximal intervals where the predicate holds.  The interval
    // touching threshold (when present) is the connected region; everything
    // above it is a detached segment.  On the degenerate knife edge where
    // the predicate already fails at threshold the connected region is
    // empty and every interval counts as detached.
    let mut segments = Vec::new();
    let mut inside = flags[0];
    let mut start = grid[0];
    for edge in &edges {
        if inside {
            segments.push(BoundarySegment { e_lo: start, e_hi: *edge });
        } else {
            start = *edge;
        }
        inside = !inside;
    }
    if inside {
        segments.push(BoundarySegment { e_lo: start, e_hi: e_cap });
    }
    let connected = flags[0];
    let e_max = if connected {
        segments.first().map_or(e_cap, |s| s.e_hi)
    } else {
        1.0
    };
    Ok(BoundaryPoint {
        gtilde0,
        e_max,
        detached: segments.into_iter().skip(usize::from(connected)).collect(),
    })
}

/// Large-pump asymptotes of the two slowest resonances at zero detuning.
///
/// Returns the overdamped branch `2i(1 - delta_tilde^2)` and the relaxation
/// branch whose real part grows like the square root of the pump-beam
/// exchange rate.
pub fn relaxation_asymptote(np: &NormalizedParams, e: f64) -> Result<(Complex64, Complex64)> {
    if np.psi != 0.0 {
        return Err(Error::Validation(
            "relaxation asymptotes are defined at zero detuning".into(),
        ));
    }
    let nu = 1.0 - np.delta_tilde * np.delta_tilde;
    let omega1 = 2.0 * nu * I;
    let omega2 = 0.5 * (np.gtilde0 + 2.0 * np.delta_tilde * np.delta_tilde) * I
        + (2.0 * e * np.gtilde0).sqrt();
    Ok((omega1, omega2))
}

/// Third-order polynomial the quintic collapses to when the pump follows
/// the beams adiabatically (pump decay much faster than beam decay).
///
/// Its roots are the three finite resonances surviving the limit; the two
/// others escape with the pump decay rate.
pub fn adiabatic_charpoly(np: &NormalizedParams, e: f64) -> Result<Poly> {
    if np.psi != 0.0 {
        return Err(Error::Validation(
            "the adiabatic factorization is written at zero detuning".into(),
        ));
    }
    if !(e > 1.0) {
        return Err(Error::Validation(
            "pump parameter must exceed one above threshold".into(),
        ));
    }
    let nu = 1.0 - np.delta_tilde * np.delta_tilde;
    let linear = Poly::new(vec![Complex64::new(1.0, 0.0), -2.0 * e * I]);
    let quad = Poly::new(vec![
        Complex64::new(1.0, 0.0),
        -2.0 * e * I,
        Complex64::new(-4.0 * (e - 1.0) * nu, 0.0),
    ]);
    Ok(linear.mul(&quad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::pump_parameter;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn np(g0: f64, d: f64, psi: f64) -> NormalizedParams {
        NormalizedParams::new(g0, d, psi).unwrap()
    }

    #[test]
    fn quintic_reference_coefficients() {
        let cp = charpoly(&np(2.0, 0.1, 0.3), 3.0).unwrap();
        let want = [
            c(1.0, 0.0),
            c(0.0, -8.0),
            c(-41.00368204909233, 0.0),
            c(0.0, 116.844584143924),
            c(223.58291517795624, 0.0),
            c(0.0, -210.37197490912783),
        ];
        for (got, want) in cp.coeffs.iter().zip(want) {
            assert!((got - want).norm() <= 1e-10 * want.norm().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn resonant_factorization_is_exact() {
        for (g0, d, e) in [(2.0, 0.1, 3.0), (0.7, 0.4, 1.8), (4.0, 0.0, 6.0)] {
            let p = np(g0, d, 0.0);
            let cp = charpoly(&p, e).unwrap();
            let f = resonant_factors(&p, e).unwrap();
            let product = Poly::new(f.d_plus.to_vec()).mul(&Poly::new(f.d_minus.to_vec()));
            for (got, want) in product.coeffs().iter().zip(cp.coeffs) {
                assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn balanced_root_of_cubic() {
        // At zero damping asymmetry the cubic factor always contains 2i.
        for (g0, e) in [(0.5, 1.3), (2.0, 5.0), (7.0, 2.2)] {
            let f = resonant_factors(&np(g0, 0.0, 0.0), e).unwrap();
            let p = Poly::new(f.d_plus.to_vec());
            assert!(p.eval(c(0.0, 2.0)).norm() < 1e-12 * (1.0 + f.g3));
        }
    }

    #[test]
    fn cubic_on_axis_closed_form() {
        // On the imaginary axis the cubic reduces to 4i nu (1-nu) (2nu - g0)
        // at nu = 1 - delta^2.
        for (g0, d, e) in [(2.0, 0.1, 3.0), (1.3, 0.35, 2.5)] {
            let nu = 1.0 - d * d;
            let f = resonant_factors(&np(g0, d, 0.0), e).unwrap();
            let p = Poly::new(f.d_plus.to_vec());
            let got = p.eval(c(0.0, 2.0 * nu));
            let want = 4.0 * I * nu * (1.0 - nu) * (2.0 * nu - g0);
            assert!((got - want).norm() < 1e-11 * (1.0 + want.norm()), "{got} vs {want}");
        }
    }

    #[test]
    fn root_sets_for_phase_commutator_presets() {
        // gtilde0 = 4, delta = 0.2, psi = 0.1, excitation 1.5 and 4.
        let p = np(4.0, 0.2, 0.1);
        let cases = [
            (
                1.5,
                vec![
                    c(-0.603801, 2.339459),
                    c(0.603801, 2.339459),
                    c(0.0, 1.322757),
                    c(-1.737840, 2.999162),
                    c(1.737840, 2.999162),
                ],
            ),
            (
                4.0,
                vec![
                    c(-4.486354, 2.048433),
                    c(4.486354, 2.048433),
                    c(0.0, 1.904112),
                    c(-4.808451, 2.999511),
                    c(4.808451, 2.999511),
                ],
            ),
        ];
        for (script_e, want) in cases {
            let e = pump_parameter(script_e, 0.1).unwrap();
            let cp = charpoly(&p, e).unwrap();
            let set = roots(&cp, DEFAULT_SNAP_TOL).unwrap();
            for w in &want {
                let nearest = set
                    .roots
                    .iter()
                    .map(|r| (r - w).norm())
                    .fold(f64::MAX, f64::min);
                assert!(nearest < 2e-6, "missing {w} (nearest {nearest:e})");
            }
            // Canonical order is ascending imaginary part.
            for k in 1..5 {
                assert!(set.roots[k].im >= set.roots[k - 1].im);
            }
            // Pairing maps complex roots onto their mirror images.
            for (i, r) in set.roots.iter().enumerate() {
                let j = set.partner[i];
                assert!((set.roots[j] + r.conj()).norm() < 1e-7 * (1.0 + r.norm()));
            }
        }
    }

    #[test]
    fn oscillatory_classification_of_presets() {
        let p = np(4.0, 0.2, 0.1);
        let damped = roots(
            &charpoly(&p, pump_parameter(1.5, 0.1).unwrap()).unwrap(),
            DEFAULT_SNAP_TOL,
        )
        .unwrap();
        let ringing = roots(
            &charpoly(&p, pump_parameter(4.0, 0.1).unwrap()).unwrap(),
            DEFAULT_SNAP_TOL,
        )
        .unwrap();
        assert!(!damped.oscillatory());
        assert!(ringing.oscillatory());
    }

    #[test]
    fn vieta_sum() {
        let p = np(1.7, 0.25, 0.4);
        let cp = charpoly(&p, 2.6).unwrap();
        let set = roots(&cp, DEFAULT_SNAP_TOL).unwrap();
        let sum: Complex64 = set.roots.iter().sum();
        let want = 2.0 * I * (p.gtilde0 + 2.0);
        assert!((sum - want).norm() < 1e-8 * want.norm());
    }

    #[test]
    fn predicate_matches_numeric_classification() {
        let p = np(2.2, 0.05, 0.0);
        for e in [1.2, 1.8, 3.0, 8.0, 20.0, 45.0] {
            let f = resonant_factors(&p, e).unwrap();
            let rs = f.d_plus_roots().unwrap();
            let numeric = rs.iter().all(|r| r.re.abs() < 1e-9 * (1.0 + r.norm()));
            let pred = all_imaginary(&p, e).unwrap();
            assert_eq!(pred, numeric, "disagreement at E = {e}");
        }
    }

    #[test]
    fn boundary_peninsula_pattern() {
        let points = emax_boundary(&[1.0, 2.2, 3.5], 0.05, 50.0).unwrap();
        assert!(points[0].detached.is_empty());
        assert!(!points[1].detached.is_empty(), "expected a detached segment at 2.2");
        assert!(points[2].detached.is_empty());
        for pt in &points {
            assert!(pt.e_max > 1.0);
        }
        assert!(points[0].e_max < 50.0);
        assert!(points[1].e_max < 50.0);
        // Detached segment sits above the connected region.
        let pen = &points[1];
        assert!(pen.detached[0].e_lo > pen.e_max);
    }

    #[test]
    fn relaxation_reference_values() {
        let p = np(2.0, 0.1, 0.0);
        let (o1, o2) = relaxation_asymptote(&p, 30.0).unwrap();
        assert!((o1 - c(0.0, 1.98)).norm() < 1e-14);
        assert!((o2 - c(10.954451150103322, 1.01)).norm() < 1e-12);
        // Exact relaxation root at the same parameters.
        let f = resonant_factors(&p, 30.0).unwrap();
        let exact = f
            .d_plus_roots()
            .unwrap()
            .into_iter()
            .find(|r| r.re > 1.0)
            .unwrap();
        assert!((exact - c(10.722886429165122, 1.0100034161140954)).norm() < 1e-9);
    }

    #[test]
    fn adiabatic_cubic_roots() {
        let p = np(100.0, 0.1, 0.0);
        let cubic = adiabatic_charpoly(&p, 3.0).unwrap();
        let mut rs = cubic.roots().unwrap();
        rs.sort_by(|a, b| a.im.total_cmp(&b.im));
        let spread = (4.0 * 2.0 * 0.99f64 - 9.0).abs().sqrt();
        let want = [c(0.0, 3.0 - spread), c(0.0, 3.0 + spread), c(0.0, 6.0)];
        for (got, want) in rs.iter().zip(want) {
            assert!((got - want).norm() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn quintic_approaches_adiabatic_roots() {
        // As the pump decay grows the three slow resonances converge to the
        // adiabatic cubic; the worst-case distance shrinks monotonically.
        let cubic = adiabatic_charpoly(&np(10.0, 0.1, 0.0), 3.0).unwrap();
        let targets = cubic.roots().unwrap();
        let mut last = f64::MAX;
        for g0 in [10.0, 30.0, 100.0, 300.0] {
            let cp = charpoly(&np(g0, 0.1, 0.0), 3.0).unwrap();
            let set = roots(&cp, DEFAULT_SNAP_TOL).unwrap();
            let worst = targets
                .iter()
                .map(|t| {
                    set.roots
                        .iter()
                        .map(|r| (r - t).norm())
                        .fold(f64::MAX, f64::min)
                })
                .fold(0.0, f64::max);
            assert!(worst < 0.5 * last, "no improvement at gtilde0 = {g0}");
            last = worst;
        }
        assert!(last < 0.1);
    }

    #[test]
    fn detuned_inputs_rejected_by_resonant_forms() {
        let p = np(2.0, 0.1, 0.3);
        assert!(resonant_factors(&p, 3.0).is_err());
        assert!(all_imaginary(&p, 3.0).is_err());
        assert!(relaxation_asymptote(&p, 3.0).is_err());
        assert!(adiabatic_charpoly(&p, 3.0).is_err());
    }
}
