//! Homogeneous steady states of the semiclassical equations in the three
//! pump regimes, the two oscillation thresholds and the second-harmonic
//! output.
//!
//! Amplitudes are real and nonnegative in steady state; the model is
//! invariant under a common phase rotation so nothing is lost.
//!
//! Conventions used throughout:
//! - `p = Γ/(Γ+κ₂)` is the pumped fraction appearing in the lower-level
//!   balance `σ₂ = p(1−σ₃)`;
//! - `d = σ₃ − σ₂` is the population inversion;
//! - the populations always sum to one.

use std::fmt;

use thiserror::Error;

use crate::dynamics::{self, StateVector};
use crate::params::{Mode, ModelParams, Pump};

/// Doublings of the upper bracket end before a threshold is declared
/// unreachable.
const MAX_BRACKET_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Region (i): below laser threshold, both fields dark.
    BelowLaser,
    /// Region (ii): parallel mode lasing, orthogonal mode dark.
    LaserOnly,
    /// Region (iii): both fundamental polarizations oscillate.
    OrthExcited,
}

impl Regime {
    /// Roman-numeral region label.
    pub fn label(self) -> &'static str {
        match self {
            Regime::BelowLaser => "i",
            Regime::LaserOnly => "ii",
            Regime::OrthExcited => "iii",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    /// Scaled intensity ⟨a∥⟩².
    pub i_par: f64,
    /// Scaled intensity ⟨a⊥⟩².
    pub i_orth: f64,
    pub regime: Regime,
}

impl SteadyState {
    /// Phase space point with nonnegative real amplitudes.
    pub fn state_vector(&self) -> StateVector {
        StateVector {
            a_par: self.i_par.sqrt(),
            a_orth: self.i_orth.sqrt(),
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            sigma3: self.sigma3,
        }
    }

    pub fn a_par(&self) -> f64 {
        self.i_par.sqrt()
    }

    pub fn a_orth(&self) -> f64 {
        self.i_orth.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SteadyStateError {
    #[error("negative discriminant {discriminant:e} in the inversion quadratic: no lasing solution")]
    NegativeDiscriminant { discriminant: f64 },
    #[error("lasing branch is unphysical at this pump (sigma3 = {sigma3}, i_par = {i_par:e})")]
    NoLasingSolution { sigma3: f64, i_par: f64 },
    #[error("threshold unreachable: {0}")]
    Unreachable(&'static str),
    #[error("regime-iii fixed point failed verification (scaled residual {residual:e})")]
    RootFindFailure { residual: f64 },
}

/// Coefficients of `a·σ₃² + b·σ₃ + c = 0` for the lasing-branch inversion
/// and its `+√` root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma3Quadratic {
    pub a_coef: f64,
    pub b_coef: f64,
    pub c_coef: f64,
    pub sigma3: f64,
}

impl Sigma3Quadratic {
    /// `|aσ²+bσ+c|` relative to the largest of the three terms.
    pub fn relative_residual(&self) -> f64 {
        let s = self.sigma3;
        let terms = [self.a_coef * s * s, self.b_coef * s, self.c_coef];
        let scale = terms.iter().map(|t| t.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            0.0
        } else {
            terms.iter().sum::<f64>().abs() / scale
        }
    }
}

fn pumped_fraction(params: &ModelParams, pump: Pump) -> (f64, f64) {
    let g = pump.rate();
    let k2 = params.decay_lower();
    (g / (g + k2), k2 / (g + k2))
}

/// Upper-level population on the lasing branch from the quadratic obtained
/// by eliminating σ₁, σ₂ and the intensity from the fixed-point equations.
pub fn sigma3_quadratic(params: &ModelParams, pump: Pump) -> Result<Sigma3Quadratic, SteadyStateError> {
    let g = params.stim_rate();
    let mu = params.nl_coupling();
    let k2 = params.decay_lower();
    let k3 = params.decay_upper();
    let gp = params.total_decay(Mode::Parallel);
    let (p, _) = pumped_fraction(params, pump);

    let a = g * g / (2.0 * mu) * (1.0 + p).powi(2);
    let b = k3 + k2 * p - g * (1.0 + p) * (g / mu * p + gp / mu);
    let c = g * p * (g / (2.0 * mu) * p + gp / mu) - k2 * p;

    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(SteadyStateError::NegativeDiscriminant { discriminant: disc });
    }
    let sq = disc.sqrt();
    // Same `+√` root; the second form avoids cancellation when b > 0.
    let sigma3 = if b <= 0.0 { (-b + sq) / (2.0 * a) } else { 2.0 * c / (-b - sq) };
    Ok(Sigma3Quadratic { a_coef: a, b_coef: b, c_coef: c, sigma3 })
}

/// Fixed point with the orthogonal mode dark and the parallel mode lasing,
/// evaluated whether or not that branch is the stable one.
///
/// The intensity is taken from its own quadratic and the populations follow
/// from the clamped inversion. At large `κ₂/κ₃` the inversion root is fixed
/// to many digits while the intensity hides in its last few, so reading the
/// intensity back off the inversion would lose most of its precision.
pub fn laser_only_branch(params: &ModelParams, pump: Pump) -> Result<SteadyState, SteadyStateError> {
    let g = params.stim_rate();
    let mu = params.nl_coupling();
    let gp = params.total_decay(Mode::Parallel);
    let (p, q) = pumped_fraction(params, pump);

    let i_par = intensity_root(params, pump);
    let inversion = 2.0 * (gp + mu * i_par) / g;
    let sigma3 = (inversion + p) / (1.0 + p);
    let sigma2 = p * (1.0 - sigma3);
    let sigma1 = q * (1.0 - sigma3);
    let in_unit = |s: f64| (0.0..=1.0).contains(&s);
    if !(in_unit(sigma1) && in_unit(sigma2) && in_unit(sigma3)) || !(i_par >= 0.0) {
        return Err(SteadyStateError::NoLasingSolution { sigma3, i_par });
    }
    Ok(SteadyState { sigma1, sigma2, sigma3, i_par, i_orth: 0.0, regime: Regime::LaserOnly })
}

/// Positive root of `A·I² + B·I + C = 0`, the upper-level balance with the
/// inversion written as `2(γ∥ + μI)/G`. Negative below the laser threshold;
/// a root within rounding of zero is returned as zero.
fn intensity_root(params: &ModelParams, pump: Pump) -> f64 {
    let g = params.stim_rate();
    let mu = params.nl_coupling();
    let k2 = params.decay_lower();
    let k3 = params.decay_upper();
    let gp = params.total_decay(Mode::Parallel);
    let (p, _) = pumped_fraction(params, pump);

    let drain = k2 * p + k3;
    let qa = 2.0 * mu * (1.0 + p);
    let qb = 2.0 * gp * (1.0 + p) + 2.0 * mu * drain / g;
    let gain_side = 2.0 * gp * drain / g;
    let pump_side = (k2 - k3) * p;
    let qc = gain_side - pump_side;
    if qc.abs() <= 1e-12 * gain_side.max(pump_side) {
        return 0.0;
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return f64::NAN;
    }
    -2.0 * qc / (qb + disc.sqrt())
}

/// Lasing-branch intensity, or 0 below the laser threshold.
pub fn laser_only_intensity(params: &ModelParams, pump: Pump) -> f64 {
    intensity_root(params, pump).max(0.0)
}

/// Populations with both fields dark.
fn dark_populations(params: &ModelParams, pump: Pump) -> (f64, f64, f64) {
    let g = pump.rate();
    let k3 = params.decay_upper();
    let r = k3 / params.decay_lower();
    let denom = g * (1.0 + r) + k3;
    (k3 / denom, r * g / denom, g / denom)
}

/// Small-signal round-trip gain `G(σ₃−σ₂)/2` at the dark populations.
pub fn small_signal_gain(params: &ModelParams, pump: Pump) -> f64 {
    let (_, s2, s3) = dark_populations(params, pump);
    0.5 * params.stim_rate() * (s3 - s2)
}

fn laser_threshold_reached(params: &ModelParams, pump: Pump) -> bool {
    small_signal_gain(params, pump) >= params.total_decay(Mode::Parallel)
}

fn orth_threshold_reached(params: &ModelParams, pump: Pump) -> bool {
    match laser_only_branch(params, pump) {
        Ok(ss) => ss.i_par >= orth_threshold_intensity(params),
        Err(_) => false,
    }
}

/// Region the pump rate falls in.
pub fn classify_regime(params: &ModelParams, pump: Pump) -> Regime {
    if !laser_threshold_reached(params, pump) {
        Regime::BelowLaser
    } else if !orth_threshold_reached(params, pump) {
        Regime::LaserOnly
    } else {
        Regime::OrthExcited
    }
}

/// Smallest pump where `reached` flips to true, by bisection on a bracket
/// whose upper end doubles from `start`. Returns the upper end of the
/// final bracket, so `reached(result)` holds.
fn bisect_threshold(
    lo: f64,
    start: f64,
    reached: impl Fn(Pump) -> bool,
    what: &'static str,
) -> Result<Pump, SteadyStateError> {
    let mut lo = lo;
    let mut hi = start;
    let mut found = false;
    for _ in 0..=MAX_BRACKET_DOUBLINGS {
        if reached(Pump::new(hi).expect("bracket is finite")) {
            found = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !found {
        return Err(SteadyStateError::Unreachable(what));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if reached(Pump::new(mid).expect("bracket is finite")) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Pump::new(hi).expect("bracket is finite"))
}

/// Pump rate where small-signal gain equals the parallel-mode loss.
pub fn laser_threshold(params: &ModelParams) -> Result<Pump, SteadyStateError> {
    let start = params.decay_upper().max(f64::MIN_POSITIVE);
    bisect_threshold(0.0, start, |g| laser_threshold_reached(params, g), "gain never reaches the parallel-mode loss")
}

/// Parallel-mode intensity at which the orthogonal mode starts to oscillate,
/// `γ⊥/μ`.
pub fn orth_threshold_intensity(params: &ModelParams) -> f64 {
    params.total_decay(Mode::Orthogonal) / params.nl_coupling()
}

/// Pump rate at which the lasing-branch intensity reaches
/// [`orth_threshold_intensity`].
pub fn orth_threshold_pump(params: &ModelParams) -> Result<Pump, SteadyStateError> {
    let lth = laser_threshold(params)?.rate();
    bisect_threshold(
        lth,
        2.0 * lth,
        |g| orth_threshold_reached(params, g),
        "lasing intensity saturates below the orthogonal-mode threshold",
    )
}

/// Both fundamental modes excited. The orthogonal-mode balance pins the
/// intensity difference at `γ⊥/μ`, which in turn pins the inversion, so the
/// fixed point follows in closed form; it is then checked against the full
/// equations of motion.
fn orth_excited_state(params: &ModelParams, pump: Pump) -> Result<SteadyState, SteadyStateError> {
    let g = params.stim_rate();
    let k2 = params.decay_lower();
    let k3 = params.decay_upper();
    let gp = params.total_decay(Mode::Parallel);
    let go = params.total_decay(Mode::Orthogonal);
    let (p, q) = pumped_fraction(params, pump);

    let inversion = 2.0 * (gp + go) / g;
    let sigma3 = (inversion + p) / (1.0 + p);
    let sigma2 = p * (1.0 - inversion) / (1.0 + p);
    let sigma1 = q * (1.0 - inversion) / (1.0 + p);
    let i_par = (k2 * sigma2 - k3 * sigma3) / (g * inversion);
    let delta = orth_threshold_intensity(params);
    let mut i_orth = i_par - delta;
    // Rounding exactly at the threshold pump.
    if i_orth <= 0.0 && i_orth.abs() <= 1e-9 * delta {
        i_orth = 0.0;
    }

    if !(i_orth >= 0.0) || !(inversion < 1.0) {
        let residual = if i_orth.is_finite() { -i_orth } else { f64::INFINITY };
        return Err(SteadyStateError::RootFindFailure { residual });
    }
    let ss = SteadyState { sigma1, sigma2, sigma3, i_par, i_orth, regime: Regime::OrthExcited };
    let residual = dynamics::scaled_residual(&ss.state_vector(), params, pump);
    if !(residual <= 1e-9) {
        return Err(SteadyStateError::RootFindFailure { residual });
    }
    Ok(ss)
}

/// Stable homogeneous steady state at the given pump.
pub fn steady_state(params: &ModelParams, pump: Pump) -> Result<SteadyState, SteadyStateError> {
    match classify_regime(params, pump) {
        Regime::BelowLaser => {
            let (sigma1, sigma2, sigma3) = dark_populations(params, pump);
            Ok(SteadyState { sigma1, sigma2, sigma3, i_par: 0.0, i_orth: 0.0, regime: Regime::BelowLaser })
        }
        Regime::LaserOnly => laser_only_branch(params, pump),
        Regime::OrthExcited => orth_excited_state(params, pump),
    }
}

/// Second-harmonic photon flux `μ(I∥ − I⊥)²`. It clamps at `γ⊥²/μ` once the
/// orthogonal mode oscillates.
pub fn sh_power(params: &ModelParams, ss: &SteadyState) -> f64 {
    params.nl_coupling() * (ss.i_par - ss.i_orth).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RawParams;

    fn pump(x: f64) -> Pump {
        Pump::new(x).unwrap()
    }

    fn moderate() -> ModelParams {
        ModelParams::new(RawParams {
            stim_rate_g: 20.0,
            nl_coupling_mu: 1.0,
            decay_k2: 100.0,
            decay_k3: 1.0,
            gamma_par_c: 0.5,
            gamma_par_l: 0.5,
            gamma_orth_c: 0.75,
            gamma_orth_l: 0.25,
        })
        .unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    // Closed-form thresholds derived by hand from the fixed-point equations;
    // only used to check the bisection.
    fn laser_threshold_closed_form(p: &ModelParams) -> f64 {
        let r = p.decay_upper() / p.decay_lower();
        let dd = 2.0 * p.total_decay(Mode::Parallel) / p.stim_rate();
        dd * p.decay_upper() / ((1.0 - r) - dd * (1.0 + r))
    }

    fn orth_threshold_closed_form(p: &ModelParams) -> f64 {
        let g = p.stim_rate();
        let d = 2.0 * (p.total_decay(Mode::Parallel) + p.total_decay(Mode::Orthogonal)) / g;
        let flux = g * d * orth_threshold_intensity(p);
        let (k2, k3) = (p.decay_lower(), p.decay_upper());
        let frac = (flux + k3 * d) / (k2 * (1.0 - d) - k3 - flux);
        frac * k2 / (1.0 - frac)
    }

    #[test]
    fn empty_pump_is_ground_state() {
        let ss = steady_state(&ModelParams::reference(), pump(0.0)).unwrap();
        assert_eq!((ss.sigma1, ss.sigma2, ss.sigma3), (1.0, 0.0, 0.0));
        assert_eq!((ss.i_par, ss.i_orth), (0.0, 0.0));
        assert_eq!(ss.regime, Regime::BelowLaser);
        assert_eq!(classify_regime(&ModelParams::reference(), pump(0.0)), Regime::BelowLaser);
    }

    #[test]
    fn thresholds_match_hand_derived_closed_forms() {
        for p in [moderate(), ModelParams::reference()] {
            let lth = laser_threshold(&p).unwrap().rate();
            let oth = orth_threshold_pump(&p).unwrap().rate();
            assert!(rel(lth, laser_threshold_closed_form(&p)) < 1e-10, "{lth}");
            assert!(rel(oth, orth_threshold_closed_form(&p)) < 1e-9, "{oth}");
        }
    }

    #[test]
    fn laser_threshold_is_root_of_gain_condition() {
        for p in [moderate(), ModelParams::reference()] {
            let lth = laser_threshold(&p).unwrap();
            let gp = p.total_decay(Mode::Parallel);
            assert!((small_signal_gain(&p, lth) - gp).abs() <= 1e-9 * gp);
            let ss = steady_state(&p, lth).unwrap();
            assert!(ss.i_par <= 1e-9 * orth_threshold_intensity(&p));
        }
    }

    #[test]
    fn laser_threshold_rises_with_loss() {
        let p = ModelParams::reference();
        let q = p
            .with(|r| {
                r.gamma_par_c *= 2.0;
                r.gamma_par_l *= 2.0
            })
            .unwrap();
        assert!(laser_threshold(&q).unwrap().rate() > laser_threshold(&p).unwrap().rate());
    }

    #[test]
    fn unreachable_laser_threshold() {
        let p = ModelParams::reference().with(|r| r.stim_rate_g = 1.0e-2).unwrap();
        assert!(matches!(laser_threshold(&p), Err(SteadyStateError::Unreachable(_))));
        assert!(matches!(orth_threshold_pump(&p), Err(SteadyStateError::Unreachable(_))));
    }

    #[test]
    fn unreachable_orth_threshold() {
        // Inversion needed for the second threshold exceeds one.
        let p = moderate().with(|r| r.stim_rate_g = 3.5).unwrap();
        assert!(laser_threshold(&p).is_ok());
        assert!(matches!(orth_threshold_pump(&p), Err(SteadyStateError::Unreachable(_))));
        assert_eq!(classify_regime(&p, pump(1e6)), Regime::LaserOnly);
    }

    #[test]
    fn orth_threshold_intensity_reference_value() {
        let p = ModelParams::reference();
        assert!(rel(orth_threshold_intensity(&p), 1.96875e10) < 1e-15);
        let doubled = p.with(|r| r.nl_coupling_mu *= 2.0).unwrap();
        assert!(rel(orth_threshold_intensity(&doubled), 0.5 * 1.96875e10) < 1e-15);
        let lossless = p.with(|r| r.gamma_orth_l = 0.0).unwrap();
        assert!(rel(orth_threshold_intensity(&lossless), 1.875e10) < 1e-15);
    }

    #[test]
    fn orth_threshold_pump_is_root_and_rises_with_orth_loss() {
        let p = ModelParams::reference();
        let oth = orth_threshold_pump(&p).unwrap();
        assert!(oth.rate().is_finite());
        let ss = steady_state(&p, oth).unwrap();
        assert!(rel(ss.i_par, orth_threshold_intensity(&p)) < 1e-9);

        let q = moderate();
        let q2 = q
            .with(|r| {
                r.gamma_orth_c *= 2.0;
                r.gamma_orth_l *= 2.0
            })
            .unwrap();
        assert!(orth_threshold_pump(&q2).unwrap().rate() > orth_threshold_pump(&q).unwrap().rate());
    }

    #[test]
    fn quadratic_root_and_residual() {
        let p = ModelParams::reference();
        let lth = laser_threshold(&p).unwrap().rate();
        let oth = orth_threshold_pump(&p).unwrap().rate();
        for g in [lth * 1.5, 1e10, 1e15, 0.5 * oth] {
            let q = sigma3_quadratic(&p, pump(g)).unwrap();
            assert!(q.relative_residual() < 1e-9, "{g}: {}", q.relative_residual());
            let ss = laser_only_branch(&p, pump(g)).unwrap();
            // σ₂ closed form
            assert!((ss.sigma2 * (p.decay_lower() + g) - g * (1.0 - ss.sigma3)).abs() < 1e-12 * g.max(p.decay_lower()));
        }
    }

    #[test]
    fn far_below_threshold_has_no_lasing_branch() {
        let p = ModelParams::reference();
        let lth = laser_threshold(&p).unwrap().rate();
        for g in [0.0, 1e-3 * lth, 0.5 * lth] {
            assert!(laser_only_branch(&p, pump(g)).is_err());
            assert_eq!(laser_only_intensity(&p, pump(g)), 0.0);
        }
    }

    #[test]
    fn classification_between_and_beyond_thresholds() {
        for p in [moderate(), ModelParams::reference()] {
            let lth = laser_threshold(&p).unwrap().rate();
            let oth = orth_threshold_pump(&p).unwrap().rate();
            assert_eq!(classify_regime(&p, pump(0.5 * (lth + oth))), Regime::LaserOnly);
            assert_eq!(classify_regime(&p, pump(2.0 * oth)), Regime::OrthExcited);
            assert_eq!(classify_regime(&p, pump(0.5 * lth)), Regime::BelowLaser);
            assert_eq!(classify_regime(&p, pump(lth)), Regime::LaserOnly);
            assert_eq!(classify_regime(&p, pump(oth)), Regime::OrthExcited);
        }
    }

    #[test]
    fn clamping_identities_and_conservation() {
        for p in [moderate(), ModelParams::reference()] {
            let lth = laser_threshold(&p).unwrap().rate();
            let oth = orth_threshold_pump(&p).unwrap().rate();
            let delta = orth_threshold_intensity(&p);
            let g = p.stim_rate();
            let mu = p.nl_coupling();
            let gp = p.total_decay(Mode::Parallel);
            let go = p.total_decay(Mode::Orthogonal);
            for f in [1.01, 1.5, 3.0, 10.0] {
                let ss = steady_state(&p, pump(lth * f)).unwrap();
                if ss.regime == Regime::LaserOnly {
                    assert!(rel(g * (ss.sigma3 - ss.sigma2), 2.0 * gp + 2.0 * mu * ss.i_par) < 1e-9);
                }
                let ss = steady_state(&p, pump(oth * f)).unwrap();
                assert_eq!(ss.regime, Regime::OrthExcited);
                assert!(rel(ss.i_par - ss.i_orth, delta) < 1e-9);
                assert!(rel(sh_power(&p, &ss), go * go / mu) < 1e-9);
                for s in [ss.sigma1, ss.sigma2, ss.sigma3] {
                    assert!((0.0..=1.0).contains(&s));
                }
                assert!((ss.sigma1 + ss.sigma2 + ss.sigma3 - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sh_power_is_zero_when_dark_and_continuous_at_orth_threshold() {
        let p = ModelParams::reference();
        let ss = steady_state(&p, pump(0.0)).unwrap();
        assert_eq!(sh_power(&p, &ss), 0.0);
        let oth = orth_threshold_pump(&p).unwrap().rate();
        let below = steady_state(&p, pump(oth * (1.0 - 1e-8))).unwrap();
        assert_eq!(below.regime, Regime::LaserOnly);
        let plateau = p.total_decay(Mode::Orthogonal).powi(2) / p.nl_coupling();
        assert!(rel(sh_power(&p, &below), plateau) < 1e-6);
    }

    #[test]
    fn continuity_across_both_thresholds() {
        for p in [moderate(), ModelParams::reference()] {
            let scale = orth_threshold_intensity(&p);
            for th in [laser_threshold(&p).unwrap().rate(), orth_threshold_pump(&p).unwrap().rate()] {
                let l = steady_state(&p, pump(th * (1.0 - 1e-8))).unwrap();
                let r = steady_state(&p, pump(th * (1.0 + 1e-8))).unwrap();
                assert_ne!(l.regime, r.regime);
                assert!((l.i_par - r.i_par).abs() <= 1e-6 * scale);
                assert!((l.i_orth - r.i_orth).abs() <= 1e-6 * scale);
                for (a, b) in [(l.sigma1, r.sigma1), (l.sigma2, r.sigma2), (l.sigma3, r.sigma3)] {
                    assert!((a - b).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn intensity_quadratic_agrees_with_inversion_quadratic() {
        for p in [moderate(), ModelParams::reference()] {
            let lth = laser_threshold(&p).unwrap().rate();
            let oth = orth_threshold_pump(&p).unwrap().rate();
            for k in 1..20 {
                let g = lth + (oth - lth) * k as f64 / 20.0;
                let a = laser_only_branch(&p, pump(g)).unwrap().sigma3;
                let b = sigma3_quadratic(&p, pump(g)).unwrap().sigma3;
                assert!((a - b).abs() <= 1e-12, "{g}: {a} vs {b}");
            }
        }
    }
}
