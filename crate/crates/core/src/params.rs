//! Physical parameter set of the laser + type-II doubler model.
//!
//! Populations are scaled by the number of lasing atoms and field amplitudes
//! by its square root, so the atom number never appears. All rates are in
//! s⁻¹.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One of the two orthogonally polarized fundamental modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// The lasing mode, parallel to the laser polarization.
    Parallel,
    /// The mode that only couples through the nonlinear crystal.
    Orthogonal,
}

/// Unvalidated parameter record, as read from a configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub stim_rate_g: f64,
    pub nl_coupling_mu: f64,
    pub decay_k2: f64,
    pub decay_k3: f64,
    pub gamma_par_c: f64,
    pub gamma_par_l: f64,
    pub gamma_orth_c: f64,
    pub gamma_orth_l: f64,
}

impl RawParams {
    /// Field names and values in declaration order.
    pub fn entries(&self) -> [(&'static str, f64); 8] {
        [
            ("stim_rate_g", self.stim_rate_g),
            ("nl_coupling_mu", self.nl_coupling_mu),
            ("decay_k2", self.decay_k2),
            ("decay_k3", self.decay_k3),
            ("gamma_par_c", self.gamma_par_c),
            ("gamma_par_l", self.gamma_par_l),
            ("gamma_orth_c", self.gamma_orth_c),
            ("gamma_orth_l", self.gamma_orth_l),
        ]
    }
}

/// A single violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Every invariant a raw parameter record failed, in field order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid parameters: {}", join(.violations))]
pub struct ParamsError {
    pub violations: Vec<Violation>,
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|x| x.message.as_str()).collect::<Vec<_>>().join("; ")
}

/// Validated rate constants. Only obtainable through [`ModelParams::new`],
/// so every value in circulation satisfies the invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    raw: RawParams,
}

impl ModelParams {
    /// Checks every invariant and collects all violations rather than
    /// stopping at the first.
    pub fn new(raw: RawParams) -> Result<Self, ParamsError> {
        let mut violations = Vec::new();
        for (field, value) in raw.entries() {
            if !value.is_finite() {
                violations.push(Violation { field, message: format!("{field} is non-finite") });
                continue;
            }
            let strictly_positive = matches!(field, "stim_rate_g" | "nl_coupling_mu" | "decay_k2" | "decay_k3");
            if strictly_positive && value <= 0.0 {
                violations.push(Violation { field, message: format!("{field} must be > 0") });
            } else if value < 0.0 {
                violations.push(Violation { field, message: format!("{field} must be >= 0") });
            }
        }
        let sum_ok = |a: f64, b: f64| !(a.is_finite() && b.is_finite()) || a + b > 0.0;
        if !sum_ok(raw.gamma_par_c, raw.gamma_par_l) {
            violations
                .push(Violation { field: "gamma_par_c", message: "gamma_par_c + gamma_par_l must be > 0".into() });
        }
        if !sum_ok(raw.gamma_orth_c, raw.gamma_orth_l) {
            violations
                .push(Violation { field: "gamma_orth_c", message: "gamma_orth_c + gamma_orth_l must be > 0".into() });
        }
        if violations.is_empty() {
            Ok(Self { raw })
        } else {
            Err(ParamsError { violations })
        }
    }

    /// Reference parameter set.
    ///
    /// μ and the four cavity decay rates are the published values of the
    /// realistic design. G, κ₂ and κ₃ are calibration defaults chosen so
    /// that all three pump regimes exist under the scaled equations of
    /// motion: with μ = 8e-4 s⁻¹ the orthogonal-mode threshold sits at a
    /// scaled intensity near 2e10, and sustaining that intensity forces
    /// κ₂ ≳ 2μ·(γ⊥/μ)², which is why κ₂ is so large.
    pub fn reference() -> Self {
        Self::new(RawParams {
            stim_rate_g: 1.0e8,
            nl_coupling_mu: 8.0e-4,
            decay_k2: 1.0e19,
            decay_k3: 1.0e4,
            gamma_par_c: 0.5e6,
            gamma_par_l: 5.0e6,
            gamma_orth_c: 1.5e7,
            gamma_orth_l: 0.75e6,
        })
        .expect("reference parameters are valid")
    }

    pub fn raw(&self) -> RawParams {
        self.raw
    }

    /// G, stimulated emission rate per (scaled) photon.
    pub fn stim_rate(&self) -> f64 {
        self.raw.stim_rate_g
    }

    /// μ, nonlinear conversion coupling.
    pub fn nl_coupling(&self) -> f64 {
        self.raw.nl_coupling_mu
    }

    /// κ₂, decay of the lower lasing level into the ground level.
    pub fn decay_lower(&self) -> f64 {
        self.raw.decay_k2
    }

    /// κ₃, spontaneous decay of the upper lasing level.
    pub fn decay_upper(&self) -> f64 {
        self.raw.decay_k3
    }

    /// Output-coupler part of a mode's decay rate.
    pub fn coupler_decay(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Parallel => self.raw.gamma_par_c,
            Mode::Orthogonal => self.raw.gamma_orth_c,
        }
    }

    /// Passive-loss part of a mode's decay rate.
    pub fn loss_decay(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Parallel => self.raw.gamma_par_l,
            Mode::Orthogonal => self.raw.gamma_orth_l,
        }
    }

    /// Total amplitude decay rate γ = γᶜ + γˡ of a mode.
    pub fn total_decay(&self, mode: Mode) -> f64 {
        self.coupler_decay(mode) + self.loss_decay(mode)
    }

    /// Returns a copy with one raw field replaced, re-validated.
    pub fn with(&self, edit: impl FnOnce(&mut RawParams)) -> Result<Self, ParamsError> {
        let mut raw = self.raw;
        edit(&mut raw);
        Self::new(raw)
    }
}

/// Pump rate Γ from the ground level into the upper lasing level.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Pump(f64);

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("pump rate must be finite and >= 0, got {0}")]
pub struct InvalidPump(pub f64);

impl Pump {
    pub fn new(rate: f64) -> Result<Self, InvalidPump> {
        if rate.is_finite() && rate >= 0.0 {
            Ok(Self(rate))
        } else {
            Err(InvalidPump(rate))
        }
    }

    pub fn rate(self) -> f64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn total_decay_sums_published_partial_rates() {
        let p = ModelParams::reference();
        assert_eq!(p.total_decay(Mode::Orthogonal), 1.575e7);
        assert_eq!(p.total_decay(Mode::Parallel), 5.5e6);
        assert_eq!(p.nl_coupling(), 8.0e-4);
    }

    #[test]
    fn rejects_negative_coupling() {
        let err = ModelParams::reference().with(|r| r.nl_coupling_mu = -1.0).unwrap_err();
        assert_eq!(err.violations.len(), 1);
        assert_eq!(err.violations[0].message, "nl_coupling_mu must be > 0");
    }

    #[test]
    fn rejects_nan_rate() {
        let err = ModelParams::reference().with(|r| r.gamma_orth_c = f64::NAN).unwrap_err();
        assert!(err.violations[0].message.contains("non-finite"));
    }

    #[test]
    fn rejects_dark_mode_and_collects_everything() {
        let err = ModelParams::reference()
            .with(|r| {
                r.gamma_orth_c = 0.0;
                r.gamma_orth_l = 0.0;
                r.decay_k3 = 0.0;
                r.stim_rate_g = f64::INFINITY;
            })
            .unwrap_err();
        let msgs: Vec<_> = err.violations.iter().map(|v| v.message.as_str()).collect();
        assert_eq!(
            msgs,
            ["stim_rate_g is non-finite", "decay_k3 must be > 0", "gamma_orth_c + gamma_orth_l must be > 0"]
        );
    }

    #[test]
    fn zero_coupler_is_allowed() {
        assert!(ModelParams::reference().with(|r| r.gamma_orth_c = 0.0).is_ok());
    }

    #[test]
    fn pump_gate() {
        assert!(Pump::new(0.0).is_ok());
        assert!(Pump::new(-1.0).is_err());
        assert!(Pump::new(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn total_decay_is_additive(c in 0.0f64..1e9, l in 0.0f64..1e9) {
            prop_assume!(c + l > 0.0);
            let a = ModelParams::reference().with(|r| { r.gamma_orth_c = c; r.gamma_orth_l = l; }).unwrap();
            let b = ModelParams::reference().with(|r| { r.gamma_orth_c = l; r.gamma_orth_l = c; }).unwrap();
            prop_assert_eq!(a.total_decay(Mode::Orthogonal), c + l);
            prop_assert_eq!(a.total_decay(Mode::Orthogonal), b.total_decay(Mode::Orthogonal));
        }

        #[test]
        fn construction_is_all_or_nothing(vals in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let raw = RawParams {
                stim_rate_g: vals[0], nl_coupling_mu: vals[1], decay_k2: vals[2], decay_k3: vals[3],
                gamma_par_c: vals[4], gamma_par_l: vals[5], gamma_orth_c: vals[6], gamma_orth_l: vals[7],
            };
            match ModelParams::new(raw) {
                Ok(p) => {
                    prop_assert!(raw.entries().iter().all(|(_, v)| *v >= 0.0));
                    prop_assert!(p.stim_rate() > 0.0 && p.nl_coupling() > 0.0);
                    prop_assert!(p.total_decay(Mode::Parallel) > 0.0 && p.total_decay(Mode::Orthogonal) > 0.0);
                }
                Err(e) => prop_assert!(!e.violations.is_empty()),
            }
        }
    }
}
