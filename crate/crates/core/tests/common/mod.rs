#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use squeezer_core::params::{ModelParams, Pump, RawParams};
use squeezer_core::steadystate;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pump(rate: f64) -> Pump {
    Pump::new(rate).unwrap()
}

/// Parameter sets whose rates span two or three decades at most, so that
/// an explicit integrator can settle them, and for which both thresholds
/// exist.
pub fn moderate_params(rng: &mut impl Rng) -> ModelParams {
    loop {
        let raw = RawParams {
            stim_rate_g: rng.random_range(10.0..40.0),
            nl_coupling_mu: rng.random_range(0.5..2.0),
            decay_k2: rng.random_range(50.0..200.0),
            decay_k3: rng.random_range(0.5..2.0),
            gamma_par_c: rng.random_range(0.2..0.8),
            gamma_par_l: rng.random_range(0.2..0.8),
            gamma_orth_c: rng.random_range(0.3..1.0),
            gamma_orth_l: rng.random_range(0.1..0.5),
        };
        let p = ModelParams::new(raw).unwrap();
        if steadystate::orth_threshold_pump(&p).is_ok() {
            return p;
        }
    }
}

pub struct Thresholds {
    pub laser: f64,
    pub orth: f64,
}

pub fn thresholds(p: &ModelParams) -> Thresholds {
    Thresholds {
        laser: steadystate::laser_threshold(p).unwrap().rate(),
        orth: steadystate::orth_threshold_pump(p).unwrap().rate(),
    }
}

/// A pump strictly inside regime ii, away from both ends.
pub fn regime2_pump(p: &ModelParams, rng: &mut impl Rng) -> f64 {
    let t = thresholds(p);
    t.laser + (t.orth - t.laser) * rng.random_range(0.05..0.95)
}
