//! Stochastic check of the analytic squeezing spectrum.
//!
//! The decoupled orthogonal phase quadrature is integrated with
//! Euler–Maruyama, driven by two independent vacuum inputs, and the output
//! field is formed from the intracavity value and the reflected
//! output-coupler input. White noise of unit spectral density is
//! represented per step by a Gaussian increment `ΔW` of variance `dt`; its
//! instantaneous value in the output relation is `ΔW/dt`. The same `ΔW`
//! drives the cavity update of that step, which is what carries the
//! cavity/output correlation responsible for `V < 1`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::params::{Mode, ModelParams};
use crate::spectra;
use crate::steadystate;
use crate::welch::{self, Welch};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("invalid run request: {0}")]
    InvalidInput(String),
    #[error("series of {available} usable samples is too short for {requested} segments")]
    TooShort { available: usize, requested: usize },
    #[error("band [{lo:e}, {hi:e}] rad/s has no estimate bins (resolved range [{min:e}, {max:e}])")]
    BandMismatch { lo: f64, hi: f64, min: f64, max: f64 },
}

/// Sampled output of one stochastic run.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeRun {
    pub seed: u64,
    pub dt: f64,
    pub duration: f64,
    pub i_par: f64,
    /// Damping rate `γ⊥ + μI∥` of the simulated quadrature.
    pub relaxation_rate: f64,
    /// δY⊥ᵒᵘᵗ at the start of every step.
    pub series_out: Vec<f64>,
    /// δY⊥ at the start of every step.
    pub series_cavity: Vec<f64>,
}

impl SdeRun {
    /// Samples dropped before spectral estimation, `10/(γ⊥ + μI∥)` seconds.
    pub fn transient_samples(&self) -> usize {
        ((10.0 / self.relaxation_rate) / self.dt).ceil() as usize
    }
}

/// Testing switches for [`simulate_decoupled_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeHooks {
    pub noise: bool,
    pub initial_cavity: f64,
}

impl Default for SdeHooks {
    fn default() -> Self {
        Self { noise: true, initial_cavity: 0.0 }
    }
}

/// Largest step allowed for a given operating point, `0.1/(γ⊥ + μI∥)`.
pub fn max_dt(params: &ModelParams, i_par: f64) -> f64 {
    0.1 / (params.total_decay(Mode::Orthogonal) + params.nl_coupling() * i_par)
}

/// Largest step not above `max_dt` that puts `omega` exactly on a bin of a
/// Welch estimate with segments of `segment_len` samples. `None` when
/// `omega` lies below the first bin even at `max_dt`.
pub fn aligned_dt(omega: f64, segment_len: usize, max_dt: f64) -> Option<f64> {
    let turn = 2.0 * std::f64::consts::PI;
    let bin = (omega * segment_len as f64 * max_dt / turn).floor();
    (bin >= 1.0 && bin < (segment_len / 2) as f64).then(|| turn * bin / (segment_len as f64 * omega))
}

pub fn simulate_decoupled(
    params: &ModelParams,
    i_par: f64,
    seed: u64,
    dt: f64,
    duration: f64,
) -> Result<SdeRun, MonteCarloError> {
    simulate_decoupled_with(params, i_par, seed, dt, duration, SdeHooks::default())
}

pub fn simulate_decoupled_with(
    params: &ModelParams,
    i_par: f64,
    seed: u64,
    dt: f64,
    duration: f64,
    hooks: SdeHooks,
) -> Result<SdeRun, MonteCarloError> {
    let steps = check_request(params, i_par, dt, duration)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = dt.sqrt();
    let increments = (0..steps).map(|_| {
        if hooks.noise {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            (a * sd, b * sd)
        } else {
            (0.0, 0.0)
        }
    });
    let (series_out, series_cavity) = integrate_increments(params, i_par, dt, hooks.initial_cavity, increments);
    Ok(SdeRun {
        seed,
        dt,
        duration,
        i_par,
        relaxation_rate: params.total_decay(Mode::Orthogonal) + params.nl_coupling() * i_par,
        series_out,
        series_cavity,
    })
}

fn check_request(params: &ModelParams, i_par: f64, dt: f64, duration: f64) -> Result<usize, MonteCarloError> {
    let limit = steadystate::orth_threshold_intensity(params);
    if !(0.0..=limit).contains(&i_par) {
        return Err(MonteCarloError::InvalidInput(format!("i_par = {i_par:e} outside [0, {limit:e}]")));
    }
    if !(dt > 0.0 && dt <= max_dt(params, i_par)) {
        return Err(MonteCarloError::InvalidInput(format!("dt = {dt:e} must be in (0, {:e}]", max_dt(params, i_par))));
    }
    if !(duration.is_finite() && duration >= dt) {
        return Err(MonteCarloError::InvalidInput(format!("duration = {duration:e} shorter than dt")));
    }
    Ok((duration / dt).floor() as usize)
}

/// Euler–Maruyama over a stream of `(ΔW_loss, ΔW_coupler)` increments.
/// Returns `(output, cavity)` sampled before each update.
pub fn integrate_increments(
    params: &ModelParams,
    i_par: f64,
    dt: f64,
    initial: f64,
    increments: impl Iterator<Item = (f64, f64)>,
) -> (Vec<f64>, Vec<f64>) {
    let decay = (params.total_decay(Mode::Orthogonal) + params.nl_coupling() * i_par) * dt;
    let loss = (2.0 * params.loss_decay(Mode::Orthogonal)).sqrt();
    let coupler = (2.0 * params.coupler_decay(Mode::Orthogonal)).sqrt();
    let (lower, _) = increments.size_hint();
    let mut out = Vec::with_capacity(lower);
    let mut cavity = Vec::with_capacity(lower);
    let mut y = initial;
    for (dw_loss, dw_coupler) in increments {
        cavity.push(y);
        out.push(coupler * y - dw_coupler / dt);
        y += -decay * y + loss * dw_loss + coupler * dw_coupler;
    }
    (out, cavity)
}

/// Spectral estimate of a run's output, QNL-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    /// Angular frequencies, rad/s.
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    pub n_segments: usize,
    pub segment_len: usize,
    /// Per-bin fractional standard error.
    pub rel_std_err: Vec<f64>,
    pub dt: f64,
    pub i_par: f64,
}

impl From<(Welch, f64, f64)> for PsdEstimate {
    fn from((w, dt, i_par): (Welch, f64, f64)) -> Self {
        Self {
            rel_std_err: vec![w.rel_std_err; w.psd.len()],
            freqs: w.freqs,
            psd: w.psd,
            n_segments: w.n_segments,
            segment_len: w.segment_len,
            dt,
            i_par,
        }
    }
}

impl PsdEstimate {
    /// Index of the bin closest to `omega`.
    pub fn nearest_bin(&self, omega: f64) -> Option<usize> {
        (0..self.freqs.len()).min_by(|&a, &b| (self.freqs[a] - omega).abs().total_cmp(&(self.freqs[b] - omega).abs()))
    }
}

/// Welch estimate of `series_out` after the transient, with the longest
/// power-of-two segment that still gives `n_segments` segments.
pub fn estimate_psd(run: &SdeRun, n_segments: usize) -> Result<PsdEstimate, MonteCarloError> {
    if n_segments < 8 {
        return Err(MonteCarloError::InvalidInput(format!("need at least 8 segments, got {n_segments}")));
    }
    let skip = run.transient_samples().min(run.series_out.len());
    let usable = &run.series_out[skip..];
    let len = welch::segment_len_for(usable.len(), n_segments)
        .ok_or(MonteCarloError::TooShort { available: usable.len(), requested: n_segments })?;
    Ok((welch::welch(usable, run.dt, len), run.dt, run.i_par).into())
}

/// Segment-weighted average of estimates that share a frequency grid.
/// Inputs are combined in a canonical order, so the result does not depend
/// on the order they are given in.
pub fn combine_estimates(estimates: &[PsdEstimate]) -> Result<PsdEstimate, MonteCarloError> {
    let first = estimates.first().ok_or_else(|| MonteCarloError::InvalidInput("no estimates to combine".into()))?;
    if estimates.iter().any(|e| e.freqs != first.freqs || e.dt != first.dt || e.i_par != first.i_par) {
        return Err(MonteCarloError::InvalidInput("estimates have different grids".into()));
    }
    let mut sorted: Vec<&PsdEstimate> = estimates.iter().collect();
    sorted.sort_by(|a, b| {
        a.n_segments.cmp(&b.n_segments).then_with(|| {
            a.psd
                .iter()
                .zip(&b.psd)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let total: usize = sorted.iter().map(|e| e.n_segments).sum();
    let mut psd = vec![0.0; first.psd.len()];
    let mut var = vec![0.0; first.psd.len()];
    for e in &sorted {
        let w = e.n_segments as f64 / total as f64;
        for i in 0..psd.len() {
            psd[i] += w * e.psd[i];
            var[i] += (w * e.rel_std_err[i]).powi(2);
        }
    }
    Ok(PsdEstimate {
        freqs: first.freqs.clone(),
        psd,
        n_segments: total,
        segment_len: first.segment_len,
        rel_std_err: var.into_iter().map(f64::sqrt).collect(),
        dt: first.dt,
        i_par: first.i_par,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinDeviation {
    pub omega: f64,
    pub psd: f64,
    pub analytic: f64,
    /// `(psd − analytic) / (analytic · rel_std_err)`.
    pub deviation_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub bins: Vec<BinDeviation>,
    pub max_sigma_deviation: f64,
    pub pass: bool,
}

/// Pass limit on the per-bin deviation, in standard errors.
pub const PASS_SIGMA: f64 = 4.0;

/// Compares the estimate against the reduced-form spectrum over the band
/// `[band.0, band.1]` rad/s. The reference curve is not gated on the
/// threshold intensity of `params`, so a deliberately wrong parameter set
/// still yields a curve to fail against.
pub fn compare_to_analytic(
    estimate: &PsdEstimate,
    params: &ModelParams,
    i_par: f64,
    band: (f64, f64),
) -> Result<Comparison, MonteCarloError> {
    if !(i_par >= 0.0 && i_par.is_finite()) {
        return Err(MonteCarloError::InvalidInput(format!("i_par = {i_par:e} must be finite and >= 0")));
    }
    let (lo, hi) = band;
    let mismatch = || MonteCarloError::BandMismatch {
        lo,
        hi,
        min: estimate.freqs.first().copied().unwrap_or(f64::NAN),
        max: estimate.freqs.last().copied().unwrap_or(f64::NAN),
    };
    let (Some(&fmin), Some(&fmax)) = (estimate.freqs.first(), estimate.freqs.last()) else {
        return Err(mismatch());
    };
    if !(lo <= hi) || lo < fmin || hi > fmax {
        return Err(mismatch());
    }
    let mut bins = Vec::new();
    for i in 0..estimate.freqs.len() {
        let omega = estimate.freqs[i];
        if omega < lo || omega > hi {
            continue;
        }
        let analytic = spectra::reduced_form_ungated(params, i_par, omega);
        let deviation_sigma = (estimate.psd[i] - analytic) / (analytic * estimate.rel_std_err[i]);
        bins.push(BinDeviation { omega, psd: estimate.psd[i], analytic, deviation_sigma });
    }
    if bins.is_empty() {
        return Err(mismatch());
    }
    let max_sigma_deviation = bins.iter().map(|b| b.deviation_sigma.abs()).fold(0.0, f64::max);
    Ok(Comparison { pass: max_sigma_deviation <= PASS_SIGMA, max_sigma_deviation, bins })
}
