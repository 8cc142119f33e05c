//! Linearized quantum-noise spectra of the fundamental fields.
//!
//! Every variance is normalized to the quantum noise limit: each vacuum
//! input has unit two-sided spectral density, so a coherent or vacuum
//! state reads `V = 1` and `V < 1` is squeezing. Analysis frequencies are
//! angular, in rad/s.
//!
//! While the orthogonal mode is dark its phase quadrature obeys an
//! Ornstein–Uhlenbeck equation that is independent of the laser noise:
//!
//! ```text
//! dδY⊥/dt = −(γ⊥ + μI∥)δY⊥ + √(2γ⊥ˡ)δY⊥ⁱⁿ¹ + √(2γ⊥ᶜ)δY⊥ⁱⁿ²
//! δY⊥ᵒᵘᵗ  = √(2γ⊥ᶜ)δY⊥ − δY⊥ⁱⁿ²
//! ```
//!
//! which gives `V⊥(ω) = 1 − 4γ⊥ᶜμI∥ / ((γ⊥ + μI∥)² + ω²)`.

use nalgebra::{Matrix2, SMatrix};
use num_complex::Complex64;
use thiserror::Error;

use crate::params::{Mode, ModelParams, Pump};
use crate::steadystate::{self, Regime, SteadyStateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrature {
    /// δX; selector Θ = 1 and the upper sign of ± in the coupled equations.
    Amplitude,
    /// δY; Θ = 0 and the lower sign.
    Phase,
}

/// Independent unit-variance vacuum inputs of the linearized model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseChannel {
    /// δZⁱⁿ¹, passive intracavity loss of a mode.
    PassiveLossIn(Mode),
    /// δZⁱⁿ², output coupler of a mode.
    OutputCouplerIn(Mode),
    /// δZ_bⁱⁿ, second-harmonic vacuum entering through the conversion loss;
    /// shared by both fundamental modes.
    ShVacuumIn,
    /// δZ_p, laser pump fluctuations (parallel mode only).
    PumpIn,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectraError {
    #[error("operating point is in regime {found}, expected {expected}")]
    WrongRegime { found: Regime, expected: Regime },
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(&'static str),
    #[error("drift matrix is singular at omega = {omega:e}")]
    SingularMatrix { omega: f64 },
    #[error(transparent)]
    SteadyState(#[from] SteadyStateError),
}

/// One point of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCurve {
    pub points: Vec<SpectrumPoint>,
    pub params: ModelParams,
    pub i_par: f64,
    pub quadrature: Quadrature,
}

impl SpectrumCurve {
    pub fn min_variance(&self) -> Option<SpectrumPoint> {
        self.points.iter().copied().min_by(|a, b| a.variance.total_cmp(&b.variance))
    }
}

/// Variance of the orthogonal-mode phase quadrature from the populations,
/// `1 − 2γ⊥ᶜ(G(σ₃−σ₂) − 2γ∥) / ((γ⊥ − γ∥ + G(σ₃−σ₂)/2)² + ω²)`.
///
/// Valid only while the orthogonal mode is dark (regime ii).
pub fn orth_phase_variance(params: &ModelParams, pump: Pump, omega: f64) -> Result<f64, SpectraError> {
    let found = steadystate::classify_regime(params, pump);
    if found != Regime::LaserOnly {
        return Err(SpectraError::WrongRegime { found, expected: Regime::LaserOnly });
    }
    lasing_branch_variance(params, pump, omega)
}

/// Same expression evaluated on the lasing branch without the regime gate.
/// Used at the closure point of regime ii (the orthogonal threshold itself).
fn lasing_branch_variance(params: &ModelParams, pump: Pump, omega: f64) -> Result<f64, SpectraError> {
    let ss = steadystate::laser_only_branch(params, pump)?;
    Ok(variance_from_populations(params, ss.sigma3, ss.sigma2, omega))
}

/// The population form of the spectrum for arbitrary `σ₃`, `σ₂`, with no
/// check that they belong to a steady state.
pub fn variance_from_populations(params: &ModelParams, sigma3: f64, sigma2: f64, omega: f64) -> f64 {
    let gain = params.stim_rate() * (sigma3 - sigma2);
    let gc = params.coupler_decay(Mode::Orthogonal);
    let go = params.total_decay(Mode::Orthogonal);
    let gp = params.total_decay(Mode::Parallel);
    let denom = (go - gp + 0.5 * gain).powi(2) + omega * omega;
    1.0 - 2.0 * gc * (gain - 2.0 * gp) / denom
}

/// `1 − 4γ⊥ᶜμI / ((γ⊥ + μI)² + ω²)`, the same spectrum written with the
/// gain-clamping relation `G(σ₃−σ₂) = 2γ∥ + 2μI`. Needs only μ, the
/// orthogonal-mode rates and the lasing intensity.
pub fn orth_phase_variance_reduced(params: &ModelParams, i_par: f64, omega: f64) -> Result<f64, SpectraError> {
    let limit = steadystate::orth_threshold_intensity(params);
    if !(0.0..=limit).contains(&i_par) {
        return Err(SpectraError::DomainError(format!("i_par = {i_par:e} outside [0, {limit:e}]")));
    }
    Ok(reduced_form_ungated(params, i_par, omega))
}

/// The reduced form without the domain check, for any `i_par ≥ 0`. Stays
/// positive past the threshold intensity, since the numerator is at least
/// `(γ⊥ − μI)² + ω²`.
pub fn reduced_form_ungated(params: &ModelParams, i_par: f64, omega: f64) -> f64 {
    let mu = params.nl_coupling();
    let gc = params.coupler_decay(Mode::Orthogonal);
    let go = params.total_decay(Mode::Orthogonal);
    let damping = go + mu * i_par;
    1.0 - 4.0 * gc * mu * i_par / (damping * damping + omega * omega)
}

/// Variance at the orthogonal oscillation threshold,
/// `1 − 4γ⊥ᶜγ⊥ / (4γ⊥² + ω²)`.
pub fn threshold_variance(params: &ModelParams, omega: f64) -> f64 {
    let gc = params.coupler_decay(Mode::Orthogonal);
    let go = params.total_decay(Mode::Orthogonal);
    1.0 - 4.0 * gc * go / (4.0 * go * go + omega * omega)
}

/// Power ratio in decibels, `10 log₁₀ V`; negative means squeezed.
pub fn to_decibel(variance: f64) -> Result<f64, SpectraError> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(SpectraError::DomainError(format!("variance must be finite and > 0, got {variance}")));
    }
    Ok(10.0 * variance.log10())
}

fn check_omega_grid(omegas: &[f64]) -> Result<(), SpectraError> {
    if omegas.is_empty() {
        return Err(SpectraError::InvalidGrid("empty"));
    }
    if omegas.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(SpectraError::InvalidGrid("frequencies must be finite and >= 0"));
    }
    if omegas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SpectraError::InvalidGrid("frequencies must be strictly increasing"));
    }
    Ok(())
}

/// Reduced-form spectrum over a frequency grid.
pub fn frequency_sweep_curve(params: &ModelParams, i_par: f64, omegas: &[f64]) -> Result<SpectrumCurve, SpectraError> {
    check_omega_grid(omegas)?;
    let points = omegas
        .iter()
        .map(|&omega| {
            orth_phase_variance_reduced(params, i_par, omega).map(|variance| SpectrumPoint { omega, variance })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SpectrumCurve { points, params: *params, i_par, quadrature: Quadrature::Phase })
}

/// How the grid handed to [`pump_sweep_curve`] is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PumpAxis {
    /// Grid values are pump rates Γ in s⁻¹.
    Absolute,
    /// Grid values are Γ divided by the orthogonal threshold pump.
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpSweepPoint {
    pub pump: f64,
    /// Γ / Γ_th⊥.
    pub normalized: f64,
    pub regime: Regime,
    pub variance: Result<f64, SpectraError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PumpSweep {
    pub omega: f64,
    pub orth_threshold_pump: f64,
    pub points: Vec<PumpSweepPoint>,
}

/// Orthogonal-mode phase variance at a fixed analysis frequency versus pump
/// rate, across regime ii. Below laser threshold the field is vacuum and
/// the point reads 1; above the orthogonal threshold the point carries a
/// `WrongRegime` error. The threshold pump itself closes regime ii.
pub fn pump_sweep_curve(
    params: &ModelParams,
    grid: &[f64],
    axis: PumpAxis,
    omega: f64,
) -> Result<PumpSweep, SpectraError> {
    let oth = steadystate::orth_threshold_pump(params)?.rate();
    let points = grid
        .iter()
        .map(|&x| {
            let (rate, normalized) = match axis {
                PumpAxis::Absolute => (x, x / oth),
                PumpAxis::Normalized => (x * oth, x),
            };
            pump_sweep_point(params, rate, normalized, oth, omega)
        })
        .collect();
    Ok(PumpSweep { omega, orth_threshold_pump: oth, points })
}

fn pump_sweep_point(params: &ModelParams, rate: f64, normalized: f64, oth: f64, omega: f64) -> PumpSweepPoint {
    let pump = match Pump::new(rate) {
        Ok(p) => p,
        Err(e) => {
            return PumpSweepPoint {
                pump: rate,
                normalized,
                regime: Regime::BelowLaser,
                variance: Err(SpectraError::DomainError(e.to_string())),
            }
        }
    };
    let regime = steadystate::classify_regime(params, pump);
    let variance = match regime {
        Regime::BelowLaser => Ok(1.0),
        Regime::LaserOnly => lasing_branch_variance(params, pump, omega),
        Regime::OrthExcited if rate <= oth => lasing_branch_variance(params, pump, omega),
        Regime::OrthExcited => Err(SpectraError::WrongRegime { found: regime, expected: Regime::LaserOnly }),
    };
    PumpSweepPoint { pump: rate, normalized, regime, variance }
}

/// Options of the coupled phase-quadrature engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PhasePairOptions {
    /// Feed the laser pump noise `√G δY_p` into the parallel phase row.
    pub include_pump_noise: bool,
    /// Use `−2μ⟨a∥⟩⟨a⊥⟩` for the δY⊥ coupling in the parallel row instead of
    /// `+2μ⟨a∥⟩⟨a⊥⟩`. The positive sign is the one that keeps the common
    /// phase rotation a zero mode of the drift matrix.
    pub printed_cross_sign: bool,
}

/// Output phase-quadrature variances of both fundamental modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePairSpectrum {
    pub omega: f64,
    pub v_orth: f64,
    pub v_par: f64,
    pub options: PhasePairOptions,
}

const CHANNELS: [NoiseChannel; 6] = [
    NoiseChannel::ShVacuumIn,
    NoiseChannel::PassiveLossIn(Mode::Parallel),
    NoiseChannel::OutputCouplerIn(Mode::Parallel),
    NoiseChannel::PassiveLossIn(Mode::Orthogonal),
    NoiseChannel::OutputCouplerIn(Mode::Orthogonal),
    NoiseChannel::PumpIn,
];

fn channel_index(ch: NoiseChannel) -> usize {
    CHANNELS.iter().position(|c| *c == ch).expect("channel is listed")
}

/// Phase-quadrature spectra in regime iii, where both modes are bright and
/// the second-harmonic vacuum couples them.
pub fn regime3_phase_pair_spectrum(
    params: &ModelParams,
    pump: Pump,
    omega: f64,
    opts: PhasePairOptions,
) -> Result<PhasePairSpectrum, SpectraError> {
    let ss = steadystate::steady_state(params, pump)?;
    if ss.regime != Regime::OrthExcited {
        return Err(SpectraError::WrongRegime { found: ss.regime, expected: Regime::OrthExcited });
    }
    phase_pair_spectrum_at(params, ss.a_par(), ss.a_orth(), omega, opts)
}

/// Coupled phase-quadrature engine at arbitrary mean amplitudes. Solves
/// `(iω − A)δỸ = B δZ̃` and applies the output-coupler relation
/// `δYᵒᵘᵗ = √(2γᶜ)δY − δYⁱⁿ²` for each mode, keeping the correlation
/// between the intracavity field and the reflected input.
pub fn phase_pair_spectrum_at(
    params: &ModelParams,
    a_par: f64,
    a_orth: f64,
    omega: f64,
    opts: PhasePairOptions,
) -> Result<PhasePairSpectrum, SpectraError> {
    let mu = params.nl_coupling();
    let go = params.total_decay(Mode::Orthogonal);
    let (ip, io) = (a_par * a_par, a_orth * a_orth);
    let cross = 2.0 * mu * a_par * a_orth;
    let cross_sign = if opts.printed_cross_sign { -1.0 } else { 1.0 };

    let drift = Matrix2::new(-2.0 * mu * io, cross_sign * cross, cross, -go - mu * (ip - io) - 2.0 * mu * io);

    let mut inputs = SMatrix::<f64, 2, 6>::zeros();
    let sqrt2 = |rate: f64| (2.0 * rate).sqrt();
    inputs[(0, channel_index(NoiseChannel::ShVacuumIn))] = 2.0 * mu.sqrt() * a_par;
    inputs[(1, channel_index(NoiseChannel::ShVacuumIn))] = -2.0 * mu.sqrt() * a_orth;
    for (row, mode) in [(0, Mode::Parallel), (1, Mode::Orthogonal)] {
        inputs[(row, channel_index(NoiseChannel::PassiveLossIn(mode)))] = sqrt2(params.loss_decay(mode));
        inputs[(row, channel_index(NoiseChannel::OutputCouplerIn(mode)))] = sqrt2(params.coupler_decay(mode));
    }
    if opts.include_pump_noise {
        inputs[(0, channel_index(NoiseChannel::PumpIn))] = params.stim_rate().sqrt();
    }

    let i = Complex64::i();
    let m = drift.map(|x| Complex64::new(-x, 0.0)) + Matrix2::from_diagonal_element(i * omega);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if det.norm() <= 1e-14 * scale * scale {
        return Err(SpectraError::SingularMatrix { omega });
    }
    let inv = Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det;
    let response = inv * inputs.map(|x| Complex64::new(x, 0.0));

    let output_variance = |row: usize, mode: Mode| {
        let coupler = sqrt2(params.coupler_decay(mode));
        let reflected = channel_index(NoiseChannel::OutputCouplerIn(mode));
        (0..CHANNELS.len())
            .map(|k| {
                let mut c = response[(row, k)] * coupler;
                if k == reflected {
                    c -= 1.0;
                }
                c.norm_sqr()
            })
            .sum::<f64>()
    };
    Ok(PhasePairSpectrum {
        omega,
        v_orth: output_variance(1, Mode::Orthogonal),
        v_par: output_variance(0, Mode::Parallel),
        options: opts,
    })
}
