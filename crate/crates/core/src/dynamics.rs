//! Time integration of the semiclassical equations of motion, used as a
//! brute-force oracle for the closed-form steady states, plus the analytic
//! Jacobian and local stability.
//!
//! Amplitudes are real. The global optical phase is a neutral direction of
//! the full complex model and adds nothing to the fixed-point problem.

use std::io::{self, Write};

use nalgebra::{DMatrix, SMatrix};
use num_complex::Complex64;
use thiserror::Error;

use crate::ode::{self, Dopri5Options, OdeError, StepStats};
use crate::params::{Mode, ModelParams, Pump};
use crate::steadystate::{self, Regime, SteadyState, SteadyStateError};

pub type Jacobian = SMatrix<f64, 5, 5>;

/// Point in the five-dimensional semiclassical phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVector {
    pub a_par: f64,
    pub a_orth: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
}

impl StateVector {
    /// All atoms in the ground level, both fields dark.
    pub fn ground() -> Self {
        Self { sigma1: 1.0, ..Default::default() }
    }

    /// Ground state with both field amplitudes set to `seed`.
    pub fn seeded(seed: f64) -> Self {
        Self { a_par: seed, a_orth: seed, ..Self::ground() }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.a_par, self.a_orth, self.sigma1, self.sigma2, self.sigma3]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self { a_par: v[0], a_orth: v[1], sigma1: v[2], sigma2: v[3], sigma3: v[4] }
    }

    pub fn population_sum(&self) -> f64 {
        self.sigma1 + self.sigma2 + self.sigma3
    }
}

struct Rates {
    g: f64,
    mu: f64,
    k2: f64,
    k3: f64,
    gp: f64,
    go: f64,
    pump: f64,
}

impl Rates {
    fn new(params: &ModelParams, pump: Pump) -> Self {
        Self {
            g: params.stim_rate(),
            mu: params.nl_coupling(),
            k2: params.decay_lower(),
            k3: params.decay_upper(),
            gp: params.total_decay(Mode::Parallel),
            go: params.total_decay(Mode::Orthogonal),
            pump: pump.rate(),
        }
    }

    /// Individual terms of each right-hand side, summed by `rhs`.
    fn terms(&self, x: &[f64; 5]) -> [[f64; 3]; 5] {
        let [ap, ao, s1, s2, s3] = *x;
        let ip = ap * ap;
        let diff = ip - ao * ao;
        let stim = self.g * (s3 - s2) * ip;
        [
            [0.5 * self.g * (s3 - s2) * ap, -self.gp * ap, -self.mu * ap * diff],
            [-self.go * ao, self.mu * ao * diff, 0.0],
            [self.k2 * s2, -self.pump * s1, 0.0],
            [stim, self.k3 * s3, -self.k2 * s2],
            [-stim, -self.k3 * s3, self.pump * s1],
        ]
    }

    fn rhs(&self, x: &[f64; 5]) -> [f64; 5] {
        self.terms(x).map(|t| t[0] + t[1] + t[2])
    }

    fn max_rate(&self) -> f64 {
        [self.g, self.k2, self.k3, self.gp, self.go, self.pump].into_iter().fold(0.0, f64::max)
    }
}

/// Right-hand sides of the five equations of motion.
pub fn derivatives(state: &StateVector, params: &ModelParams, pump: Pump) -> StateVector {
    StateVector::from_array(Rates::new(params, pump).rhs(&state.to_array()))
}

/// Largest ratio, over the five equations, of `|rate|` to the sum of the
/// magnitudes of its terms. Zero at an exact fixed point, of order machine
/// epsilon at a fixed point computed in floating point.
pub fn scaled_residual(state: &StateVector, params: &ModelParams, pump: Pump) -> f64 {
    let rates = Rates::new(params, pump);
    rates
        .terms(&state.to_array())
        .iter()
        .map(|t| {
            let scale: f64 = t.iter().map(|x| x.abs()).sum();
            if scale == 0.0 {
                0.0
            } else {
                (t[0] + t[1] + t[2]).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Analytic Jacobian of [`derivatives`], ordered
/// `(a_par, a_orth, sigma1, sigma2, sigma3)`.
pub fn jacobian(state: &StateVector, params: &ModelParams, pump: Pump) -> Jacobian {
    let r = Rates::new(params, pump);
    let [ap, ao, _s1, s2, s3] = state.to_array();
    let inv = s3 - s2;
    let ip = ap * ap;
    let io = ao * ao;
    Jacobian::from_row_slice(&[
        // a_par
        0.5 * r.g * inv - r.gp - 3.0 * r.mu * ip + r.mu * io,
        2.0 * r.mu * ap * ao,
        0.0,
        -0.5 * r.g * ap,
        0.5 * r.g * ap,
        // a_orth
        2.0 * r.mu * ao * ap,
        -r.go + r.mu * ip - 3.0 * r.mu * io,
        0.0,
        0.0,
        0.0,
        // sigma1
        0.0,
        0.0,
        -r.pump,
        r.k2,
        0.0,
        // sigma2
        2.0 * r.g * inv * ap,
        0.0,
        0.0,
        -r.g * ip - r.k2,
        r.g * ip + r.k3,
        // sigma3
        -2.0 * r.g * inv * ap,
        0.0,
        r.pump,
        r.g * ip,
        -r.g * ip - r.k3,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DynamicsError {
    #[error("step size underflow at t = {t:e}")]
    StepUnderflow { t: f64 },
    #[error("state became non-finite at t = {t:e}")]
    NonFinite { t: f64 },
    #[error("integration needs more than {budget} steps (stiffness cap 2/κ₂ = {max_step:e} s)")]
    TooManySteps { budget: usize, max_step: f64 },
    #[error("invalid request: {0}")]
    InvalidInput(&'static str),
    #[error("no convergence by t_max = {t_max:e} s (scaled rate residual {residual:e})")]
    NoConvergence { t_max: f64, residual: f64 },
    #[error(transparent)]
    SteadyState(#[from] SteadyStateError),
}

impl DynamicsError {
    fn from_ode(e: OdeError, max_step: f64) -> Self {
        match e {
            OdeError::StepUnderflow { t, .. } => Self::StepUnderflow { t },
            OdeError::NonFinite { t } => Self::NonFinite { t },
            OdeError::TooManySteps { budget, .. } => Self::TooManySteps { budget, max_step },
            OdeError::InvalidInput(m) => Self::InvalidInput(m),
        }
    }
}

/// Time series produced by [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn last(&self) -> &StateVector {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Writes `t, a_par, a_orth, sigma1, sigma2, sigma3` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,a_par,a_orth,sigma1,sigma2,sigma3")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(w, "{t:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}", s.a_par, s.a_orth, s.sigma1, s.sigma2, s.sigma3)?;
        }
        Ok(())
    }
}

/// Default step budget for [`integrate`] and [`settle`].
pub const DEFAULT_MAX_STEPS: usize = 5_000_000;

fn ode_options(params: &ModelParams, rel_tol: f64, abs_tol: f64, max_steps: usize) -> Dopri5Options {
    Dopri5Options {
        rel_tol,
        abs_tol,
        // Lower-level decay is usually the fastest rate in the system.
        max_step: 2.0 / params.decay_lower(),
        max_steps,
    }
}

/// Adaptive Dormand–Prince trajectory from `init` over `[0, t_end]`.
pub fn integrate(
    params: &ModelParams,
    pump: Pump,
    init: StateVector,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Trajectory, DynamicsError> {
    integrate_with_budget(params, pump, init, t_end, rel_tol, abs_tol, DEFAULT_MAX_STEPS)
}

pub fn integrate_with_budget(
    params: &ModelParams,
    pump: Pump,
    init: StateVector,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_steps: usize,
) -> Result<Trajectory, DynamicsError> {
    let rates = Rates::new(params, pump);
    let opts = ode_options(params, rel_tol, abs_tol, max_steps);
    let mut times = Vec::new();
    let mut states = Vec::new();
    let (_, stats) = ode::dopri5(
        |_, x| rates.rhs(x),
        0.0,
        init.to_array(),
        t_end,
        &opts,
        |t, x| {
            times.push(t);
            states.push(StateVector::from_array(*x));
        },
    )
    .map_err(|e| DynamicsError::from_ode(e, opts.max_step))?;
    Ok(Trajectory { times, states, stats })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleOptions {
    /// Initial amplitude of both fields. The dark orthogonal mode is a
    /// fixed subspace of the flow, so it must be seeded to be probed.
    pub seed_amplitude: f64,
    /// Overrides the default horizon.
    pub t_max: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Convergence threshold on the scaled rate residual.
    pub residual_tol: f64,
    pub max_steps: usize,
}

impl Default for SettleOptions {
    fn default() -> Self {
        Self {
            seed_amplitude: 1e-3,
            t_max: None,
            rel_tol: 1e-11,
            abs_tol: 1e-15,
            residual_tol: 1e-10,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// `100 / min(κ₃, γ∥, γ⊥, Γ', λ_slow)`: the pump is floored at the laser
/// threshold and `λ_slow` is the slowest decay rate of the linearization
/// around the stable fixed point, which vanishes at either threshold.
pub fn default_t_max(params: &ModelParams, pump: Pump) -> f64 {
    let mut slowest =
        params.decay_upper().min(params.total_decay(Mode::Parallel)).min(params.total_decay(Mode::Orthogonal));
    let floor = steadystate::laser_threshold(params).map(|p| p.rate()).unwrap_or(0.0);
    let g = pump.rate().max(floor);
    if g > 0.0 {
        slowest = slowest.min(g);
    }
    if let Ok(st) = stability(params, pump) {
        let critical =
            st.eigen_real_parts.iter().map(|re| re.abs()).filter(|&re| re > st.tolerance).fold(f64::INFINITY, f64::min);
        slowest = slowest.min(critical);
    }
    100.0 / slowest
}

/// Distance from a fixed point: each rate divided by the largest model
/// rate and by the natural scale of its component (√(γ⊥/μ) for
/// amplitudes, 1 for populations).
fn settle_residual(rates: &Rates, x: &[f64; 5]) -> f64 {
    let f = rates.rhs(x);
    let amp = (rates.go / rates.mu).sqrt();
    let scaled = [f[0].abs() / amp, f[1].abs() / amp, f[2].abs(), f[3].abs(), f[4].abs()];
    scaled.into_iter().fold(0.0, f64::max) / rates.max_rate()
}

/// Integrates from the seeded ground state until the flow comes to rest and
/// reads off the steady state.
pub fn settle(params: &ModelParams, pump: Pump, opts: &SettleOptions) -> Result<SteadyState, DynamicsError> {
    if !(opts.seed_amplitude > 0.0) {
        return Err(DynamicsError::InvalidInput("seed amplitude must be > 0"));
    }
    let rates = Rates::new(params, pump);
    let t_max = opts.t_max.unwrap_or_else(|| default_t_max(params, pump));
    let ode_opts = ode_options(params, opts.rel_tol, opts.abs_tol, opts.max_steps);
    if t_max / ode_opts.max_step > opts.max_steps as f64 {
        return Err(DynamicsError::TooManySteps { budget: opts.max_steps, max_step: ode_opts.max_step });
    }

    const CHUNKS: usize = 400;
    let chunk = t_max / CHUNKS as f64;
    let mut x = StateVector::seeded(opts.seed_amplitude).to_array();
    let mut t = 0.0;
    let mut residual = settle_residual(&rates, &x);
    let mut steps_left = opts.max_steps;
    for _ in 0..CHUNKS {
        let budget = Dopri5Options { max_steps: steps_left, ..ode_opts };
        let (y, stats) = ode::dopri5(|_, v| rates.rhs(v), t, x, t + chunk, &budget, |_, _| {})
            .map_err(|e| DynamicsError::from_ode(e, ode_opts.max_step))?;
        steps_left = steps_left.saturating_sub(stats.accepted + stats.rejected);
        x = y;
        t += chunk;
        residual = settle_residual(&rates, &x);
        if residual < opts.residual_tol {
            return Ok(read_off(params, x));
        }
    }
    Err(DynamicsError::NoConvergence { t_max, residual })
}

/// Intensities above `1e-12 γ⊥/μ` count as excited; fainter ones are
/// zeroed.
fn read_off(params: &ModelParams, x: [f64; 5]) -> SteadyState {
    let floor = 1e-12 * steadystate::orth_threshold_intensity(params);
    let [ap, ao, s1, s2, s3] = x;
    let mut i_par = ap * ap;
    let mut i_orth = ao * ao;
    let regime = if i_par <= floor {
        i_par = 0.0;
        i_orth = 0.0;
        Regime::BelowLaser
    } else if i_orth <= floor {
        i_orth = 0.0;
        Regime::LaserOnly
    } else {
        Regime::OrthExcited
    };
    SteadyState { sigma1: s1, sigma2: s2, sigma3: s3, i_par, i_orth, regime }
}

/// Linear stability of a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Stability {
    /// Eigenvalues of the Jacobian restricted to the conserved-population
    /// surface (σ₁ eliminated), sorted by decreasing real part. The fifth
    /// eigenvalue of the full Jacobian is exactly zero and belongs to the
    /// population-sum direction, which the flow never leaves.
    pub eigenvalues: Vec<Complex64>,
    pub eigen_real_parts: Vec<f64>,
    /// Tolerance applied to the real parts.
    pub tolerance: f64,
    pub stable: bool,
}

/// Stability of the steady state selected by [`steadystate::steady_state`].
pub fn stability(params: &ModelParams, pump: Pump) -> Result<Stability, DynamicsError> {
    let ss = steadystate::steady_state(params, pump)?;
    Ok(stability_at(&ss.state_vector(), params, pump))
}

/// Stability of an arbitrary fixed point, e.g. the lasing branch continued
/// past the orthogonal-mode threshold.
pub fn stability_at(state: &StateVector, params: &ModelParams, pump: Pump) -> Stability {
    let j = jacobian(state, params, pump);
    // Reduced coordinates (a_par, a_orth, sigma2, sigma3), sigma1 = 1 - sigma2 - sigma3.
    let keep = [0usize, 1, 3, 4];
    let reduced = DMatrix::from_fn(4, 4, |r, c| {
        let (row, col) = (keep[r], keep[c]);
        if col >= 3 {
            j[(row, col)] - j[(row, 2)]
        } else {
            j[(row, col)]
        }
    });

    let mut eigenvalues = Vec::with_capacity(4);
    if state.a_orth == 0.0 {
        // The orthogonal amplitude decouples exactly; keep its eigenvalue
        // free of rounding from the much larger population rates.
        eigenvalues.push(Complex64::new(reduced[(1, 1)], 0.0));
        let rest = [0usize, 2, 3];
        let block = DMatrix::from_fn(3, 3, |r, c| reduced[(rest[r], rest[c])]);
        eigenvalues.extend(balanced_eigenvalues(block));
    } else {
        eigenvalues.extend(balanced_eigenvalues(reduced));
    }
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re));
    let eigen_real_parts: Vec<f64> = eigenvalues.iter().map(|z| z.re).collect();
    let tolerance = 1e-9 * params.total_decay(Mode::Parallel).max(params.total_decay(Mode::Orthogonal));
    let stable = eigen_real_parts.iter().all(|&re| re < tolerance);
    Stability { eigenvalues, eigen_real_parts, tolerance, stable }
}

/// Eigenvalues after a diagonal similarity (powers of two) that equalizes
/// row and column norms; entries here span twenty orders of magnitude.
fn balanced_eigenvalues(mut m: DMatrix<f64>) -> Vec<Complex64> {
    let n = m.nrows();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for k in 0..n {
                if k != i {
                    c += m[(k, i)].abs();
                    r += m[(i, k)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let s = c + r;
            let (mut cc, mut rr) = (c, r);
            while cc < rr / 2.0 {
                cc *= 2.0;
                rr /= 2.0;
                f *= 2.0;
            }
            while cc >= rr * 2.0 {
                cc /= 2.0;
                rr *= 2.0;
                f /= 2.0;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                for k in 0..n {
                    m[(i, k)] /= f;
                    m[(k, i)] *= f;
                }
            }
        }
    }
    m.complex_eigenvalues().iter().copied().collect()
}
