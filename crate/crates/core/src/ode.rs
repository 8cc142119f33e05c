//! Embedded Dormand–Prince 5(4) integrator for small fixed-size systems.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t:e}")]
    NonFinite { t: f64 },
    #[error("step budget of {budget} exhausted at t = {t:e}")]
    TooManySteps { t: f64, budget: usize },
    #[error("invalid integration request: {0}")]
    InvalidInput(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Options {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on any single step.
    pub max_step: f64,
    /// Accepted + rejected steps allowed before giving up.
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self { rel_tol: 1e-8, abs_tol: 1e-12, max_step: f64::INFINITY, max_steps: 20_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

fn error_norm<const N: usize>(y: &[f64; N], y_new: &[f64; N], err: &[f64; N], opts: &Dopri5Options) -> f64 {
    let mut sum = 0.0;
    for i in 0..N {
        let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
        let r = err[i] / sc;
        sum += r * r;
    }
    (sum / N as f64).sqrt()
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, calling `observer` after
/// every accepted step (and once at `t0`). Returns the final state.
pub fn dopri5<const N: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &Dopri5Options,
    mut observer: O,
) -> Result<([f64; N], StepStats), OdeError>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]),
{
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(OdeError::InvalidInput("need finite t_end > t0"));
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(OdeError::InvalidInput("tolerances must be > 0"));
    }
    if !(opts.max_step > 0.0) {
        return Err(OdeError::InvalidInput("max_step must be > 0"));
    }
    let span = t_end - t0;
    // The cap alone already implies more steps than allowed.
    if span / opts.max_step > opts.max_steps as f64 {
        return Err(OdeError::TooManySteps { t: t0, budget: opts.max_steps });
    }

    let mut stats = StepStats::default();
    let mut t = t0;
    let mut y = y0;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(OdeError::NonFinite { t });
    }
    observer(t, &y);
    let mut k1 = f(t, &y);
    stats.evaluations += 1;

    let mut h = initial_step(&mut f, t, &y, &k1, opts, &mut stats).min(opts.max_step).min(span);
    let h_min = 1e-16 * span.abs().max(t_end.abs());
    let mut last_rejected = false;

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps { t, budget: opts.max_steps });
        }
        if h < h_min {
            return Err(OdeError::StepUnderflow { t, h });
        }
        let final_step = t + h >= t_end;
        if final_step {
            h = t_end - t;
        }

        let k2 = f(t + C2 * h, &combine(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &combine(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * h, &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + h, &combine(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = combine(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new);
        stats.evaluations += 6;

        let mut err = [0.0; N];
        for i in 0..N {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&y, &y_new, &err, opts);
        if !en.is_finite() {
            if y_new.iter().any(|v| !v.is_finite()) && h <= h_min * 2.0 {
                return Err(OdeError::NonFinite { t });
            }
            stats.rejected += 1;
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        if en <= 1.0 {
            t = if final_step { t_end } else { t + h };
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            observer(t, &y);
            let mut factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            if last_rejected {
                factor = factor.min(1.0);
            }
            last_rejected = false;
            h = (h * factor).min(opts.max_step);
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h *= (0.9 * en.powf(-0.2)).max(0.2);
        }
    }
    Ok((y, stats))
}

/// Starting step from the local derivative scale.
fn initial_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    opts: &Dopri5Options,
    stats: &mut StepStats,
) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let scale = |i: usize| opts.abs_tol + opts.rel_tol * y[i].abs();
    let norm =
        |v: &[f64; N]| (v.iter().enumerate().map(|(i, x)| (x / scale(i)).powi(2)).sum::<f64>() / N as f64).sqrt();
    let d0 = norm(y);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(opts.max_step);
    let y1 = combine(y, h0, &[(1.0, f0)]);
    let f1 = f(t + h0, &y1);
    stats.evaluations += 1;
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_hits_tolerance() {
        let opts = Dopri5Options { rel_tol: 1e-10, abs_tol: 1e-14, ..Default::default() };
        let (y, stats) = dopri5(|_, y: &[f64; 1]| [-2.0 * y[0]], 0.0, [1.0], 3.0, &opts, |_, _| {}).unwrap();
        assert!((y[0] - (-6.0f64).exp()).abs() < 1e-11);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let opts = Dopri5Options { rel_tol: 1e-11, abs_tol: 1e-13, ..Default::default() };
        let (y, _) =
            dopri5(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 10.0 * std::f64::consts::PI, &opts, |_, _| {})
                .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8);
    }

    #[test]
    fn observer_times_are_strictly_increasing_and_end_exactly() {
        let mut ts = Vec::new();
        dopri5(
            |_, y: &[f64; 1]| [-y[0]],
            0.0,
            [1.0],
            1.0,
            &Dopri5Options { max_step: 0.05, ..Default::default() },
            |t, _| ts.push(t),
        )
        .unwrap();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*ts.last().unwrap(), 1.0);
        assert!(ts.len() >= 21);
    }

    #[test]
    fn step_cap_is_enforced_against_budget() {
        let err = dopri5(
            |_, y: &[f64; 1]| [-y[0]],
            0.0,
            [1.0],
            1.0,
            &Dopri5Options { max_step: 1e-9, max_steps: 1000, ..Default::default() },
            |_, _| {},
        )
        .unwrap_err();
        assert!(matches!(err, OdeError::TooManySteps { .. }));
    }

    #[test]
    fn blow_up_is_reported() {
        let err =
            dopri5(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], 2.0, &Dopri5Options::default(), |_, _| {}).unwrap_err();
        assert!(matches!(
            err,
            OdeError::StepUnderflow { .. } | OdeError::NonFinite { .. } | OdeError::TooManySteps { .. }
        ));
    }
}
