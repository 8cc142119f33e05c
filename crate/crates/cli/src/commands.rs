use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use squeezer_core::montecarlo::{self, MonteCarloError};
use squeezer_core::params::{Mode, ModelParams, Pump};
use squeezer_core::spectra::{self, PumpAxis, SpectraError};
use squeezer_core::steadystate::{self, Regime, SteadyStateError};

use crate::config::{ConfigFile, Grid, Snapshot};
use crate::plot::{Plot, Series};
use crate::{sci, CliError, Sink};

/// Default analysis frequency, 2 MHz in rad/s.
pub const DEFAULT_OMEGA: f64 = 4.0 * PI * 1e6;
/// Segment length of the default Monte Carlo run.
pub const MC_SEGMENT_LEN: usize = 16384;
pub const MC_DEFAULT_SEGMENTS: usize = 1024;
pub const MC_DEFAULT_SEED: u64 = 1;

const PUMP_KEYS: [&str; 4] = ["pump_min", "pump_max", "pump_steps", "pump_log"];
const OMEGA_KEYS: [&str; 4] = ["omega_min", "omega_max", "omega_steps", "omega_log"];

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

fn analysis_omega(cfg: &ConfigFile) -> Result<f64, CliError> {
    let w = cfg.omega.unwrap_or(DEFAULT_OMEGA);
    if !(w.is_finite() && w >= 0.0) {
        return Err(CliError::Input(format!("omega = {w} must be finite and >= 0")));
    }
    Ok(w)
}

struct Thresholds {
    laser: f64,
    orth: f64,
}

fn thresholds_of(params: &ModelParams) -> Result<Thresholds, CliError> {
    let laser = steadystate::laser_threshold(params).map_err(numerical)?.rate();
    let orth = steadystate::orth_threshold_pump(params).map_err(numerical)?.rate();
    Ok(Thresholds { laser, orth })
}

pub fn thresholds(cfg: &ConfigFile, sink: &mut Sink) -> Result<(), CliError> {
    let params = cfg.params()?;
    let omega = analysis_omega(cfg)?;
    let mut snap = Snapshot::with_params(&params);
    snap.float("omega", omega);

    let t = thresholds_of(&params)?;
    let intensity = steadystate::orth_threshold_intensity(&params);
    let variance = spectra::threshold_variance(&params, omega);
    let db = spectra::to_decibel(variance).map_err(numerical)?;

    let mut text = snap.header("thresholds");
    for (k, v) in [
        ("laser_threshold", t.laser),
        ("orth_threshold_pump", t.orth),
        ("orth_threshold_intensity", intensity),
        ("threshold_variance", variance),
        ("threshold_variance_db", db),
    ] {
        let _ = writeln!(text, "{k} = {}", sci(v));
    }
    sink.write(&text)?;
    if sink.has_file() {
        print!("{text}");
    }
    Ok(())
}

/// Pump grid in s⁻¹ together with the resolved grid settings. Missing
/// bounds take the command's default, which is defined on its default axis
/// (absolute or normalized to the orthogonal threshold pump).
fn pump_grid(
    cfg: &ConfigFile,
    params: &ModelParams,
    default_normalized: bool,
    default: impl FnOnce(&Thresholds) -> Grid,
) -> Result<(Vec<f64>, Grid, bool), CliError> {
    let normalized = cfg.pump_normalized.unwrap_or(default_normalized);
    let bounds_given = cfg.pump_min.is_some() && cfg.pump_max.is_some();
    let t = if normalized || !bounds_given { Some(thresholds_of(params)?) } else { None };
    let base = match &t {
        Some(t) if normalized == default_normalized => Some(default(t)),
        _ => None,
    };
    let (Some(min), Some(max)) = (cfg.pump_min.or(base.map(|b| b.min)), cfg.pump_max.or(base.map(|b| b.max))) else {
        return Err(CliError::Input(
            "pump_min and pump_max are required when pump_normalized differs from the command default".into(),
        ));
    };
    let grid = Grid {
        min,
        max,
        steps: cfg.pump_steps.or(base.map(|b| b.steps)).unwrap_or(201),
        log: cfg.pump_log.or(base.map(|b| b.log)).unwrap_or(false),
    };
    grid.validate("pump")?;
    let scale = match (&t, normalized) {
        (Some(t), true) => t.orth,
        _ => 1.0,
    };
    Ok((grid.values().into_iter().map(|x| x * scale).collect(), grid, normalized))
}

struct SteadyRow {
    pump: f64,
    result: Result<(steadystate::SteadyState, f64), SteadyStateError>,
}

pub fn steady_sweep(cfg: &ConfigFile, sink: &mut Sink) -> Result<(), CliError> {
    let params = cfg.params()?;
    let (pumps, grid, normalized) =
        pump_grid(cfg, &params, false, |t| Grid { min: 0.1 * t.laser, max: 10.0 * t.orth, steps: 301, log: true })?;
    let mut snap = Snapshot::with_params(&params);
    snap.grid(PUMP_KEYS, &grid).flag("pump_normalized", normalized).flag("emit_plot", sink.plots_enabled());

    let rows: Vec<SteadyRow> = pumps
        .par_iter()
        .map(|&g| SteadyRow {
            pump: g,
            result: Pump::new(g)
                .map_err(|e| SteadyStateError::Unreachable(if e.0 < 0.0 { "negative pump" } else { "non-finite pump" }))
                .and_then(|p| steadystate::steady_state(&params, p))
                .map(|ss| (ss, steadystate::sh_power(&params, &ss))),
        })
        .collect();

    let mut text = snap.header("steady-sweep");
    text.push_str("Gamma,regime,a_par,a_orth,sigma1,sigma2,sigma3,sh_power,status\n");
    let mut failures = 0;
    for row in &rows {
        match &row.result {
            Ok((ss, sh)) => {
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{},{},{},ok",
                    sci(row.pump),
                    ss.regime.label(),
                    sci(ss.a_par()),
                    sci(ss.a_orth()),
                    sci(ss.sigma1),
                    sci(ss.sigma2),
                    sci(ss.sigma3),
                    sci(*sh)
                );
            }
            Err(e) => {
                failures += 1;
                let _ =
                    writeln!(text, "{},,NaN,NaN,NaN,NaN,NaN,NaN,{}", sci(row.pump), e.to_string().replace(',', ";"));
            }
        }
    }
    sink.write(&text)?;

    if sink.plots_enabled() {
        let xs: Vec<f64> = rows.iter().map(|r| r.pump).collect();
        let column = |f: fn(&steadystate::SteadyState, f64) -> f64| -> Vec<f64> {
            rows.iter().map(|r| r.result.as_ref().map(|(ss, sh)| f(ss, *sh)).unwrap_or(f64::NAN)).collect()
        };
        for (suffix, label, ys) in [
            ("a_par", "parallel amplitude", column(|ss, _| ss.a_par())),
            ("a_orth", "orthogonal amplitude", column(|ss, _| ss.a_orth())),
            ("sh_power", "second-harmonic power", column(|_, sh| sh)),
        ] {
            let plot = Plot {
                title: label,
                x_label: "pump rate (1/s)",
                y_label: label,
                log_x: grid.log,
                series: vec![Series { label, xs: &xs, ys: &ys, markers: false }],
            };
            sink.write_plot(suffix, &plot.to_svg())?;
        }
    }
    if failures > 0 {
        return Err(CliError::Numerical(format!("{failures} of {} rows did not resolve", rows.len())));
    }
    Ok(())
}

pub fn pump_sweep(cfg: &ConfigFile, sink: &mut Sink) -> Result<(), CliError> {
    let params = cfg.params()?;
    let omega = analysis_omega(cfg)?;
    let (pumps, grid, normalized) =
        pump_grid(cfg, &params, true, |t| Grid { min: t.laser / t.orth, max: 1.0, steps: 101, log: false })?;
    let mut snap = Snapshot::with_params(&params);
    snap.float("omega", omega)
        .grid(PUMP_KEYS, &grid)
        .flag("pump_normalized", normalized)
        .flag("emit_plot", sink.plots_enabled());

    let oth = steadystate::orth_threshold_pump(&params).map_err(numerical)?.rate();
    let points: Vec<_> = pumps
        .par_chunks(16)
        .map(|chunk| spectra::pump_sweep_curve(&params, chunk, PumpAxis::Absolute, omega).map(|s| s.points))
        .collect::<Result<Vec<_>, SpectraError>>()
        .map_err(numerical)?
        .into_iter()
        .flatten()
        .collect();

    let mut text = snap.header("pump-sweep");
    text.push_str("Gamma,Gamma_normalized,variance,variance_db,status\n");
    let mut failures = 0;
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for pt in &points {
        let normalized = pt.pump / oth;
        match pt
            .variance
            .as_ref()
            .map_err(|e| e.to_string())
            .and_then(|&v| spectra::to_decibel(v).map(|db| (v, db)).map_err(|e| e.to_string()))
        {
            Ok((v, db)) => {
                let _ = writeln!(text, "{},{},{},{},ok", sci(pt.pump), sci(normalized), sci(v), sci(db));
                xs.push(normalized);
                ys.push(db);
            }
            Err(e) => {
                failures += 1;
                let _ = writeln!(text, "{},{},NaN,NaN,{}", sci(pt.pump), sci(normalized), e.replace(',', ";"));
            }
        }
    }
    sink.write(&text)?;
    if sink.plots_enabled() {
        let plot = Plot {
            title: "orthogonal phase noise versus pump",
            x_label: "pump / orthogonal threshold pump",
            y_label: "variance (dB)",
            log_x: false,
            series: vec![Series { label: "variance (dB)", xs: &xs, ys: &ys, markers: false }],
        };
        sink.write_plot("", &plot.to_svg())?;
    }
    if failures > 0 {
        return Err(CliError::Numerical(format!(
            "{failures} of {} points lie outside the orthogonal-dark regime",
            points.len()
        )));
    }
    Ok(())
}

/// Lasing intensity from `i_par`, or from `pump` on the orthogonal-dark
/// branch, or the orthogonal threshold intensity when neither is given.
fn operating_intensity(cfg: &ConfigFile, params: &ModelParams, snap: &mut Snapshot) -> Result<f64, CliError> {
    let limit = steadystate::orth_threshold_intensity(params);
    match (cfg.i_par, cfg.pump) {
        (Some(_), Some(_)) => Err(CliError::Input("give either i_par or pump, not both".into())),
        (Some(i), None) => {
            if !(0.0..=limit).contains(&i) {
                return Err(CliError::Input(format!("i_par = {i:e} outside [0, {limit:e}]")));
            }
            snap.float("i_par", i);
            Ok(i)
        }
        (None, Some(g)) => {
            let pump = Pump::new(g).map_err(|e| CliError::Input(e.to_string()))?;
            snap.float("pump", g);
            match steadystate::classify_regime(params, pump) {
                Regime::BelowLaser => Ok(0.0),
                Regime::LaserOnly => Ok(steadystate::laser_only_branch(params, pump).map_err(numerical)?.i_par),
                Regime::OrthExcited => {
                    let oth = steadystate::orth_threshold_pump(params).map_err(numerical)?.rate();
                    if g <= oth {
                        Ok(steadystate::laser_only_branch(params, pump).map_err(numerical)?.i_par)
                    } else {
                        Err(numerical(SpectraError::WrongRegime {
                            found: Regime::OrthExcited,
                            expected: Regime::LaserOnly,
                        }))
                    }
                }
            }
        }
        (None, None) => {
            snap.float("i_par", limit);
            Ok(limit)
        }
    }
}

pub fn spectrum(cfg: &ConfigFile, sink: &mut Sink) -> Result<(), CliError> {
    let params = cfg.params()?;
    let omega = analysis_omega(cfg)?;
    let go = params.total_decay(Mode::Orthogonal);
    let grid = Grid {
        min: cfg.omega_min.unwrap_or(0.0),
        max: cfg.omega_max.unwrap_or(100.0 * go),
        steps: cfg.omega_steps.unwrap_or(1001),
        log: cfg.omega_log.unwrap_or(false),
    };
    grid.validate("omega")?;
    let mut omegas = grid.values();
    // The analysis frequency is always one of the rows.
    if omega >= grid.min && omega <= grid.max {
        if let Err(pos) = omegas.binary_search_by(|w| w.total_cmp(&omega)) {
            omegas.insert(pos, omega);
        }
    }

    let mut snap = Snapshot::with_params(&params);
    snap.float("omega", omega).grid(OMEGA_KEYS, &grid);
    let i_par = operating_intensity(cfg, &params, &mut snap)?;
    snap.flag("emit_plot", sink.plots_enabled());

    let curve = spectra::frequency_sweep_curve(&params, i_par, &omegas).map_err(|e| match e {
        SpectraError::InvalidGrid(_) | SpectraError::DomainError(_) => CliError::Input(e.to_string()),
        other => numerical(other),
    })?;
    let mut text = snap.header("spectrum");
    text.push_str("omega_rad_s,variance,variance_db\n");
    let mut dbs = Vec::with_capacity(curve.points.len());
    for p in &curve.points {
        let db = spectra::to_decibel(p.variance).map_err(numerical)?;
        dbs.push(db);
        let _ = writeln!(text, "{},{},{}", sci(p.omega), sci(p.variance), sci(db));
    }
    sink.write(&text)?;
    if sink.plots_enabled() {
        let xs: Vec<f64> = curve.points.iter().map(|p| p.omega).collect();
        let plot = Plot {
            title: "orthogonal phase-quadrature spectrum",
            x_label: "analysis frequency (rad/s)",
            y_label: "variance (dB)",
            log_x: grid.log,
            series: vec![Series { label: "variance (dB)", xs: &xs, ys: &dbs, markers: false }],
        };
        sink.write_plot("", &plot.to_svg())?;
    }
    Ok(())
}

fn mc_error(e: MonteCarloError) -> CliError {
    CliError::Input(e.to_string())
}

pub fn mc_verify(cfg: &ConfigFile, seed_flag: Option<u64>, sink: &mut Sink) -> Result<(), CliError> {
    let params = cfg.params()?;
    let omega = analysis_omega(cfg)?;
    let go = params.total_decay(Mode::Orthogonal);
    let mut snap = Snapshot::with_params(&params);
    snap.float("omega", omega);
    let i_par = operating_intensity(cfg, &params, &mut snap)?;
    let relaxation = go + params.nl_coupling() * i_par;

    let seed = seed_flag.or(cfg.seed).unwrap_or(MC_DEFAULT_SEED);
    let segments = cfg.mc_segments.unwrap_or(MC_DEFAULT_SEGMENTS);
    let dt = match cfg.mc_dt {
        Some(dt) => dt,
        None => montecarlo::aligned_dt(omega, MC_SEGMENT_LEN, 0.01 / relaxation).unwrap_or(0.01 / relaxation),
    };
    let duration = match cfg.mc_duration {
        Some(d) => d,
        None => {
            let transient = (10.0 / relaxation / dt).ceil();
            (transient + ((segments + 1) * MC_SEGMENT_LEN / 2) as f64 + 2.0) * dt
        }
    };
    let negative_control = cfg.mc_negative_control.unwrap_or(false);
    snap.int("seed", seed)
        .float("mc_dt", dt)
        .float("mc_duration", duration)
        .int("mc_segments", segments as u64)
        .flag("mc_negative_control", negative_control)
        .flag("emit_plot", sink.plots_enabled());

    let run = montecarlo::simulate_decoupled(&params, i_par, seed, dt, duration).map_err(mc_error)?;
    let estimate = montecarlo::estimate_psd(&run, segments).map_err(mc_error)?;
    let reference = if negative_control {
        params.with(|r| r.gamma_orth_c *= 0.8).map_err(|e| CliError::Input(e.to_string()))?
    } else {
        params
    };
    let band = (0.1 * go, 10.0 * go);
    let cmp = montecarlo::compare_to_analytic(&estimate, &reference, i_par, band).map_err(mc_error)?;

    let mut text = snap.header("mc-verify");
    text.push_str("omega_rad_s,psd,analytic,deviation_sigma\n");
    for b in &cmp.bins {
        let _ = writeln!(text, "{},{},{},{}", sci(b.omega), sci(b.psd), sci(b.analytic), sci(b.deviation_sigma));
    }
    sink.write(&text)?;
    if sink.plots_enabled() {
        let xs: Vec<f64> = cmp.bins.iter().map(|b| b.omega).collect();
        let psd: Vec<f64> = cmp.bins.iter().map(|b| b.psd).collect();
        let analytic: Vec<f64> = cmp.bins.iter().map(|b| b.analytic).collect();
        let plot = Plot {
            title: "Monte Carlo output spectrum",
            x_label: "analysis frequency (rad/s)",
            y_label: "variance (QNL = 1)",
            log_x: true,
            series: vec![
                Series { label: "analytic", xs: &xs, ys: &analytic, markers: false },
                Series { label: "Monte Carlo", xs: &xs, ys: &psd, markers: true },
            ],
        };
        sink.write_plot("", &plot.to_svg())?;
    }
    let verdict = if cmp.pass { "PASS" } else { "FAIL" };
    let summary = format!(
        "mc-verify: {} segments of {} samples, {} bins in [{}, {}] rad/s, max |deviation| = {:.3} sigma (limit {}): {verdict}",
        estimate.n_segments,
        estimate.segment_len,
        cmp.bins.len(),
        sci(band.0),
        sci(band.1),
        cmp.max_sigma_deviation,
        montecarlo::PASS_SIGMA
    );
    if cmp.pass {
        eprintln!("{summary}");
        Ok(())
    } else {
        Err(CliError::Statistical(summary))
    }
}
