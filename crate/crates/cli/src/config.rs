//! Flat key-value run configuration.
//!
//! A config is TOML with only top-level keys. Model parameters use the
//! field names of [`RawParams`]; any that are absent take the reference
//! value. Every CSV the tool writes starts with `# squeezer-sim <command>`
//! followed by `# key = value` lines holding the resolved settings, and such
//! a file is accepted as a config in its own right.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use squeezer_core::params::{ModelParams, RawParams};

use crate::CliError;

pub const HEADER_TAG: &str = "# squeezer-sim";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub stim_rate_g: Option<f64>,
    pub nl_coupling_mu: Option<f64>,
    pub decay_k2: Option<f64>,
    pub decay_k3: Option<f64>,
    pub gamma_par_c: Option<f64>,
    pub gamma_par_l: Option<f64>,
    pub gamma_orth_c: Option<f64>,
    pub gamma_orth_l: Option<f64>,

    pub pump_min: Option<f64>,
    pub pump_max: Option<f64>,
    pub pump_steps: Option<usize>,
    pub pump_log: Option<bool>,
    /// Pump grid bounds are in units of the orthogonal threshold pump.
    pub pump_normalized: Option<bool>,

    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub omega_steps: Option<usize>,
    pub omega_log: Option<bool>,

    /// Analysis frequency for single-frequency outputs, rad/s.
    pub omega: Option<f64>,
    pub i_par: Option<f64>,
    pub pump: Option<f64>,

    pub seed: Option<u64>,
    pub mc_dt: Option<f64>,
    pub mc_duration: Option<f64>,
    pub mc_segments: Option<usize>,
    /// Scale γ⊥ᶜ by 0.8 in the analytic reference of `mc-verify`.
    pub mc_negative_control: Option<bool>,

    pub emit_plot: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let body = if text.starts_with(HEADER_TAG) { header_body(text) } else { text.to_owned() };
        toml::from_str(&body).map_err(|e| e.to_string())
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let r = ModelParams::reference().raw();
        let raw = RawParams {
            stim_rate_g: self.stim_rate_g.unwrap_or(r.stim_rate_g),
            nl_coupling_mu: self.nl_coupling_mu.unwrap_or(r.nl_coupling_mu),
            decay_k2: self.decay_k2.unwrap_or(r.decay_k2),
            decay_k3: self.decay_k3.unwrap_or(r.decay_k3),
            gamma_par_c: self.gamma_par_c.unwrap_or(r.gamma_par_c),
            gamma_par_l: self.gamma_par_l.unwrap_or(r.gamma_par_l),
            gamma_orth_c: self.gamma_orth_c.unwrap_or(r.gamma_orth_c),
            gamma_orth_l: self.gamma_orth_l.unwrap_or(r.gamma_orth_l),
        };
        ModelParams::new(raw).map_err(|e| CliError::Input(e.to_string()))
    }
}

/// The `# key = value` lines after the command line, with `# ` removed.
fn header_body(text: &str) -> String {
    text.lines()
        .skip(1)
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.strip_prefix("# ").or_else(|| l.strip_prefix('#')).unwrap_or(l))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

/// A value range sampled at `steps` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub log: bool,
}

impl Grid {
    pub fn validate(&self, name: &str) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Input(format!("{name} grid: {m}")));
        if !(self.min.is_finite() && self.max.is_finite()) {
            return bad("bounds must be finite".into());
        }
        if self.steps == 0 {
            return bad(format!("{name}_steps must be >= 1"));
        }
        if self.steps == 1 && self.min != self.max {
            return bad(format!("{name}_steps = 1 needs {name}_min = {name}_max"));
        }
        if self.steps > 1 && !(self.min < self.max) {
            return bad(format!("{name}_min must be < {name}_max"));
        }
        if self.log && !(self.min > 0.0) {
            return bad(format!("{name}_log needs {name}_min > 0"));
        }
        if self.min < 0.0 {
            return bad(format!("{name}_min must be >= 0"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|k| {
                if k + 1 == self.steps {
                    return self.max;
                }
                let t = k as f64 / last;
                if self.log {
                    self.min * (self.max / self.min).powf(t)
                } else {
                    self.min + (self.max - self.min) * t
                }
            })
            .collect()
    }
}

/// Ordered `key = value` record of the settings that determine an output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    entries: Vec<(&'static str, String)>,
}

impl Snapshot {
    pub fn with_params(params: &ModelParams) -> Self {
        let mut s = Self::default();
        for (k, v) in params.raw().entries() {
            s.float(k, v);
        }
        s
    }

    pub fn float(&mut self, key: &'static str, v: f64) -> &mut Self {
        self.entries.push((key, format!("{v:e}")));
        self
    }

    pub fn int(&mut self, key: &'static str, v: u64) -> &mut Self {
        self.entries.push((key, v.to_string()));
        self
    }

    pub fn flag(&mut self, key: &'static str, v: bool) -> &mut Self {
        self.entries.push((key, v.to_string()));
        self
    }

    /// `keys` are the min, max, steps and log keys, in that order.
    pub fn grid(&mut self, keys: [&'static str; 4], g: &Grid) -> &mut Self {
        self.float(keys[0], g.min).float(keys[1], g.max).int(keys[2], g.steps as u64).flag(keys[3], g.log)
    }

    /// Comment block that [`ConfigFile::parse`] reads back.
    pub fn header(&self, command: &str) -> String {
        let mut out = format!("{HEADER_TAG} {command}\n");
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigFile::parse("mu = 1.0\n").is_err());
        assert!(ConfigFile::parse("nl_coupling_mu = 1.0 # comment\n").is_ok());
    }

    #[test]
    fn header_round_trips() {
        let p = ModelParams::reference();
        let mut s = Snapshot::with_params(&p);
        s.float("omega", 4e6 * std::f64::consts::PI).int("seed", 7).flag("emit_plot", false);
        let text = format!("{}omega_rad_s,variance\n1,2\n", s.header("spectrum"));
        let cfg = ConfigFile::parse(&text).unwrap();
        assert_eq!(cfg.params().unwrap(), p);
        assert_eq!(cfg.omega, Some(4e6 * std::f64::consts::PI));
        assert_eq!(cfg.seed, Some(7));
    }

    #[test]
    fn grids() {
        let g = Grid { min: 1.0, max: 100.0, steps: 3, log: true };
        let v = g.values();
        assert_eq!((v.len(), v[0], v[2]), (3, 1.0, 100.0));
        assert!((v[1] - 10.0).abs() < 4.0 * f64::EPSILON * 10.0);
        let g = Grid { min: 0.0, max: 1.0, steps: 5, log: false };
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(Grid { min: 0.0, max: 1.0, steps: 3, log: true }.validate("x").is_err());
        assert!(Grid { min: 2.0, max: 1.0, steps: 3, log: false }.validate("x").is_err());
        assert!(Grid { min: 1.0, max: 1.0, steps: 1, log: false }.validate("x").is_ok());
    }
}
