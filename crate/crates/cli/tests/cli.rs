use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_squeezer-sim")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn report_value(stdout: &[u8], key: &str) -> f64 {
    let text = String::from_utf8_lossy(stdout);
    let prefix = format!("{key} = ");
    text.lines().find_map(|l| l.strip_prefix(prefix.as_str())).unwrap().parse().unwrap()
}

#[test]
fn thresholds_report_reference_values() {
    let out = sim(&["thresholds"]);
    assert_eq!(code(&out), 0);
    assert!((report_value(&out.stdout, "orth_threshold_intensity") - 1.96875e10).abs() < 1.0);
    assert!((report_value(&out.stdout, "threshold_variance_db") + 7.4866).abs() < 1e-4);
}

#[test]
fn invalid_parameters_exit_with_input_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.toml", "nl_coupling_mu = 0.0\n");
    let out = sim(&["thresholds", "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nl_coupling_mu"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "typo.toml", "gamma_orth = 1.0\n");
    assert_eq!(code(&sim(&["spectrum", "--config", &cfg])), 1);
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(code(&sim(&["no-such-command"])), 1);
    assert_eq!(code(&sim(&["--help"])), 0);
}

#[test]
fn lossless_coupler_gives_no_squeezing() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "dark.toml", "gamma_orth_c = 0.0\n");
    let out = sim(&["thresholds", "--config", &cfg]);
    assert_eq!(code(&out), 0);
    assert_eq!(report_value(&out.stdout, "threshold_variance"), 1.0);
}

#[test]
fn check_runs_without_a_lasing_regime() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "k.toml", "decay_k2 = 1.0\ndecay_k3 = 5.0\n");
    let out = sim(&["check", "--config", &cfg]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{text}");
    assert!(text.contains("SKIP route_equivalence"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn check_passes_on_reference_rates() {
    let out = sim(&["check"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 8);
}

#[test]
fn csv_header_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "s.toml", "omega_steps = 41\nomega_log = false\ni_par = 1e10\n");
    let (a, b) = (path(&dir, "a.csv"), path(&dir, "b.csv"));
    assert_eq!(code(&sim(&["spectrum", "--config", &cfg, "--out", &a])), 0);
    assert_eq!(code(&sim(&["spectrum", "--config", &a, "--out", &b])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn mc_rerun_from_header_is_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "mc.toml", "mc_segments = 64\n");
    let (a, b) = (path(&dir, "a.csv"), path(&dir, "b.csv"));
    assert_eq!(code(&sim(&["mc-verify", "--config", &cfg, "--seed", "9", "--out", &a])), 0);
    assert_eq!(code(&sim(&["mc-verify", "--config", &a, "--out", &b])), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn negative_control_exits_with_statistical_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "neg.toml", "mc_negative_control = true\n");
    let out = sim(&["mc-verify", "--config", &cfg, "--seed", "2", "--out", &path(&dir, "neg.csv")]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn plots_are_written_next_to_the_output() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "sweep.csv");
    assert_eq!(code(&sim(&["pump-sweep", "--out", &out, "--plot"])), 0);
    let svgs: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert!(!svgs.is_empty());
    for e in svgs {
        assert!(std::fs::read_to_string(e.path()).unwrap().starts_with("<svg"));
    }
}

#[test]
fn plot_without_output_path_is_an_input_error() {
    assert_eq!(code(&sim(&["spectrum", "--plot"])), 1);
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "one.csv"), path(&dir, "many.csv"));
    for (threads, out) in [("1", &a), ("4", &b)] {
        let status = Command::new(env!("CARGO_BIN_EXE_squeezer-sim"))
            .args(["steady-sweep", "--out", out])
            .env("SQUEEZER_SIM_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let bad = Command::new(env!("CARGO_BIN_EXE_squeezer-sim"))
        .arg("thresholds")
        .env("SQUEEZER_SIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 1);
}

fn data_rows(file: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(file)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn steady_sweep_rows_are_ordered_by_regime() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("steady.csv");
    assert_eq!(code(&sim(&["steady-sweep", "--out", &out.to_string_lossy()])), 0);
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 301);
    let regimes: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    let first_ii = regimes.iter().position(|&r| r == "ii").unwrap();
    let first_iii = regimes.iter().position(|&r| r == "iii").unwrap();
    assert!(regimes[..first_ii].iter().all(|&r| r == "i"));
    assert!(regimes[first_ii..first_iii].iter().all(|&r| r == "ii"));
    assert!(regimes[first_iii..].iter().all(|&r| r == "iii"));
    for row in &rows {
        assert_eq!(row[8], "ok");
        let s: f64 = row[4..7].iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-8);
    }
}
