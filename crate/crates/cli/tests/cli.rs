//! End-to-end checks of the `ptcl` binary.

use std::path::Path;
use std::process::{Command, Output};

fn ptcl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ptcl"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn run_writes_artifacts_and_prognosis() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptcl(
        &["run", "--protocol", "lambda", "--cycles", "5", "--out", "run1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("slope/cycle"), "prognosis table printed: {stdout}");

    let run_dir = dir.path().join("run1");
    for f in ["means.csv", "fields.csv", "mass_cycles.csv", "mass_profile.csv",
              "summary.json", "manifest.json"] {
        assert!(run_dir.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&read(&run_dir.join("summary.json"))).unwrap();
    assert_eq!(summary["protocol"], "lambda");
    assert!(summary["slope_per_cycle"].as_f64().unwrap() > 0.0);
    assert!(summary["cycles_to_failure"].as_f64().unwrap() > 0.0);

    let manifest: serde_json::Value =
        serde_json::from_str(&read(&run_dir.join("manifest.json"))).unwrap();
    assert_eq!(manifest["params"]["T"].as_f64().unwrap(), 353.15);
    assert_eq!(manifest["solver"]["nx"].as_u64().unwrap(), 10);
}

#[test]
fn identical_runs_produce_byte_identical_data() {
    let dir = tempfile::tempdir().unwrap();
    for out_name in ["a", "b"] {
        let out = ptcl(
            &["run", "--protocol", "angle", "--cycles", "2", "--out", out_name],
            dir.path(),
        );
        assert!(out.status.success());
    }
    for f in ["means.csv", "fields.csv", "mass_cycles.csv", "mass_profile.csv"] {
        let a = read(&dir.path().join("a").join(f));
        let b = read(&dir.path().join("b").join(f));
        assert_eq!(a, b, "{f} differs between identical runs");
    }
}

#[test]
fn pi_with_coarse_step_warns_and_aborts_unstable() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptcl(
        &["run", "--protocol", "pi", "--dt", "1e-2", "--cycles", "2", "--out", "pi"],
        dir.path(),
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning"), "recommendation warning expected: {stderr}");
    assert!(stderr.contains("1.0e-4"), "should recommend the smaller step: {stderr}");
    // The coarse step is numerically unstable for the square wave.
    assert_eq!(out.status.code(), Some(3), "instability exit code, stderr: {stderr}");
    assert!(stderr.contains("smaller time step"));
}

#[test]
fn constant_protocol_stays_near_flat() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptcl(
        &["run", "--protocol", "constant", "--cycles", "10", "--out", "idle"],
        dir.path(),
    );
    assert!(out.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("idle").join("summary.json"))).unwrap();
    let final_mass = summary["final_mean_mass"].as_f64().unwrap();
    assert!(final_mass > 0.9999, "idle state loses almost nothing, got {final_mass}");
}

#[test]
fn run_ode_emits_trajectory_with_conserved_first_integral() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptcl(
        &["run", "--ode", "--protocol", "constant", "--cycles", "2", "--out", "ode"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir.path().join("ode").join("ode.csv"));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,c,d,theta,first_integral,V");
    let summary: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("ode").join("summary.json"))).unwrap();
    assert!(summary["first_integral_drift"].as_f64().unwrap() < 1e-6);
}

#[test]
fn config_file_overrides_and_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cool.toml"), "T = 323.15\n").unwrap();
    let out = ptcl(
        &["run", "--protocol", "constant", "--cycles", "1", "--config", "cool.toml",
          "--out", "cool"],
        dir.path(),
    );
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("cool").join("manifest.json"))).unwrap();
    assert_eq!(manifest["params"]["T"].as_f64().unwrap(), 323.15);

    std::fs::write(dir.path().join("bad.toml"), "beta1 = 1.5\n").unwrap();
    let out = ptcl(
        &["run", "--config", "bad.toml", "--out", "bad"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta1"));
}

#[test]
fn vmax_sweep_slopes_increase() {
    let dir = tempfile::tempdir().unwrap();
    // Short runs: the ordering is established within a few cycles.
    let out = ptcl(
        &["sweep", "--axis", "vmax", "--values", "0.9,0.95,1.0", "--cycles", "5",
          "--out", "sw"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir.path().join("sw").join("slopes.csv"));
    let slopes: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(slopes.len(), 3);
    assert!(slopes[0] < slopes[1] && slopes[1] < slopes[2], "{slopes:?}");
}

#[test]
fn empty_sweep_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptcl(&["sweep", "--axis", "vmax", "--values", ""], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn rate_sweep_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptcl(&["rate-sweep", "--out", "rates"], dir.path());
    assert!(out.status.success());
    let d = read(&dir.path().join("rates").join("rates_vs_d.csv"));
    assert!(d.starts_with("V,r_dissol_d_"));
    let t = read(&dir.path().join("rates").join("rates_vs_T.csv"));
    assert!(t.starts_with("V,r_dissol_T_"));
    assert_eq!(d.lines().count(), 62);
}

#[test]
fn figures_require_their_inputs_and_honor_only() {
    let dir = tempfile::tempdir().unwrap();
    // No data yet: naming the missing file.
    let out = ptcl(&["figures", "--data", "missing", "--only", "mass"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mass_cycles.csv"));

    let ok = ptcl(
        &["run", "--protocol", "constant", "--cycles", "1", "--out", "data"],
        dir.path(),
    );
    assert!(ok.status.success());
    let out = ptcl(&["figures", "--data", "data", "--only", "mass"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("data").join("mass.gp").exists());
    assert!(!dir.path().join("data").join("solution.gp").exists(), "--only filters");

    let out = ptcl(&["figures", "--data", "data", "--only", "mass,solution"], dir.path());
    assert!(out.status.success());
    assert!(dir.path().join("data").join("solution.gp").exists());
    let script = read(&dir.path().join("data").join("solution.gp"));
    assert!(script.contains("means.csv"));
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    // Shorter horizon keeps the hidden CI check quick.
    let out = ptcl(&["oracle-check", "--t-end", "4.0"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches("[ok]").count(), 4, "{stdout}");
}

#[test]
fn unknown_protocol_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptcl(&["run", "--protocol", "sawtooth"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn square_wave_is_the_most_damaging_ramp() {
    // Steepening the ramp at fixed V_max shortens the period, so per-cycle
    // slopes of the finite ramps are not directly comparable; the robust
    // statement is that the square wave (infinite slope) both loses the
    // most per cycle and has the shortest extrapolated lifetime.
    let dir = tempfile::tempdir().unwrap();
    let out = ptcl(
        &["sweep", "--axis", "alpha", "--values", "0.03,0.06,inf", "--cycles", "5",
          "--out", "sw"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir.path().join("sw").join("slopes.csv"));
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 3);
    let (slopes, hours): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    assert!(slopes[2] > slopes[0] && slopes[2] > slopes[1], "{slopes:?}");
    assert!(hours[2] < hours[0] && hours[2] < hours[1], "{hours:?}");
}

#[test]
fn temperature_axis_sweep_emits_rate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptcl(
        &["sweep", "--axis", "t", "--values", "323.15,343.15,363.15", "--out", "tsw"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir.path().join("tsw").join("rates_vs_T.csv"));
    assert!(text.starts_with("V,r_dissol_T_"));
    assert_eq!(text.lines().next().unwrap().split(',').count(), 7);
}

#[test]
fn single_value_sweep_degenerates_to_one_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = ptcl(
        &["sweep", "--axis", "vmax", "--values", "0.95", "--cycles", "5", "--out", "one"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir.path().join("one").join("slopes.csv"));
    assert_eq!(text.lines().count(), 2, "header plus exactly one row: {text}");

    // Same protocol through `run` gives the same fitted slope.
    let run = ptcl(
        &["run", "--protocol", "angle", "--vmax", "0.95", "--period",
          &format!("{}", (0.95 - 0.6) / 0.03), "--cycles", "5", "--out", "direct"],
        dir.path(),
    );
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("direct").join("summary.json"))).unwrap();
    let slope_run = summary["slope_per_cycle"].as_f64().unwrap();
    let slope_sweep: f64 =
        text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((slope_run - slope_sweep).abs() / slope_sweep < 1e-12);
}
