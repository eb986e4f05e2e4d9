use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mixed-liouvillian"));
    cmd.env_remove("MIXED_LIOUVILLIAN_OUT");
    cmd
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("stderr not JSON ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"));
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn run_writes_trajectory_and_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "--preset", "fig2_off_resonance", "--gamma-c", "20", "--rho0", "ee", "--t", "0:50:500"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,trace,pop_g,pop_e,fidelity_nh,fidelity_lindblad\n"));
    let trace = csv_column(&csv, "trace");
    assert_eq!(trace.len(), 500);
    assert!(trace.iter().all(|&x| x > 0.97 && x <= 1.0 + 1e-9));
    let poles: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("eigenvalues.json")).unwrap()).unwrap();
    let active = poles.as_array().unwrap().iter().filter(|p| p["removed"] == false).count();
    assert_eq!(active, 5);
}

#[test]
fn config_with_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("fig2_off_resonance.json");
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--t", "0:20:81"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("re_rho_g_e,im_rho_g_e"));
    for f in ["trajectory.json", "eigenvalues.json", "projector_traces.json", "semigroup_defect.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let traces: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("projector_traces.json")).unwrap()).unwrap();
    assert!((traces["total"][0].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn poles_of_dephasing_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["poles", "--preset", "figB2_dephasing"], dir.path());
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("poles.json")).unwrap()).unwrap();
    assert_eq!(report["n_active"], 8);
    assert_eq!(report["poles"].as_array().unwrap().len(), 8);
}

#[test]
fn sweep_records_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["sweep", "--preset", "figB1_finite_T", "--gamma-c", "10,0.001,0.1", "--t", "0:10:11", "--jobs", "2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv_column(&csv, "gamma_c"), vec![0.001, 0.1, 10.0]);
    assert!(csv_column(&csv, "n_active").iter().all(|&n| n == 6.0));
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("gamma_c,re_lambda_0,im_lambda_0,"));
    assert!(header.ends_with(",t0,t_rest,errors"));
}

#[test]
fn sweep_fails_only_when_every_point_fails() {
    let dir = tempfile::tempdir().unwrap();
    let partial = run(&["sweep", "--preset", "figB1_finite_T", "--gamma-c", "0,0.3", "--t", "0:5:6"], dir.path());
    assert!(partial.status.success(), "{}", String::from_utf8_lossy(&partial.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap();
    assert!(first.starts_with("0.0000000000000000e0,NaN"));
    assert!(first.ends_with('"'));
    let all = run(&["sweep", "--preset", "figB1_finite_T", "--gamma-c", "0", "--t", "0:5:6"], dir.path());
    assert_eq!(all.status.code(), Some(1));
    assert_eq!(error_json(&all)["error"], "runtime");
}

#[test]
fn single_point_sweep_agrees_with_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["sweep", "--preset", "fig2_on_resonance", "--gamma-c", "0.02", "--t", "0:10:11"], &a).status.success());
    assert!(run(&["run", "--preset", "fig2_on_resonance", "--gamma-c", "0.02", "--t", "0:10:11"], &b).status.success());
    let sweep: Value = serde_json::from_str(&std::fs::read_to_string(a.join("sweep.json")).unwrap()).unwrap();
    let swept: Vec<f64> = sweep["points"][0]["trace"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let ran = csv_column(&std::fs::read_to_string(b.join("trajectory.csv")).unwrap(), "trace");
    assert_eq!(swept.len(), ran.len());
    assert!(swept.iter().zip(&ran).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn doubled_exp_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["oracle", "--config", scenario("custom_three_level.json").to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["oracle"], "doubled_exp");
    assert!(report["sup_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("custom_three_level.json");
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--rho0", "m", "--t", "0:1:3"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv_column(&csv, "t"), vec![0.0, 0.5, 1.0]);
    assert_eq!(csv_column(&csv, "pop_m")[0], 1.0);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["poles", "--preset", "fig2_on_resonance"])
        .env("MIXED_LIOUVILLIAN_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("poles.json").exists());
}

#[test]
fn config_errors_exit_3_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"schema_version": 2, "model": "fig2_off_resonance"}"#, "/schema_version"),
        (r#"{"schema_version": 1, "model": "fig2_off_resonance", "times": {"start": 0, "stop": 1, "count": 1}}"#, "/times/count"),
        (r#"{"schema_version": 1, "model": "fig2_off_resonance", "times": [0, 2, 1]}"#, "/times/2"),
        (r#"{"schema_version": 1, "model": "fig2_off_resonance", "outputs": ["trace", "bogus"]}"#, "/outputs/1"),
        (r#"{"schema_version": 1, "model": "fig2_off_resonance", "extra": 1}"#, "/extra"),
        (r#"{"schema_version": 1, "model": "fig2_off_resonance", "initial_state": "x"}"#, "/initial_state"),
        (r#"{"schema_version": 1, "model": "fig2_off_resonance", "gamma_c": [0.1, -1]}"#, "/gamma_c/1"),
        (r#"{"schema_version": 1, "model": "no_such_preset"}"#, "/model"),
    ];
    for (i, (text, pointer)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("c{i}.json"));
        std::fs::write(&path, text).unwrap();
        let out = run(&["run", "--config", path.to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(3), "{text}");
        let err = error_json(&out);
        assert_eq!(err["error"], "config");
        assert_eq!(err["pointer"], *pointer, "{text}: {err}");
    }
}

#[test]
fn bad_flags_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["run"],
        vec!["run", "--preset", "fig2_off_resonance", "--t", "0:1"],
        vec!["run", "--preset", "fig2_off_resonance", "--gamma-c", "0.1,0.2"],
        vec!["run", "--preset", "fig2_off_resonance", "--jobs", "0"],
        vec!["oracle", "--preset", "fig2_off_resonance", "--k", "4"],
        vec!["frobnicate"],
    ] {
        let out = run(&args, dir.path());
        assert_eq!(out.status.code(), Some(3), "{args:?}");
        assert_eq!(error_json(&out)["error"], "config");
    }
}

#[test]
fn presets_are_listed() {
    let out = bin().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig2_off_resonance", "fig2_on_resonance", "fig3_bottom", "figB1_finite_T", "figB2_dephasing", "fig4_cpt", "fig4_non_cpt"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn shipped_schema_is_json_and_scenarios_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(root.join("schema/scenario.schema.json")).unwrap()).unwrap();
    assert_eq!(schema["properties"]["schema_version"]["const"], 1);
    for entry in std::fs::read_dir(root.join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        mixed_liouvillian::cli::config::ScenarioConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
