//! End-to-end runs of the `chi2mech` binary on the bundled scenarios.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chi2mech::cli::commands::{AdversaryOutput, DesignOutput, ProviderOutput};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chi2mech"))
        .args(args)
        .env_remove("CHI2MECH_LOG")
        .output()
        .expect("binary runs")
}

fn run_on(cmd: &str, file: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, file.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_scenario(dir: &tempfile::TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("s.json");
    std::fs::write(&p, body).unwrap();
    p
}

fn csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn design_reference_report_round_trips() {
    let o = run_on("design", &scenario("reference_2x2.json"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out: DesignOutput = serde_json::from_str(&stdout(&o)).unwrap();
    out.validate().unwrap();
    assert!((out.report.sigma_max - 7.4012).abs() < 5e-4);
    assert_eq!(out.mechanism.pu().as_slice(), &[0.5, 0.5]);
}

#[test]
fn design_medical_test_bits_coefficient() {
    let o = run_on("design", &scenario("medical_test.json"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out: DesignOutput = serde_json::from_str(&stdout(&o)).unwrap();
    out.validate().unwrap();
    assert!((out.report.utility_bits_coeff - 1.6073).abs() < 2e-3);
    assert_eq!(out.report.px.index_of("1"), Some(0));
    assert!((out.report.px[0] - 0.101).abs() < 1e-12);
}

#[test]
fn out_flag_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let a = run_on("design", &scenario("reference_2x2.json"), &["--out", path.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0));
    assert!(a.stdout.is_empty());
    let b = run_on("design", &scenario("reference_2x2.json"), &[]);
    assert_eq!(std::fs::read(&path).unwrap(), b.stdout);
}

#[test]
fn malformed_row_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        &dir,
        r#"{"schema_version": 1, "kind": "base", "leakage": [[0.25, 0.4], [0.75]], "p_y": [0.25, 0.75], "epsilon": 0.01}"#,
    );
    let o = run_on("design", &p, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("leakage[1]"), "{}", stderr(&o));
}

#[test]
fn type_error_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(&dir, r#"{"schema_version": 1, "kind": "base", "p_y": [0.25, "x"]}"#);
    let o = run_on("design", &p, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("p_y[1]"), "{}", stderr(&o));
}

#[test]
fn non_stochastic_matrix_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        &dir,
        r#"{"schema_version": 1, "kind": "base", "leakage": [[0.5, 0.4], [0.75, 0.6]], "p_y": [0.25, 0.75], "epsilon": 0.01}"#,
    );
    let o = run_on("design", &p, &[]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("leakage"));
}

#[test]
fn infeasible_epsilon_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        &dir,
        r#"{"schema_version": 1, "kind": "base", "leakage": [[0.25, 0.4], [0.75, 0.6]], "p_y": [0.25, 0.75], "epsilon": 0.5}"#,
    );
    assert_eq!(run_on("design", &p, &[]).status.code(), Some(2));
    let p = write_scenario(
        &dir,
        r#"{"schema_version": 1, "kind": "base", "leakage": [[0.25, 0.4], [0.75, 0.6]], "p_y": [0.25, 0.75], "sweep": {"start": 0.01, "stop": 0.2, "steps": 3}}"#,
    );
    assert_eq!(run_on("sweep", &p, &[]).status.code(), Some(2));
}

#[test]
fn singular_leakage_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        &dir,
        r#"{"schema_version": 1, "kind": "base", "leakage": [[0.5, 0.5], [0.5, 0.5]], "p_y": [0.25, 0.75], "epsilon": 0.01}"#,
    );
    let o = run_on("design", &p, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn empty_sweep_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_scenario(
        &dir,
        r#"{"schema_version": 1, "kind": "base", "leakage": [[0.25, 0.4], [0.75, 0.6]], "p_y": [0.25, 0.75], "sweep": {"start": 0.01, "stop": 0.02, "steps": 0}}"#,
    );
    assert_eq!(run_on("sweep", &p, &[]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["design", "--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["design"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate", "x.json"]).status.code(), Some(1));
    let s = scenario("reference_2x2.json");
    assert_eq!(run_on("design", &s, &["--budget", "half"]).status.code(), Some(1));
    assert_eq!(run_on("sweep", &s, &["--oracle-resolution", "10"]).status.code(), Some(1));
    assert_eq!(run(&["design", "/nonexistent/scenario.json"]).status.code(), Some(1));
}

#[test]
fn wrong_kind_is_rejected() {
    let o = run_on("adversary", &scenario("reference_2x2.json"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kind"));
}

#[test]
fn sweep_csv_is_deterministic_and_close_to_oracle() {
    let s = scenario("reference_2x2.json");
    let a = run_on("sweep", &s, &["--oracle-resolution", "400"]);
    let b = run_on("sweep", &s, &["--oracle-resolution", "400"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(!text.contains('\r'));
    assert!(text.lines().skip(1).all(|l| !l.contains('e')), "fixed-point only");
    let (header, rows) = csv(&text);
    assert_eq!(
        header,
        ["eps", "approx_utility_nats", "exact_utility_nats", "oracle_utility_nats", "leakage_mi_nats", "chi2_max"]
    );
    assert_eq!(rows.len(), 24);
    for w in rows.windows(2) {
        assert!(w[0][0] < w[1][0], "rows in sweep order");
    }
    for r in rows.iter().filter(|r| r[0] <= 0.02) {
        assert!((r[1] - r[3]).abs() <= 0.1 * r[3], "eps {}: approx {} oracle {}", r[0], r[1], r[3]);
    }
}

#[test]
fn sweep_json_and_budget_override() {
    let s = scenario("reference_2x2.json");
    let o = run_on("sweep", &s, &["--format", "json", "--budget", "half-eps2", "--oracle-resolution", "200"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = serde_json::from_str(&stdout(&o)).unwrap();
    let first = &rows[0];
    let eps = first["eps"].as_f64().unwrap();
    assert!((first["chi2_max"].as_f64().unwrap() - eps * eps / 2.0).abs() < 1e-15);
}

#[test]
fn tradeoff_baseline_is_one_half() {
    let o = run_on("sweep", &scenario("bsc_tradeoff.json"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv(&stdout(&o));
    assert_eq!(header, ["alpha", "eps", "mmse_designed", "mmse_baseline", "perr_designed", "perr_baseline"]);
    assert_eq!(rows.len(), 6 * 8);
    for r in &rows {
        assert_eq!(r[5], 0.5);
        assert!(r[4] < 0.5 && r[2] < r[3]);
    }
    for w in rows.windows(2).filter(|w| w[0][0] == w[1][0]) {
        assert!(w[1][4] < w[0][4], "error probability falls as eps grows");
    }
}

#[test]
fn adversary_scenarios() {
    let o = run_on("adversary", &scenario("adversary_identity.json"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out: AdversaryOutput = serde_json::from_str(&stdout(&o)).unwrap();
    out.validate().unwrap();
    let base = 0.5 * out.report.sigma * out.report.sigma;
    assert!((out.report.utility_nats_coeff - base).abs() < 1e-9);

    let o = run_on("adversary", &scenario("adversary_bsc.json"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out: AdversaryOutput = serde_json::from_str(&stdout(&o)).unwrap();
    out.validate().unwrap();
    assert_eq!(serde_json::to_value(out.report.channel.class).unwrap(), "A2");
    assert!((out.report.channel.gain() - 1.5625).abs() < 1e-12);
}

#[test]
fn provider_scenarios() {
    let o = run_on("provider", &scenario("provider_same.json"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out: ProviderOutput = serde_json::from_str(&stdout(&o)).unwrap();
    out.validate().unwrap();
    assert_eq!(serde_json::to_value(out.report.case).unwrap(), "sigma_eq_one");
    assert!((out.report.utility_nats_coeff - 0.5).abs() < 1e-9);

    let o = run_on("provider", &scenario("provider_direct.json"), &["--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).lines().nth(1).unwrap().contains("sigma_gt_one"));
}

#[test]
fn tampered_report_fails_validation() {
    let o = run_on("design", &scenario("reference_2x2.json"), &[]);
    let mut v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    v["report"]["sigma_max"] = serde_json::json!(8.0);
    let out: DesignOutput = serde_json::from_value(v).unwrap();
    assert!(out.validate().is_err());
}

#[test]
fn log_env_var_enables_diagnostics() {
    let o = Command::new(env!("CARGO_BIN_EXE_chi2mech"))
        .args(["design", scenario("reference_2x2.json").to_str().unwrap()])
        .env("CHI2MECH_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("sigma_max"), "{}", stderr(&o));
}
