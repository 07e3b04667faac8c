//! CLI behavior tests: exit-code contract, input diagnostics, and the
//! projection debugging tool.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_iwf")
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("iwf-smoke-{name}"));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn decoupled_scenario() -> String {
    r#"{
        "num_users": 2, "num_carriers": 2,
        "gain_sq": [[[1.0, 2.0], [0.0, 0.0]], [[0.0, 0.0], [2.0, 1.0]]],
        "snr_gap": [1.0, 1.0],
        "mask": [[2.0, 2.0], [2.0, 2.0]]
    }"#
    .into()
}

fn coupled_scenario(a: f64) -> String {
    format!(
        r#"{{
            "num_users": 2, "num_carriers": 1,
            "gain_sq": [[[1.0], [{a}]], [[{a}], [1.0]]],
            "snr_gap": [1.0, 1.0],
            "mask": [[2.0], [2.0]]
        }}"#
    )
}

#[test]
fn check_exit_codes() {
    let dir = tmp_dir("check");
    let ok = dir.join("ok.json");
    std::fs::write(&ok, decoupled_scenario()).unwrap();
    let out = run(&["check", "--scenario", ok.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("C1") && text.contains("true"));

    let bad = dir.join("bad.json");
    std::fs::write(&bad, coupled_scenario(1.2)).unwrap();
    let out = run(&["check", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let malformed = dir.join("malformed.json");
    std::fs::write(&malformed, "{ not json").unwrap();
    let out = run(&["check", "--scenario", malformed.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse"));

    let out = run(&[
        "check",
        "--scenario",
        dir.join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn check_rejects_infeasible_mask_with_diagnostic() {
    let dir = tmp_dir("mask");
    let path = dir.join("infeasible.json");
    std::fs::write(
        &path,
        r#"{
            "num_users": 1, "num_carriers": 2,
            "gain_sq": [[[1.0, 1.0]]],
            "snr_gap": [1.0],
            "mask": [[0.9, 0.9]]
        }"#,
    )
    .unwrap();
    let out = run(&["check", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
}

#[test]
fn solve_decoupled_and_physical_input() {
    let dir = tmp_dir("solve");
    let scen = dir.join("scen.json");
    std::fs::write(&scen, decoupled_scenario()).unwrap();
    let report = dir.join("report.json");
    let out = run(&[
        "solve",
        "--scenario",
        scen.to_str().unwrap(),
        "--bits",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(parsed["status"], "converged");
    assert_eq!(parsed["rate_units"], "bits");
    assert!(parsed["profile"]["powers"].is_array());
    assert!(parsed["analysis"]["vi_residual"].is_number());

    // physical scenario variant normalizes on load
    let phys = dir.join("phys.json");
    std::fs::write(
        &phys,
        r#"{
            "num_users": 1, "num_carriers": 2,
            "raw_gains": [[[ [1.0, 0.0], 4.0 ]]],
            "tx_power": [2.0], "noise_var": [0.5],
            "distances": [[1.0]], "path_loss_exponent": 2.0,
            "mask_watts": [[4.0, 4.0]]
        }"#,
    )
    .unwrap();
    let out = run(&["solve", "--scenario", phys.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn solve_flag_contract() {
    let dir = tmp_dir("flags");
    let scen = dir.join("scen.json");
    std::fs::write(&scen, decoupled_scenario()).unwrap();
    // --beta on a waterfilling algorithm is a usage error
    let out = run(&[
        "solve",
        "--scenario",
        scen.to_str().unwrap(),
        "--beta",
        "0.5",
    ]);
    assert_eq!(code(&out), 1);
    // --alpha on a gradient algorithm is a usage error
    let out = run(&[
        "solve",
        "--scenario",
        scen.to_str().unwrap(),
        "--algorithm",
        "sim-igpa",
        "--alpha",
        "0.5",
    ]);
    assert_eq!(code(&out), 1);
    // smoothing with explicit per-user values
    let out = run(&[
        "solve",
        "--scenario",
        scen.to_str().unwrap(),
        "--algorithm",
        "seq-iwfa",
        "--alpha",
        "0.4,0.2",
        "--tol",
        "1e-9",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn project_tool_reports_allocation_and_level() {
    let dir = tmp_dir("project");
    let input = dir.join("in.json");
    std::fs::write(&input, r#"{"x0": [0.0, 1.0], "caps": [1.2, "inf"]}"#).unwrap();
    let out = run(&["project", "--input", input.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let alloc = parsed["allocation"].as_array().unwrap();
    assert!((alloc[0].as_f64().unwrap() - 1.2).abs() < 1e-12);
    assert!((alloc[1].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert!((parsed["water_level"].as_f64().unwrap() - 1.8).abs() < 1e-12);

    std::fs::write(&input, r#"{"x0": [0.0], "caps": [0.5]}"#).unwrap();
    let out = run(&["project", "--input", input.to_str().unwrap()]);
    assert_eq!(code(&out), 1); // infeasible set
}

#[test]
fn gen_then_check_round_trip() {
    let dir = tmp_dir("gen");
    let params = dir.join("params.json");
    std::fs::write(
        &params,
        r#"{
            "num_users": 2, "num_carriers": 8, "taps": 2,
            "path_loss_exponent": 2.5,
            "ratio_grid": [20.0],
            "direct_snr_db": 7.0, "cross_budget_db": 3.0,
            "trials": 1, "seed": 3
        }"#,
    )
    .unwrap();
    let scen = dir.join("scen.json");
    let out = run(&[
        "gen",
        "--params",
        params.to_str().unwrap(),
        "--out",
        scen.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    // far-apart interferers: C1 holds, exit 0
    let out = run(&["check", "--scenario", scen.to_str().unwrap()]);
    assert_eq!(code(&out), 0);

    let out = run(&[
        "montecarlo",
        "--params",
        dir.join("nope.json").to_str().unwrap(),
        "--out",
        dir.join("c.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn montecarlo_emits_one_row_per_ratio_and_condition() {
    let dir = tmp_dir("mc-rows");
    let params = dir.join("params.json");
    std::fs::write(
        &params,
        r#"{
            "num_users": 2, "num_carriers": 4, "taps": 2,
            "path_loss_exponent": 2.5,
            "ratio_grid": [1.0, 10.0],
            "direct_snr_db": 7.0, "cross_budget_db": 3.0,
            "trials": 5, "seed": 11
        }"#,
    )
    .unwrap();
    let csv = dir.join("curve.csv");
    let out = run(&[
        "montecarlo",
        "--params",
        params.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    // header + 2 ratios x 5 conditions
    assert_eq!(text.lines().count(), 1 + 2 * 5, "{text}");
}

#[test]
fn trace_requires_input_and_writes_summary() {
    let dir = tmp_dir("trace");
    let out = run(&[
        "trace",
        "--algorithm",
        "sim-iwfa",
        "--out",
        dir.join("t.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);

    let scen = dir.join("scen.json");
    std::fs::write(&scen, decoupled_scenario()).unwrap();
    let t = dir.join("t.csv");
    let out = run(&[
        "trace",
        "--scenario",
        scen.to_str().unwrap(),
        "--algorithm",
        "seq-iwfa",
        "--algorithm",
        "sim-iwfa",
        "--out",
        t.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(t.exists());
    let summary = dir.join("t_summary.csv");
    let text = std::fs::read_to_string(&summary).unwrap();
    assert!(text.starts_with("algorithm,status,iterations_to_eps"));
    assert!(text.contains("seq-iwfa,converged"));
}
