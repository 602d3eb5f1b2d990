//! End-to-end tests of the installed binary: spawn, feed files, check
//! exit codes and outputs.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_extrap"))
}

fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn two_point_files(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = write(dir, "d.csv", "x1,f\n0.5,1.5\n1.0,2.0\n");
    let model = write(
        dir,
        "m.json",
        r#"{"bound":{"type":"monomial","order":1.0},"kernel":{"family":"gaussian","s":0,"ell":[1.0],"dim":1}}"#,
    );
    (data, model)
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn extrapolate_worked_example() {
    let dir = tempfile::tempdir().unwrap();
    let (data, model) = two_point_files(dir.path());
    let out = bin()
        .args(["extrapolate", "--data"])
        .arg(&data)
        .arg("--model")
        .arg(&model)
        .output()
        .unwrap();
    let json = stdout_json(&out);
    let mean = json["mean_at_zero"].as_f64().unwrap();
    assert!((mean - 1.3521).abs() < 5e-5, "mean {mean}");
    assert!(json["interval"]["lo"].as_f64().unwrap() <= mean);
    assert_eq!(json["weights"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_data_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (_, model) = two_point_files(dir.path());
    let out = bin()
        .args(["extrapolate", "--data", "/nonexistent/input.csv", "--model"])
        .arg(&model)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("/nonexistent/input.csv"),
        "stderr: {stderr}"
    );
}

#[test]
fn domain_error_emits_json_and_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // duplicate points are a domain error discovered after file loading
    let data = write(dir.path(), "dup.csv", "x1,f\n0.5,1.0\n0.5,2.0\n");
    let model = two_point_files(dir.path()).1;
    let out = bin()
        .args(["extrapolate", "--data"])
        .arg(&data)
        .arg("--model")
        .arg(&model)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert!(err["error"].as_str().unwrap().contains("distinct"));
}

#[test]
fn fit_then_extrapolate_round_trip_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (data, model) = two_point_files(dir.path());
    let fitted = dir.path().join("fitted.json");
    let out = bin()
        .args(["fit", "--data"])
        .arg(&data)
        .arg("--model")
        .arg(&model)
        .arg("--out")
        .arg(&fitted)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let direct = stdout_json(
        &bin()
            .args(["extrapolate", "--data"])
            .arg(&data)
            .arg("--model")
            .arg(&model)
            .output()
            .unwrap(),
    );
    let via_fitted = stdout_json(
        &bin()
            .args(["extrapolate", "--fitted"])
            .arg(&fitted)
            .output()
            .unwrap(),
    );
    // bit-identical numbers through the serialized model
    assert_eq!(direct["mean_at_zero"], via_fitted["mean_at_zero"]);
    assert_eq!(direct["sigma2"], via_fitted["sigma2"]);
    assert_eq!(direct["weights"], via_fitted["weights"]);
    assert_eq!(direct["interval"], via_fitted["interval"]);

    let state: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fitted).unwrap()).unwrap();
    assert!(state["diagnostics"]["box_fill"]["value"].is_number());
    assert!(state["diagnostics"]["gamma_d"].as_u64().unwrap() == 2);
}

#[test]
fn design_subcommand_selects_feasible_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let candidates = write(
        dir.path(),
        "cand.csv",
        "x1,cost\n1.0,1.0\n0.5,2.0\n0.25,4.0\n",
    );
    let model = write(
        dir.path(),
        "m.json",
        r#"{"bound":{"type":"monomial","order":1.0},"kernel":{"family":"matern","s":0,"ell":[1.0],"dim":1}}"#,
    );
    let out = bin()
        .args(["design", "--candidates"])
        .arg(&candidates)
        .arg("--model")
        .arg(&model)
        .args(["--budget", "1.0"])
        .output()
        .unwrap();
    let json = stdout_json(&out);
    assert_eq!(json["selected"], serde_json::json!([0]));
    assert_eq!(json["optimal"], serde_json::json!(true));
    // the human-readable table lands on stderr when stdout carries JSON
    let table = String::from_utf8_lossy(&out.stderr);
    assert!(table.contains("design:"), "table: {table}");
}

#[test]
fn estimate_order_reports_surface() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(
        dir.path(),
        "sweep.csv",
        "x1,f\n1.0,2.0\n0.5,1.25\n0.25,1.0625\n0.125,1.015625\n",
    ); // f = 1 + x²
    let out = bin()
        .args(["estimate-order", "--data"])
        .arg(&data)
        .output()
        .unwrap();
    let json = stdout_json(&out);
    assert_eq!(json["r_hat"], serde_json::json!([2.0]));
    assert_eq!(json["flat_data"], serde_json::json!(false));
    let columns: Vec<String> = json["surface"]["columns"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(columns, vec!["r1", "s", "ell", "log_ql"]);
    assert!(!json["surface"]["rows"].as_array().unwrap().is_empty());
}

#[test]
fn classical_subcommand_transforms() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(
        dir.path(),
        "seq.csv",
        "x,y\n1.0,2.0\n0.5,1.25\n0.25,1.0625\n",
    );
    let out = bin()
        .args(["classical", "--data"])
        .arg(&data)
        .args(["--method", "richardson", "--order", "2", "--depth", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let first_value: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(
        (first_value - 1.0).abs() < 1e-12,
        "tableau value {first_value}"
    );

    let bad = bin()
        .args(["classical", "--data"])
        .arg(&data)
        .args(["--method", "frobnicate"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn study_subcommand_reproduces_acceptance_slope() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("study.csv");
    let summary_path = dir.path().join("summary.json");
    let out = bin()
        .args([
            "study",
            "--problem",
            "trapezoid",
            "--kernel",
            "matern",
            "--s",
            "2",
            "--methods",
            "gp,raw,richardson",
        ])
        .arg("--out")
        .arg(&csv_path)
        .arg("--summary")
        .arg(&summary_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv_text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv_text.starts_with("h,method,abs_error,rel_error\n"));
    assert_eq!(csv_text.lines().count(), 1 + 3 * 3);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary_path).unwrap()).unwrap();
    let slopes = summary["slopes"].as_array().unwrap();
    let model_row = slopes
        .iter()
        .find(|s| s["method"] == "gp-matern-s2")
        .unwrap();
    let slope = model_row["slope"].as_f64().unwrap();
    assert!(slope > 3.5, "model slope {slope} shows no acceleration");
    let raw = slopes.iter().find(|s| s["method"] == "raw").unwrap();
    let raw_slope = raw["slope"].as_f64().unwrap();
    assert!((1.8..=2.2).contains(&raw_slope), "raw slope {raw_slope}");
}

#[test]
fn list_arguments_parse() {
    // explicit --h/--design lists and extended precision
    let out = bin()
        .args([
            "study",
            "--problem",
            "central-difference",
            "--h",
            "1,0.5,0.25",
            "--design",
            "0.2,0.4,0.6,0.8,1.0",
            "--precision",
            "extended:30",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 1 + 2 * 3, "{text}");

    // --at on extrapolate takes a coordinate list
    let dir = tempfile::tempdir().unwrap();
    let (data, model) = two_point_files(dir.path());
    let out = bin()
        .args(["extrapolate", "--data"])
        .arg(&data)
        .arg("--model")
        .arg(&model)
        .args(["--at", "0.5"])
        .output()
        .unwrap();
    let json = stdout_json(&out);
    // prediction at a training point reproduces the datum
    let m = json["at"]["mean"].as_f64().unwrap();
    assert!((m - 1.5).abs() < 1e-8, "predicted {m}");
    let bad = bin()
        .args([
            "study",
            "--problem",
            "central-difference",
            "--h",
            "1,zebra",
        ])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = bin().args(["study", "--frob", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--frob") || stderr.to_lowercase().contains("usage"));
}

#[test]
fn workflow_subcommand_runs_external_simulator() {
    let dir = tempfile::tempdir().unwrap();
    let script = write(
        dir.path(),
        "sim.py",
        r#"
import json, sys
x1, x2 = float(sys.argv[1]), float(sys.argv[2])
print(json.dumps({"value": 1.0 + x1 + x2 * x2}))
"#,
    );
    let sim_spec = write(
        dir.path(),
        "sim.json",
        &serde_json::json!({
            "command_template": format!("python3 {} {{x1}} {{x2}}", script.display()),
            "parse": {"kind": "json_value", "path": "value"},
            "timeout_secs": 30.0,
            "cost_source": {"kind": "predicted", "model": {"terms": [
                {"coeff": 1.0, "exponents": [-1.0, -1.0]}
            ]}}
        })
        .to_string(),
    );
    let ledger = dir.path().join("runs.jsonl");
    let sweep = [1.0, 0.5, 0.25, 0.125];
    let candidates: Vec<Vec<f64>> = [0.25f64, 0.5, 1.0]
        .iter()
        .flat_map(|&a| [0.25f64, 0.5, 1.0].iter().map(move |&b| vec![a, b]))
        .collect();
    let config = write(
        dir.path(),
        "wf.json",
        &serde_json::json!({
            "lofi_point": [1.0, 1.0],
            "axis_sweeps": [sweep, sweep],
            "candidates": candidates,
            "budget": 30.0,
            "alpha": 0.05,
            "ledger_path": ledger,
        })
        .to_string(),
    );
    let out = bin()
        .args(["workflow", "--simulator"])
        .arg(&sim_spec)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    let json = stdout_json(&out);
    let mean = json["mean_at_zero"].as_f64().unwrap();
    assert!((mean - 1.0).abs() < 1e-3, "workflow mean {mean}");
    assert_eq!(json["axes"][0]["r"], serde_json::json!(1.0));
    assert_eq!(json["axes"][1]["r"], serde_json::json!(2.0));
    assert!(json["simulator_calls"].as_u64().unwrap() > 0);

    // rerun: ledger satisfies everything, no new calls
    let out2 = bin()
        .args(["workflow", "--simulator"])
        .arg(&sim_spec)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    let json2 = stdout_json(&out2);
    assert_eq!(json2["simulator_calls"].as_u64().unwrap(), 0);
    assert_eq!(json["mean_at_zero"], json2["mean_at_zero"]);
}
