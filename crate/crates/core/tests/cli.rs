use etclosure::cli::{rows_from_csv, rows_from_json, run_from};
use serde_json::Value;

fn run(args: &[&str]) -> (i32, String) {
    let o = run_from(std::iter::once("etclosure").chain(args.iter().copied()));
    (o.code, o.output)
}

#[test]
fn closure_json_and_csv_agree() {
    let (code, json) = run(&["closure", "--M", "2", "--N", "3", "--hmax", "2", "--kmax", "1"]);
    assert_eq!(code, 0);
    let (code, csv) = run(&["closure", "--M", "2", "--N", "3", "--hmax", "2", "--kmax", "1", "--format", "csv"]);
    assert_eq!(code, 0);
    let a = rows_from_json(&json).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, rows_from_csv(&csv).unwrap());
}

#[test]
fn closure_is_deterministic() {
    let args = ["closure", "--M", "4", "--N", "1", "--hmax", "3"];
    assert_eq!(run(&args), run(&args));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["closure", "--M", "1"]).0, 2);
    assert_eq!(run(&["closure", "--bogus"]).0, 2);
    assert_eq!(run(&["equilibrium", "--mu0", "0.1", "--mu1", "1"]).0, 2);
    assert_eq!(run(&["equilibrium", "--format", "csv"]).0, 2);
    assert_eq!(run(&["verify", "--suite", "nonsense"]).0, 2);
}

#[test]
fn verify_passes_and_detects_mutation() {
    let (code, out) = run(&["verify", "--suite", "closure"]);
    assert_eq!(code, 0, "{out}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["failures"].as_array().unwrap().len(), 0);
    assert_eq!(run(&["verify", "--suite", "moments", "--mutate", "1"]).0, 1);
}

#[test]
fn equilibrium_report() {
    let (code, out) = run(&["equilibrium", "--lambda", "0.3", "--gamma", "2", "--m", "1"]);
    assert_eq!(code, 0, "{out}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert!(v["gibbs_residual"].as_f64().unwrap() < 1e-8);
    assert!(v["integrability_residual"].as_f64().unwrap() < 1e-8);
    let (n, p, t) = (v["n"].as_f64().unwrap(), v["p"].as_f64().unwrap(), v["T"].as_f64().unwrap());
    assert!((p + n * t).abs() < 1e-9 * p.abs());
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.json");
    let (code, out) = run(&["closure", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), out);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "M = 4\nhmax = 1\n").unwrap();
    let (_, a) = run(&["closure", "--config", path.to_str().unwrap()]);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["M"], 4);
    let (_, b) = run(&["closure", "--config", path.to_str().unwrap(), "--M", "2"]);
    let v: Value = serde_json::from_str(&b).unwrap();
    assert_eq!((v["M"].as_u64(), v["hmax"].as_u64()), (Some(2), Some(1)));
}
