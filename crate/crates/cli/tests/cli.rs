use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn twoway(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twoway"))
        .args(args)
        .env("TWOWAY_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn export(dir: &Path) {
    let out = twoway(&["presets", "--export", dir.to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn presets_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let cfg = dir.path().join("bmc-example2.json");
    let ch = dir.path().join("bmc.json");
    let src = dir.path().join("example2.json");
    let from_files = twoway(&[
        "eval-theorem1",
        "--config",
        cfg.to_str().unwrap(),
        "--channel",
        ch.to_str().unwrap(),
        "--source",
        src.to_str().unwrap(),
    ]);
    let from_preset = twoway(&["eval-theorem1", "--preset", "bmc-example2"]);
    let a = json_stdout(&from_files);
    let b = json_stdout(&from_preset);
    assert_eq!(a["report"], b["report"]);
    assert_eq!(a["used_supplied_tilde"], Value::Bool(true));
    // the uncoded configuration sits exactly on the boundary
    assert_eq!(a["report"]["status"], "boundary");
    assert_eq!(from_files.status.code(), Some(1));
}

#[test]
fn membership_and_stationary_dump() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("pi.csv");
    let out = twoway(&[
        "eval-theorem1",
        "--preset",
        "bmc-example2",
        "--D1",
        "0",
        "--D2",
        "0",
        "--dump-stationary",
        dump.to_str().unwrap(),
    ]);
    let v = json_stdout(&out);
    assert_eq!(v["pi_z"]["member"], Value::Bool(true));
    assert_eq!(v["run"]["command"], "eval-theorem1");
    let csv = std::fs::read_to_string(dump).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s1,s2,u1,u2,x1,x2,y1,y2,p"));
    let total: f64 = lines
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn wz_rd_lossless_example() {
    let out = twoway(&["wz-rd", "--source", "example2", "--which", "1", "--D", "0"]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    let rate = v["rate"].as_f64().unwrap();
    assert!((rate - 2.0 / 3.0).abs() < 1e-3, "rate {rate}");
}

#[test]
fn rd_grid_writes_csv_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("rd.csv");
    let out = twoway(&[
        "rd",
        "--source",
        "bernoulli:0.5",
        "--grid",
        "0,0.1,0.5",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("D,R,iterations,residual\n"));
    assert_eq!(text.lines().count(), 4);
    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rd.csv.run.json")).unwrap())
            .unwrap();
    assert_eq!(side["run"]["command"], "rd");
    assert_eq!(side["run"]["grid"], "0,0.1,0.5");
}

#[test]
fn shannon_bound_on_bmc() {
    let out = twoway(&["shannon-bound", "--channel", "bmc", "--q", "1"]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    let r = v["symmetric_max"].as_f64().unwrap();
    assert!((r - 0.617).abs() < 1e-3, "bound {r}");
}

#[test]
fn non_normalized_configuration_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let path = dir.path().join("bmc-example2.json");
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    doc["pu_given_s"][0][0][0] = Value::from(0.7);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = twoway(&["eval-theorem1", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json"), "{err}");
}

#[test]
fn missing_file_names_the_path() {
    let out = twoway(&["eval-theorem1", "--config", "/definitely/missing.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/definitely/missing.json"), "{err}");
}

#[test]
fn unknown_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let path = dir.path().join("bmc.json");
    let text = std::fs::read_to_string(&path)
        .unwrap()
        .replace("\"v1\"", "\"v9\"");
    std::fs::write(&path, text).unwrap();
    let out = twoway(&["shannon-bound", "--channel", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_preset_is_lossless() {
    let out = twoway(&[
        "simulate",
        "--preset",
        "bmc-example2",
        "--n",
        "32",
        "--trials",
        "20",
        "--seed",
        "3",
    ]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["distortions"], serde_json::json!([0.0, 0.0]));
    assert_eq!(v["run"]["n"], "32");
    let again = json_stdout(&twoway(&[
        "simulate",
        "--preset",
        "bmc-example2",
        "--n",
        "32",
        "--trials",
        "20",
        "--seed",
        "3",
    ]));
    assert_eq!(v["err_cover"], again["err_cover"]);
    assert_eq!(v["err_typ"], again["err_typ"]);
}

#[test]
fn simulate_sweep_writes_one_row_per_length() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = twoway(&[
        "simulate",
        "--preset",
        "bmc-example2",
        "--n",
        "16,32,64",
        "--trials",
        "4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "n,B,eps,eps1,R1,R2,d1_hat,d2_hat,err_cover,err_typ,err_confuse,trials"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("64,3,"));
    assert!(dir.path().join("sweep.csv.run.json").exists());
}

#[test]
fn simulate_rejects_oversized_codebooks() {
    let out = twoway(&[
        "simulate",
        "--preset",
        "bmc-example2",
        "--n",
        "64",
        "--R1",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn search_region_writes_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("region.csv");
    let out = twoway(&[
        "search-region",
        "--budget",
        "20",
        "--seed",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("d1,d2,margin,boundary_flag,certificate"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&first[..2], &["0", "0"]);
    let cert = first[4];
    assert!(Path::new(cert).exists());
    // the certificate is a loadable configuration
    let check = twoway(&["eval-theorem1", "--config", cert, "--D1", "0", "--D2", "0"]);
    let v = json_stdout(&check);
    assert_eq!(v["pi_z"]["member"], Value::Bool(true));
}

#[test]
fn eval_sscc_and_hybrid_accept_exported_schemes() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let hybrid = dir.path().join("bmc-example2-hybrid.json");
    let out = twoway(&["eval-hybrid", "--scheme", hybrid.to_str().unwrap()]);
    let v = json_stdout(&out);
    assert_eq!(v["distortions"], serde_json::json!([0.0, 0.0]));
    assert_eq!(v["report"]["status"], "boundary");
    assert_eq!(out.status.code(), Some(1));

    let han = dir.path().join("bmc-uniform-han.json");
    let out = twoway(&[
        "eval-sscc",
        "--han",
        han.to_str().unwrap(),
        "--D1",
        "0.1",
        "--D2",
        "0.1",
    ]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    // uniform uncoded inputs on the BMC carry half a bit each way
    assert!((v["report"]["rhs1"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert_eq!(v["report"]["lhs1"], v["wz_rates"][0]);

    let bad = twoway(&["eval-sscc", "--han", "/missing/han.json"]);
    assert_eq!(bad.status.code(), Some(2));
}
