use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn crushflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crushflow"))
        .args(args)
        .env_remove("CRUSHFLOW_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn last_row(path: &Path) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().last().unwrap().split(',').map(|c| c.parse().unwrap()).collect()
}

#[test]
fn eval_writes_one_row_per_node_and_is_deterministic() {
    let run = || crushflow(&["eval", "--field", "v", "--t", "0.6", "--grid", "8"]);
    let a = run();
    assert!(a.status.success());
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x1,x2,u1,u2"));
    assert_eq!(lines.count(), 64);
    assert!(!text.contains('\r'));
    assert_eq!(run().stdout, a.stdout);
}

#[test]
fn eval_rejects_times_outside_the_field_range() {
    let out = crushflow(&["eval", "--field", "u", "--t", "1.5", "--grid", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn both_trajectory_modes_agree_at_the_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let status = crushflow(&["traj", "--address", "+-,-+,++", "--mode", "both", "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let a = last_row(&dir.path().join("traj_analytic.csv"));
    let n = last_row(&dir.path().join("traj_numeric.csv"));
    assert_eq!(a[0], n[0]);
    for j in 1..=2 {
        let diff = (a[j] - n[j]).abs();
        assert!(diff.min(1.0 - diff) < 1e-6, "{a:?} vs {n:?}");
    }
}

#[test]
fn empty_address_is_an_error() {
    let out = crushflow(&["traj", "--address", ""]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("address"));
}

#[test]
fn crush_reports_generation_volume() {
    let r = &stdout_json(&crushflow(&["crush", "--gen", "6", "--grid", "16"]))["collapse_report"];
    assert!((r["volume"].as_f64().unwrap() - 2f64.powf(-9.0)).abs() < 1e-15);
    assert!((r["fraction"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert_eq!(r["images_in_translated_cell"], r["points"]);
}

#[test]
fn generation_zero_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("dump.csv");
    let out = crushflow(&["crush", "--gen", "0", "--grid", "4", "--dump", dump.to_str().unwrap()]);
    let r = &stdout_json(&out)["collapse_report"];
    assert_eq!(r["volume"].as_f64(), Some(1.0));
    let text = std::fs::read_to_string(&dump).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,y1,y2"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r[0] == r[2] && r[1] == r[3]));
}

#[test]
fn geometry_checks_pass() {
    let out = crushflow(&["verify", "--only", "geometry"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["all_passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 10);
}

#[test]
fn inflating_theta_eightfold_breaks_inclusion() {
    let out = crushflow(&["verify", "--only", "geometry.theta_inclusion", "--theta-scale", "8"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["checks"][0]["passed"], false);
}

#[test]
fn unknown_check_prefix_is_an_error() {
    assert_eq!(crushflow(&["verify", "--only", "nothing"]).status.code(), Some(2));
}

#[test]
fn config_file_and_env_var_set_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "nu = 0.5\nd = 3\n").unwrap();
    let by_flag = stdout_json(&crushflow(&["dim", "--n", "1", "--config", cfg.to_str().unwrap()]));
    assert_eq!(by_flag["nu"], 0.5);
    assert_eq!(by_flag["dim"], 3);
    let by_env = Command::new(env!("CARGO_BIN_EXE_crushflow"))
        .args(["dim", "--n", "1", "--nu", "0.25"])
        .env("CRUSHFLOW_CONFIG", &cfg)
        .output()
        .unwrap();
    let v = stdout_json(&by_env);
    assert_eq!(v["nu"], 0.25);
    assert_eq!(v["dim"], 3);
}

#[test]
fn holder_sweep_is_seeded() {
    let args = ["holder", "--samples", "500", "--kmax", "6", "--seed", "7"];
    let a = stdout_json(&crushflow(&args));
    assert_eq!(a["holder_sweep"]["scales"].as_array().unwrap().len(), 4);
    assert_eq!(a, stdout_json(&crushflow(&args)));
}

#[test]
fn norms_needs_three_stages() {
    assert_eq!(crushflow(&["norms", "--first", "1", "--last", "2"]).status.code(), Some(2));
}
