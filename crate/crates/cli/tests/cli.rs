use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coxhecke")).args(args).output().expect("binary runs")
}

fn json(output: &Output) -> Value {
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

#[test]
fn ball_of_radius_zero_is_the_identity() {
    let out = run(&["group", "ball", "--radius", "0"]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["elements"], serde_json::json!(["1"]));
    assert_eq!(report["schema"], "coxhecke-report/1");
}

#[test]
fn pentagon_ball_sizes() {
    let report = json(&run(&["group", "info", "--lmax", "3"]));
    assert_eq!(report["sphere_sizes"], serde_json::json!([1, 5, 15, 40]));
}

#[test]
fn generator_square_at_q3() {
    let out = run(&["hecke", "mul", "--q", "3", "--a", r#"{"s0": 1}"#, "--b", r#"{"s0": 1}"#]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["antichain"], serde_json::json!({"1": "3", "s0": "2"}));
    assert_eq!(report["match"], true);
}

#[test]
fn rational_coefficients_and_mixed_q() {
    let out = run(&["hecke", "mul", "--q", "2,3,2,3,2", "--a", r#"{"s1": "1/2"}"#, "--b", r#"{"s1s0": 1, "1": "-1"}"#]);
    assert!(out.status.success());
    let report = json(&out);
    // s1s0 = s0s1 has left descent s1: e_s1 e_s0s1 = 2 e_s0s1 + 3 e_s0, and e_s1 e_1 = e_s1.
    assert_eq!(report["antichain"], serde_json::json!({"s0": "3/2", "s0s1": "1", "s1": "-1/2"}));
}

#[test]
fn invalid_config_names_the_field() {
    for (args, field) in [
        (vec!["group", "info", "--k", "4"], "`k`"),
        (vec!["group", "info", "--n", "1000"], "`n`"),
        (vec!["group", "info", "--q", "1/2"], "`q`"),
        (vec!["group", "info", "--eps", "x"], "`eps`"),
        (vec!["group", "info", "--rows", "some"], "`rows`"),
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains(field), "{args:?}: {stderr}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = std::env::temp_dir().join(format!("coxhecke-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.conf");
    std::fs::write(&path, "# hexagon\nk = 6\nlmax = 2\n").unwrap();
    let report = json(&run(&["group", "info", "--config", path.to_str().unwrap(), "--lmax", "1"]));
    assert_eq!(report["k"], 6);
    assert_eq!(report["sphere_sizes"], serde_json::json!([1, 6]));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn walls_dump_agrees_with_arcs() {
    let out = run(&["walls", "dump", "--w", "s0s2s1"]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["walls"].as_array().unwrap().len(), 3);
    assert_eq!(report["arc_disagreements"], 0);
}

#[test]
fn rep_check_twisted() {
    let out = run(&["rep", "check", "--w", "s0s2s4", "--eps", "0.7", "--n", "64"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn estimates_csv_and_files() {
    let dir = std::env::temp_dir().join(format!("coxhecke-cli-est-{}", std::process::id()));
    let out = run(&["estimates", "sweep", "--lmax", "3", "--samples", "4", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("estimates_sweep.csv")).unwrap();
    assert!(csv.starts_with("check,w,z,h,lhs,rhs,slack,pass\n"));
    assert!(!csv.contains('\r'));
    assert_eq!(std::fs::read(dir.join("estimates_sweep.json")).unwrap(), out.stdout);
    let twisted = run(&["estimates", "sweep", "--eps", "1/2"]);
    assert_eq!(twisted.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn averaging_with_arcs_file() {
    let dir = std::env::temp_dir().join(format!("coxhecke-cli-avg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let arcs = dir.join("arcs.json");
    std::fs::write(&arcs, r#"[{"name": "full", "u": [[0, 6.283185307179586]], "v": [[0, 6.283185307179586]], "w": [[0, 6.283185307179586]]}]"#)
        .unwrap();
    let out = run(&["averaging", "run", "--t", "4", "--q", "1", "--arcs", arcs.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    let csv = std::fs::read_to_string(dir.join("averaging_run.csv")).unwrap();
    assert!(csv.starts_with("triple,t,layer_size,selected,ties,value,target,error\n"));
    let report = json(&out);
    let row = &report["tables"][0]["rows"][0];
    assert!((row["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    std::fs::remove_dir_all(&dir).ok();
}
