use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nodelab"))
}

fn write_spec(name: &str, json: &str) -> PathBuf {
    let path = std::env::temp_dir().join(name);
    std::fs::write(&path, json).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const EULER: &str = r#"{"a0": 0.0, "mu": 0.0, "rho": 1.0, "B": 1.0,
    "f": {"explicit": [{"k": 2, "v": 1.0}]}, "h": []}"#;

#[test]
fn center_emits_constant_normalised_series_for_the_exact_case() {
    let spec = write_spec("cli_euler.json", EULER);
    let out = bin()
        .args(["center", "--spec", spec.to_str().unwrap(), "--k", "10"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,m,m_log_abs,m_sign,S,increment");
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6);
        let s: f64 = fields[4].parse().unwrap();
        assert_eq!(s, 1.0);
    }
    // m_3 = -2 for the exactly solvable case.
    let m3: f64 = text.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((m3 + 2.0).abs() < 1e-12);
}

#[test]
fn hypothesis_violation_maps_to_exit_code_4() {
    let spec = write_spec(
        "cli_bad_a0.json",
        r#"{"a0": -2.5, "mu": 0.0, "rho": 1.0, "B": 1.0,
            "f": {"explicit": [{"k": 2, "v": 1.0}]}, "h": []}"#,
    );
    let out = bin()
        .args(["center", "--spec", spec.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8(out.stderr).unwrap();
    let msg: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(msg["error"], "hypothesis");
}

#[test]
fn resonant_parameter_maps_to_exit_code_5() {
    let spec = write_spec("cli_euler_res.json", EULER);
    let out = bin()
        .args(["unfold", "--spec", spec.to_str().unwrap(), "--eps", "0.125"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
    let err = String::from_utf8(out.stderr).unwrap();
    let msg: serde_json::Value = serde_json::from_str(err.lines().last().unwrap()).unwrap();
    assert_eq!(msg["error"], "resonance");
}

#[test]
fn missing_spec_file_maps_to_exit_code_3() {
    let out = bin()
        .args(["center", "--spec", "/nonexistent/spec.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_grid_syntax_maps_to_exit_code_3() {
    let out = bin()
        .args(["sinfty-scan", "--f2-grid", "0..1", "--p-grid", "0:1:2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_flag_maps_to_usage_exit_code_2() {
    let out = bin().args(["center", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let spec = write_spec("cli_euler_det.json", EULER);
    let args = [
        "vbar",
        "--spec",
        spec.to_str().unwrap(),
        "--n",
        "8",
        "--alpha",
        "0.3",
        "--x-grid",
        "-0.5:0.5:11",
    ];
    let a = bin().args(args).output().unwrap();
    let b = bin().args(args).output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn out_flag_writes_the_same_bytes_as_stdout() {
    let spec = write_spec("cli_euler_out.json", EULER);
    let target = std::env::temp_dir().join("cli_center_out.csv");
    let piped = bin()
        .args(["center", "--spec", spec.to_str().unwrap(), "--k", "12"])
        .output()
        .unwrap();
    let written = bin()
        .args([
            "center",
            "--spec",
            spec.to_str().unwrap(),
            "--k",
            "12",
            "--out",
            target.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(piped.status.success() && written.status.success());
    assert_eq!(std::fs::read(&target).unwrap(), piped.stdout);
}
