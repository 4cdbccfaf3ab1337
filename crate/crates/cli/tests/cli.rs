use std::process::{Command, Output};

use serde_json::Value;

fn symspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symspace")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn success_writes_an_ok_envelope() {
    let out = symspace(&["space", "info", "--factors", "3,3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["result"]["dim"], 6);
    assert_eq!(v["result"]["rank"], 2);
}

#[test]
fn inadmissible_parameters_exit_2_with_reasons() {
    let out = symspace(&["ineq", "run", "--factors", "3", "--kind", "hardy", "--params", "sigma=1.5,p=2"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["status"], "error");
    assert_eq!(v["error"]["kind"], "inadmissible");
    assert_eq!(v["error"]["reasons"][0], "sigma < n/p");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(symspace(&["kernel", "table", "--factors", "3"]).status.code(), Some(2));
    assert_eq!(symspace(&["kernel", "frobnicate"]).status.code(), Some(2));
    assert_eq!(symspace(&["wave", "linear", "--b", "two"]).status.code(), Some(2));
    assert_eq!(symspace(&["--help"]).status.code(), Some(0));
}

#[test]
fn truncation_failure_exits_1() {
    // a bump far wider than the radial grid leaves a heavy tail
    let out = symspace(&[
        "transform", "roundtrip", "--factors", "3", "--width", "6", "--r-max", "4", "--fail-on-truncation",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["error"]["kind"], "truncation");
}

#[test]
fn flags_override_the_config_file() {
    let dir = std::env::temp_dir().join(format!("symspace-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("kernel.cfg");
    std::fs::write(&path, "sigma=1.5\nxi=2\n").unwrap();
    let cfg = path.to_str().unwrap();

    let from_file = json(&symspace(&["kernel", "asym", "--factors", "3", "--config", cfg]));
    assert_eq!(from_file["result"]["sigma"], 1.5);
    assert_eq!(from_file["result"]["xi"], 2.0);

    let overridden = json(&symspace(&["kernel", "asym", "--factors", "3", "--config", cfg, "--sigma", "0.5"]));
    assert_eq!(overridden["result"]["sigma"], 0.5);
    assert_eq!(overridden["result"]["xi"], 2.0);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn csv_output_has_a_commented_header() {
    let out = symspace(&["kernel", "table", "--factors", "3", "--sigma", "1", "--points", "3", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some("r,kernel"));
    assert_eq!(lines.count(), 3);
    assert!(text.contains("# command: kernel table"));
}
