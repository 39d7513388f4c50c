use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cubetrees"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

#[test]
fn analyze_reports_closure_and_bounds() {
    let out = run(&["analyze", "--function", "x1*x2", "--d", "50", "--n", "128"]);
    let v = stdout_json(&out);
    assert_eq!(v["closure"]["is_msp"], false);
    let bounds = v["bounds"].as_array().unwrap();
    assert!(bounds.iter().any(|b| b["theorem"].as_str().is_some()));
    assert!(!bounds.is_empty());
}

#[test]
fn analyze_text_format() {
    let out = run(&["analyze", "--function", "x1 + x1*x2", "--d", "10", "--format", "text"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("msp: true"));
}

#[test]
fn fit_is_deterministic_and_reports_risk() {
    let args = [
        "fit",
        "--function",
        "x1 + x1*x2",
        "--d",
        "8",
        "--n",
        "256",
        "--sigma",
        "0.1",
        "--seed",
        "7",
    ];
    let a = stdout_json(&run(&args));
    let b = stdout_json(&run(&args));
    assert_eq!(a, b);
    assert!(a["risk"]["risk"].as_f64().unwrap() < 0.1);
}

#[test]
fn fit_erm_and_gamma_grid() {
    let v = stdout_json(&run(&[
        "fit",
        "--function",
        "x1*x2",
        "--d",
        "4",
        "--n",
        "64",
        "--estimator",
        "erm",
        "--depth",
        "2",
    ]));
    assert!(v["risk"]["risk"].as_f64().unwrap() < 1e-12);
    let v = stdout_json(&run(&[
        "fit",
        "--function",
        "x1 + x2",
        "--d",
        "6",
        "--n",
        "200",
        "--sigma",
        "0.5",
        "--gamma-grid",
    ]));
    assert!(v["validation_mse"].as_f64().is_some());
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        r#"
id = "smoke"
function = "x1*x2 + {alpha}*x1"
replicates = 2
master_seed = 3

[grid]
d = [6]
log2n = [5, 6]
alpha = [0.0, 0.5]

[estimator]
kind = "cart"
"#,
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--jobs",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config_hash="));
    assert!(lines[1].starts_with("experiment_id,"));
    assert_eq!(lines.len(), 2 + 2 * 2 * 2);
}

#[test]
fn bad_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "id = \"x\"\nbogus = 1\n").unwrap();
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["fit", "--function", "x1**", "--d", "3", "--n", "8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_error_exits_with_code_3() {
    let out = run(&[
        "fit",
        "--function",
        "x1",
        "--d",
        "40",
        "--n",
        "16",
        "--estimator",
        "erm",
        "--depth",
        "12",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn coverage_and_validate() {
    let v = stdout_json(&run(&[
        "coverage",
        "--function",
        "x1 + x2",
        "--d",
        "6",
        "--n",
        "64",
        "--replicates",
        "5",
        "--features",
        "1,6",
    ]));
    assert_eq!(v.as_array().unwrap().len(), 2);
    let out = run(&["validate", "--suite", "halving", "--runs", "10", "--log2n", "6"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("halving"));
    let out = run(&["validate", "--suite", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}
