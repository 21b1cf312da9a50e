use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leo-noma")).args(args).output().expect("binary runs")
}

fn data_lines(out: &Output) -> Vec<String> {
    String::from_utf8_lossy(&out.stdout).lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect()
}

#[test]
fn sweep_emits_one_row_per_point_metric_and_user() {
    let out = run(&["sweep", "--start", "-6", "--stop", "0", "--points", "4", "--metrics", "coverage", "--n", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&out);
    assert!(lines[0].starts_with("axis,axis_value"));
    assert_eq!(lines.len() - 1, 4 * 3);
    let head = String::from_utf8_lossy(&out.stdout);
    assert!(head.contains("# seed="));
}

#[test]
fn sweep_json_parses() {
    let out = run(&["sweep", "--points", "2", "--metrics", "sum_se", "--format", "json"]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).expect("json output");
    assert_eq!(json["rows"].as_array().map(Vec::len), Some(2));
}

#[test]
fn invalid_config_reports_structured_error() {
    let dir = std::env::temp_dir().join(format!("leo-noma-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"pathloss_exponent": 1.5}"#).unwrap();
    let out = run(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).expect("error record");
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn optimize_finds_a_feasible_split() {
    let out = run(&["optimize", "--theta-db", "-3", "--n", "2", "--step", "0.1", "--format", "json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("sum_se"));
}

#[test]
fn monte_carlo_sweep_is_reproducible() {
    let args = ["sweep", "--points", "2", "--engine", "monte_carlo", "--trials", "2000", "--seed", "5"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(data_lines(&a), data_lines(&b));
}
