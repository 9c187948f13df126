use std::process::{Command, Output};

fn lk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lk"))
        .args(args)
        .env_remove("LK_MAX_NODES")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// CSV data rows, skipping `#` metadata and the header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn summary(text: &str) -> serde_json::Value {
    let line = text.lines().find_map(|l| l.strip_prefix("# summary ")).expect("summary line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn compute_sphere_examples() {
    let cases = [("0", "2.000000"), ("2", "12.566371"), ("1", "0.000000")];
    for (i, want) in cases {
        let o = lk(&["compute", "zoo:sphere?r=1", "--i", i]);
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o).trim(), want);
    }
}

#[test]
fn compute_odd_codimension_is_exact_zero() {
    let o = lk(&["compute", "zoo:sphere", "--i", "1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"][0]["value"], serde_json::json!(0.0));
    assert_eq!(v["rows"][0]["nodes"], serde_json::json!(0));
}

#[test]
fn sweep_headers_and_product_constant_column() {
    let o = lk(&["sweep", "zoo:product_s2_s1", "--i", "1", "--eps", "0.5:0.5:4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "eps,value,target,abs_err"));
    let r = rows(&text);
    assert_eq!(r.len(), 4);
    for row in &r {
        let v: f64 = row[1].parse().unwrap();
        assert!((v - 4.0 * std::f64::consts::PI).abs() < 1e-6);
    }
    assert_eq!(summary(&text)["pass"], serde_json::json!(true));
}

#[test]
fn sweep_flat_zero_column() {
    let o = lk(&["sweep", "zoo:flat_t2_over_s1", "--i", "0", "--eps", "0.5:0.5:4"]);
    assert_eq!(o.status.code(), Some(0));
    for row in rows(&stdout(&o)) {
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn sweep_needs_a_submersion_and_one_index() {
    assert_eq!(lk(&["sweep", "zoo:sphere", "--i", "1"]).status.code(), Some(4));
    assert_eq!(lk(&["sweep", "zoo:product_s2_s1", "--i", "0,1"]).status.code(), Some(4));
    assert_eq!(
        lk(&["sweep", "zoo:product_s2_s1", "--i", "1", "--eps", "0.5,0.25"]).status.code(),
        Some(4)
    );
}

#[test]
fn sectional_torus_fiber_tends_to_minus_one() {
    let o = lk(&["sectional", "zoo:torus_fiber_bundle?R=2&r=1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "eps,class,min_k"));
    let limit = summary(&text)["fiber_limit"].as_f64().unwrap();
    assert!((limit + 1.0).abs() < 0.05, "{limit}");
    assert_eq!(summary(&text)["bounded_below"], serde_json::json!(false));
}

#[test]
fn validate_product_passes() {
    let o = lk(&["validate", "zoo:product_s2_s1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["summary"]["pass"], serde_json::json!(true));
}

#[test]
fn validate_rejects_broken_submersion_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let bad = r#"{
      "total_chart": {"dim": 2, "domain": [[0, 6.283185307179586], [0, 6.283185307179586]],
                      "periodic": [true, true], "metric": [["1", "0"], ["2"]]},
      "base_chart": {"dim": 1, "domain": [[0, 6.283185307179586]], "periodic": [true], "metric": [["1"]]},
      "fiber_dims": [0], "base_dims": [1]
    }"#;
    std::fs::write(&path, bad).unwrap();
    let o = lk(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_suites_pass() {
    for suite in ["gauss-bonnet", "submersions"] {
        let o = lk(&["check", suite]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", stdout(&o));
    }
    assert_eq!(lk(&["check", "no-such-suite"]).status.code(), Some(4));
}

#[test]
fn input_errors_exit_four() {
    assert_eq!(lk(&["compute", "zoo:nope"]).status.code(), Some(4));
    assert_eq!(lk(&["compute", "/no/such/file.json"]).status.code(), Some(4));
    assert_eq!(lk(&["compute", "zoo:sphere?r=-1"]).status.code(), Some(4));
    assert_eq!(lk(&["compute", "zoo:sphere", "--bogus"]).status.code(), Some(4));
    assert_eq!(lk(&["tube", "zoo:sphere2_embedded", "--eps", "1.5"]).status.code(), Some(4));
    assert_eq!(lk(&["tube", "zoo:sphere2_embedded", "--samples", "10"]).status.code(), Some(4));
    assert_eq!(lk(&["compute", "zoo:sphere", "--workers", "0"]).status.code(), Some(4));
}

#[test]
fn node_cap_from_environment_gives_nonconvergence() {
    let o = Command::new(env!("CARGO_BIN_EXE_lk"))
        .args(["compute", "zoo:ring_torus", "--i", "2"])
        .env("LK_MAX_NODES", "16")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn chart_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sphere.json");
    let chart = r#"{"dim": 2, "domain": [[0, 3.141592653589793], [0, 6.283185307179586]],
                    "periodic": [false, true], "metric": [["4", "0"], ["4*sin(x0)^2"]]}"#;
    std::fs::write(&path, chart).unwrap();
    let o = lk(&["compute", path.to_str().unwrap(), "--i", "0,2"]);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines, ["2.000000", "50.265482"]);
}

#[test]
fn out_flag_writes_file_and_config_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.json");
    let o = lk(&[
        "compute",
        "zoo:sphere",
        "--format",
        "json",
        "--out",
        path.to_str().unwrap(),
        "--seed",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["config"]["seed"], serde_json::json!(7));
    assert_eq!(v["config"]["input"], serde_json::json!("zoo:sphere"));
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn identical_runs_give_identical_bytes() {
    let args = ["sweep", "zoo:warped_s2_over_s1?a=0.3", "--i", "1", "--eps", "0.25:0.5:5"];
    let a = lk(&args);
    let b = lk(&args);
    assert_eq!(a.stdout, b.stdout);
    let w2: Vec<&str> = args.iter().copied().chain(["--workers", "2"]).collect();
    assert_eq!(a.stdout, lk(&w2).stdout);
}

#[test]
fn tube_json_fields() {
    let o = lk(&["tube", "zoo:sphere2_embedded", "--samples", "100000", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["estimate", "sigma", "eps", "samples", "seed"] {
        assert!(!v["summary"][key].is_null(), "{key}");
    }
    let est = v["summary"]["estimate"].as_f64().unwrap();
    let sigma = v["summary"]["sigma"].as_f64().unwrap();
    let steiner = v["summary"]["steiner"].as_f64().unwrap();
    assert!((est - steiner).abs() < 4.0 * sigma);
}

#[test]
fn help_exits_zero() {
    let o = lk(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("sweep"));
}
