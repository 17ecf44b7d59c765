use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn gne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gne")).args(args).output().expect("binary runs")
}

fn config(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs", name].iter().collect();
    p.to_str().unwrap().to_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn missing_config_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = gne(&["simulate", "--config", "/no/such/file.cfg", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read"));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[game]\nfamily = \"cournot\"\n\n[params]\nalpah = 3.0\n").unwrap();
    let out = dir.path().join("run");
    let o = gne(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpah") && err.contains("line 5"), "{err}");
    assert!(!out.exists());
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = gne(&[
            "simulate",
            &config("demand_response.cfg"),
            "--seed",
            seed,
            "--horizon",
            "1",
            "--step",
            "1e-3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(2), "{o:?}");
        std::fs::read(out.join("trajectory.csv")).unwrap()
    };
    let a = run("a", "11");
    assert_eq!(a, run("b", "11"));
    assert_ne!(a, run("c", "12"));
    let header = String::from_utf8_lossy(&a).lines().next().unwrap().to_owned();
    assert!(header.starts_with("t,x[0][0],"));
    assert!(header.ends_with("lambdabar[0],kkt_residual,consensus_disagreement,constraint_norm,lyapunov"));
}

#[test]
fn bounds_report_the_sufficient_gains() {
    let o = gne(&["bounds", "--config", &config("demand_response.cfg")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("f1_bar: 52.153"), "{text}");
    assert!(text.contains("alpha_min: 208.61"), "{text}");
    assert!(text.contains("beta_min: 152.000000"), "{text}");
    assert!(text.contains("alpha = 30: below bound"));
    assert!(text.contains("warning: alpha = 30 does not exceed"));
}

#[test]
fn solve_single_player_quadratic() {
    let dir = tempfile::tempdir().unwrap();
    let o = gne(&["solve", &config("quadratic.cfg"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let printed: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((floats(&printed["x_star"])[0] - 5.0).abs() < 1e-8);
    assert_eq!(read_json(&dir.path().join("solution.json")), printed);
}

#[test]
fn compare_on_demand_response() {
    let dir = tempfile::tempdir().unwrap();
    let o = gne(&["compare", &config("demand_response.cfg"), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("compare.json"));
    assert!(report["max_abs_diff"].as_f64().unwrap() <= 1e-2);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    assert!(!last.ends_with(','), "lyapunov column is filled");
}

#[test]
fn tracking_demo_writes_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = gne(&["tracking-demo", "--horizon", "6", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("sup error after t = 5"));
    let csv = std::fs::read_to_string(dir.path().join("tracking.csv")).unwrap();
    assert!(csv.starts_with("t,err[0],"));
}

#[test]
fn every_example_config_runs_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let mut names: Vec<String> = std::fs::read_dir(config(""))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".cfg"))
        .collect();
    names.sort();
    assert!(names.len() >= 4);
    for name in names {
        let out = dir.path().join(&name);
        let started = Instant::now();
        let o = gne(&["simulate", &config(&name), "--out", out.to_str().unwrap()]);
        let secs = started.elapsed().as_secs_f64();
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stdout(&o));
        assert!(secs < 60.0, "{name} took {secs:.1} s");
        let summary = read_json(&out.join("summary.json"));
        let x = floats(&summary["final_x"]);
        match name.as_str() {
            "demand_response.cfg" => {
                for (a, b) in x.iter().zip([45.2, 50.1, 55.0, 59.9, 64.8]) {
                    assert!((a - b).abs() <= 0.15, "{x:?}");
                }
            }
            "demand_response_unconstrained.cfg" => {
                for (a, b) in x.iter().zip([45.0, 46.4, 51.3, 56.2, 61.1]) {
                    assert!((a - b).abs() <= 0.15, "{x:?}");
                }
            }
            "cournot.cfg" => assert!(summary["constraint_norm"].as_f64().unwrap() <= 0.05),
            "quadratic.cfg" => assert!((x[0] - 5.0).abs() < 1e-3),
            _ => {}
        }
    }
}
