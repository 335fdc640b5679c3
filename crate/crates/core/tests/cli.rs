use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use evt_endpoint::endpoint::{fan, mominv_estimate};
use evt_endpoint::models_mc::{model_sample, ModelSpec};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evt-endpoint"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env("EVT_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_sample_csv(path: &Path) -> Vec<f64> {
    let s = model_sample(&ModelSpec::M4 { gamma: -0.3 }, 600, 5).unwrap();
    let mut text = String::from("id,x,year\n");
    for (i, v) in s.values().iter().enumerate() {
        text += &format!("{i},{v},{}\n", 1990 + i % 27);
    }
    fs::write(path, text).unwrap();
    s.values().to_vec()
}

#[test]
fn simulate_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = run(
        &["simulate", "--model", "4", "--gamma", "-0.5", "--n", "1000", "--replicates", "1", "--seed", "1"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["e_curve.csv", "mse_curve.csv", "errors_at_k0.csv", "pvalues.csv", "summary.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let e = fs::read_to_string(out.join("e_curve.csv")).unwrap();
    assert!(e.starts_with("k_star,estimator,value\n"));

    let out = dir.path().join("sim_t1");
    let o = run(
        &["simulate", "--model", "4", "--gamma", "-0.5", "--n", "400", "--replicates", "2", "--tests", "t1,gr"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let p = fs::read_to_string(out.join("pvalues.csv")).unwrap();
    assert!(p.contains(",T1,") && p.contains(",GREENWOOD,") && !p.contains(",GSTAR,"));
    let o = run(&["simulate", "--model", "4", "--gamma", "-0.5", "--tests", "bogus"], &dir.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_csv_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "x\n1.0\n2.0\nnot-a-number\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&["estimate", "--input", input.to_str().unwrap(), "--column", "x", "--k", "1"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 4"));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["frobnicate"], &out).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--model", "1", "--tau1", "2"], &out).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--model", "4", "--gamma", "0.5"], &out).status.code(), Some(2));
    let input = dir.path().join("in.csv");
    write_sample_csv(&input);
    let o = run(
        &["estimate", "--input", input.to_str().unwrap(), "--column", "x", "--unit-divisor", "1", "--alpha", "1.5"],
        &out,
    );
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["estimate", "--input", input.to_str().unwrap(), "--column", "nope"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn estimate_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    let values = write_sample_csv(&input);
    let before = fs::read(&input).unwrap();
    let out = dir.path().join("out");
    let o = run(
        &["estimate", "--input", input.to_str().unwrap(), "--column", "x", "--unit-divisor", "1", "--k", "60"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&input).unwrap(), before);

    let s = evt_endpoint::SortedSample::from_values(&values).unwrap();
    let mut reader = csv::Reader::from_path(out.join("estimates.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["k_star", "estimator", "value"]);
    let mut checked = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let k_star: usize = rec[0].parse().unwrap();
        let value: f64 = rec[2].parse().unwrap();
        let want = match &rec[1] {
            "FAN" => fan(&s, k_star / 2).unwrap().estimate,
            "MOMINV" => mominv_estimate(&s, k_star - 1).unwrap().estimate,
            _ => continue,
        };
        assert!((value - want).abs() <= 1e-12 * want.abs());
        checked += 1;
    }
    assert!(checked > 100);

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["k"], 60);
    let fan60 = summary["estimates"].as_array().unwrap().iter().find(|e| e["estimator"] == "FAN").unwrap();
    assert_eq!(fan60["estimate"].as_f64().unwrap(), fan(&s, 60).unwrap().estimate);
}

#[test]
fn test_domain_and_tail_prob() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    write_sample_csv(&input);
    let out = dir.path().join("tests");
    let o = run(&["test-domain", "--input", input.to_str().unwrap(), "--column", "x", "--unit-divisor", "1"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = fs::read_to_string(out.join("tests.csv")).unwrap();
    assert!(t.starts_with("k,test,raw,normalized,p_heavy,p_short\n"));
    for name in ["GSTAR", "RATIO", "GREENWOOD", "T1"] {
        assert!(t.contains(&format!(",{name},")), "{name} missing");
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["k_selection"].get("k_opt").is_some());

    let out = dir.path().join("tail");
    let o = run(
        &["tail-prob", "--input", input.to_str().unwrap(), "--column", "x", "--unit-divisor", "1", "--x", "0.99"],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(out.join("tail_prob.csv")).unwrap();
    for rec in reader.records() {
        let p: f64 = rec.unwrap()[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn trend_test_runs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    write_sample_csv(&input);
    let out = dir.path().join("trend");
    let o = run(
        &[
            "trend-test", "--input", input.to_str().unwrap(), "--column", "x", "--unit-divisor", "1",
            "--time-column", "year", "--threshold", "0.3,0.5",
        ],
        &out,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = fs::read_to_string(out.join("trend.csv")).unwrap();
    assert_eq!(t.lines().count(), 3);
    let mut reader = csv::Reader::from_path(out.join("trend.csv")).unwrap();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let l0: f64 = rec[2].parse().unwrap();
        let l1: f64 = rec[6].parse().unwrap();
        let p: f64 = rec[11].parse().unwrap();
        assert!(l1 >= l0 - 1e-6);
        assert!((0.0..=1.0).contains(&p));
    }
}
