use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_finslerlab"))
}

fn manifests() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../manifests")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let m = manifests().join("rotation_example.json");
    let a = run(&["run", m.to_str().unwrap()]);
    let b = run(&["run", m.to_str().unwrap()]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn flat_parallel_report_matches_golden() {
    let m = manifests().join("flat_parallel_randers.json");
    let o = run(&["run", m.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/flat_parallel_randers.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &o.stdout).unwrap();
    }
    let want = std::fs::read_to_string(&golden).expect("golden file; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(stdout(&o), want);
}

#[test]
fn report_shape_and_float_format() {
    let m = manifests().join("flat_parallel_randers.json");
    let text = stdout(&run(&["run", m.to_str().unwrap()]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["verdict"], true);
    assert_eq!(v["manifest_sha256"].as_str().unwrap().len(), 64);
    assert!(v.get("timings_ms").is_none());
    // every lambda is exactly zero for a flat metric with a parallel form
    for p in v["points"].as_array().unwrap() {
        for s in p["samples"].as_array().unwrap() {
            assert_eq!(s["lambda"].as_f64().unwrap(), 0.0);
        }
    }
    assert!(text.contains("e+0") || text.contains("e-"), "floats use exponent notation");
}

#[test]
fn failing_checks_exit_nonzero() {
    let m = manifests().join("nonclosed_randers.json");
    let o = run(&["run", m.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rev = v["checks"].as_array().unwrap().iter().find(|c| c["name"] == "reversibility").unwrap();
    assert_eq!(rev["verdict"], false);
    assert!(rev["residuals"]["lambda_asymmetry"].as_f64().unwrap() > 1e-3);
    assert!(stderr(&o).contains("reversibility"));
}

#[test]
fn out_and_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let csv = dir.path().join("table.csv");
    let m = manifests().join("rotation_example.json");
    let o = run(&["run", m.to_str().unwrap(), "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let table = std::fs::read_to_string(&csv).unwrap();
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    let ib = header.iter().position(|h| h == "B").unwrap();
    let ik = header.iter().position(|h| h == "K").unwrap();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let b: f64 = rec[ib].parse().unwrap();
        let k: f64 = rec[ik].parse().unwrap();
        assert!((k + 1.0 / (1.0 - b).sqrt()).abs() < 1e-9, "B={b} K={k}");
        rows += 1;
    }
    assert_eq!(rows, 9);
    assert!(std::fs::read_to_string(&out).unwrap().contains("\"checks\""));
}

#[test]
fn seed_override_changes_random_points() {
    let m = manifests().join("rotation_example.json");
    let a = stdout(&run(&["run", m.to_str().unwrap()]));
    let b = stdout(&run(&["--seed", "99", "run", m.to_str().unwrap()]));
    let pa: serde_json::Value = serde_json::from_str(&a).unwrap();
    let pb: serde_json::Value = serde_json::from_str(&b).unwrap();
    assert_ne!(pa["points"], pb["points"]);
    assert_eq!(pb["engine"]["seed"], 99);
}

#[test]
fn tolerance_override_flips_verdict() {
    let m = manifests().join("rotation_example.json");
    let o = run(&["--tol", "einstein=1e-30", "run", m.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let bad = run(&["--tol", "bogus=1", "run", m.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("unknown tolerance"));
}

#[test]
fn manifest_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"dimension": 2, "metric": {"kind": "ppower", "a": [["1","0"],["0","1"]], "b": ["0","0"]}, "samples": {"points": [[0,0]]}, "checks": ["einstein"]}"#, "/metric/p"),
        (r#"{"dimension": 9, "metric": {"kind": "riemann", "a": []}, "samples": {"points": []}, "checks": []}"#, "/dimension"),
        (r#"{"dimension": 2, "metric": {"kind": "riemann", "a": [["1","x1 +"],["0","1"]]}, "samples": {"points": [[0,0]]}, "checks": ["einstein"]}"#, "/metric/a"),
    ];
    for (i, (text, pointer)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("m{i}.json"));
        std::fs::write(&path, text).unwrap();
        let o = run(&["run", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "case {i}");
        assert!(stderr(&o).contains(pointer), "case {i}: {}", stderr(&o));
    }
    let o = run(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_prints_partials() {
    let o = run(&["eval", "--expr", "x1^2*x2", "--at", "3,-2", "--order", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let p = &v["partials"];
    assert_eq!(p["0,0"].as_f64().unwrap(), -18.0);
    assert_eq!(p["1,0"].as_f64().unwrap(), -12.0);
    assert_eq!(p["0,1"].as_f64().unwrap(), 9.0);
    assert_eq!(p["2,0"].as_f64().unwrap(), -4.0);
    assert_eq!(p["1,1"].as_f64().unwrap(), 6.0);
    let bad = run(&["eval", "--expr", "x1 +", "--at", "1"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("byte"));
}

#[test]
fn verify_paper_filter_and_flip() {
    let o = run(&["verify-paper", "--filter", "killing"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("killing-deformation"));
    let flipped = run(&["verify-paper", "--filter", "ricci-identities", "--flip-convention"]);
    assert_eq!(flipped.status.code(), Some(1));
    assert!(stdout(&flipped).contains("FAIL"));
    let strict = run(&["verify-paper", "--filter", "rotation", "--tol", "1e-15"]);
    assert_eq!(strict.status.code(), Some(1));
    let none = run(&["verify-paper", "--filter", "no-such-anchor"]);
    assert_eq!(none.status.code(), Some(2));
}
