use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn plap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plap")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(plap(&["domain", "--domain", "square:5"], d).status.code(), Some(0));
    assert_eq!(plap(&["eigen1", "--domain", "interval:11", "--p", "0.5"], d).status.code(), Some(2));
    assert_eq!(plap(&["eigen1", "--domain", "circle:11", "--p", "2"], d).status.code(), Some(2));
    assert_eq!(plap(&["eigen1", "--p", "2"], d).status.code(), Some(2));
    assert_eq!(plap(&["eigen1", "--no-such-flag"], d).status.code(), Some(2));
    assert_eq!(plap(&["poisson", "--domain", "mask:missing.txt", "--p", "2"], d).status.code(), Some(2));
    // Iteration budget exhausted is a solver failure.
    let o = plap(&["eigen1", "--domain", "interval:201", "--p", "3", "--max-iter", "1"], d);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_plap"))
        .args(["domain", "--domain", "square:5"])
        .env("PLAP_THREADS", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn first_eigenvalue_of_the_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let o = plap(&["eigen1", "--domain", "interval:1001", "--p", "2", "--report", "r.json"], dir.path());
    assert!(o.status.success());
    let r = read_json(&dir.path().join("r.json"));
    let lambda = r["results"][0]["lambda"].as_f64().unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((lambda - pi2).abs() / pi2 < 1e-4, "{lambda}");
    assert_eq!(r["positivity"]["positive"], Value::Bool(true));
}

#[test]
fn poisson_writes_field_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = plap(
        &[
            "poisson",
            "--domain",
            "square:17",
            "--p",
            "2",
            "--out",
            "out/w.f64",
            "--csv",
            "out/w.csv",
            "--report",
            "out/r.json",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let out = dir.path().join("out");
    assert_eq!(fs::metadata(out.join("w.f64")).unwrap().len(), 15 * 15 * 8);
    assert!(out.join("w.f64.json").exists());
    assert_eq!(fs::read_to_string(out.join("w.csv")).unwrap().lines().count(), 17 * 17 + 1);
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m.as_array().unwrap().len(), 1);
    assert_eq!(m[0]["outputs"].as_array().unwrap().len(), 4);

    // The solution feeds back in as a right-hand side.
    let o = plap(&["poisson", "--domain", "square:17", "--p", "3", "--rhs", "file:out/w.f64"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--domain", "interval:201", "--p-grid", "1.5:3.0:0.25", "--m-max", "2"];
    let run = |out: &str| {
        let mut a = args.to_vec();
        a.extend(["--out-dir", out]);
        let o = plap(&a, dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("0 violations"));
        fs::read(dir.path().join(out).join("records.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 8);
    let m = read_json(&dir.path().join("a/manifest.json"));
    // records.csv plus a field and sidecar per exponent.
    assert_eq!(m[0]["outputs"].as_array().unwrap().len(), 1 + 2 * 7);
    assert_eq!(m[0]["notes"]["mode"], Value::from("parallel"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"domain": "interval:101", "p": 3.0, "report": "r.json"}"#).unwrap();
    let o = plap(&["eigen1", "--config", "c.json", "--p", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("r.json"));
    assert_eq!(r["p"].as_f64(), Some(2.0));
    assert_eq!(r["domain"]["shape"][0].as_u64(), Some(101));
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m[0]["config"]["p"].as_f64(), Some(2.0));
    assert!(m[0]["inputs"].as_array().unwrap().iter().any(|i| i["path"].as_str().unwrap().ends_with("c.json")));

    fs::write(dir.path().join("bad.json"), r#"{"domian": "interval:101"}"#).unwrap();
    assert_eq!(plap(&["eigen1", "--config", "bad.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn manifest_appends() {
    let dir = tempfile::tempdir().unwrap();
    for p in ["2", "3"] {
        let o = plap(&["domain", "--domain", "interval:21", "--out", "m/meta.json"], dir.path());
        assert!(o.status.success());
        let o = plap(&["eigenm", "--domain", "interval:201", "--p", p, "--m", "2", "--report", "m/e.json"], dir.path());
        assert!(o.status.success());
    }
    let m = read_json(&dir.path().join("m/manifest.json"));
    let cmds: Vec<&str> = m.as_array().unwrap().iter().map(|e| e["command"].as_str().unwrap()).collect();
    assert_eq!(cmds, ["domain", "eigenm", "domain", "eigenm"]);
    let sha = m[3]["outputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(sha.len(), 64);
}

#[test]
fn eigenm_partitions() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("labels.txt"), "0111102220\n").unwrap();
    let o = plap(
        &["eigenm", "--domain", "interval:10", "--p", "2", "--partition", "file:labels.txt", "--report", "l.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("l.json"));
    assert_eq!(r["m"].as_u64(), Some(2));
    // The longer piece has the smaller energy; the bound is the larger one.
    let e: Vec<f64> = r["piece_energies"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(e[0] < e[1]);
    assert!((r["bound"].as_f64().unwrap() - e[1]).abs() < 1e-12 * e[1]);

    let o = plap(
        &[
            "eigenm",
            "--domain",
            "interval:401",
            "--p",
            "3",
            "--m",
            "3",
            "--partition",
            "optimize",
            "--report",
            "o.json",
        ],
        dir.path(),
    );
    assert!(o.status.success());
    let r = read_json(&dir.path().join("o.json"));
    let (b, c) = (r["bound"].as_f64().unwrap(), r["closed_form"].as_f64().unwrap());
    assert!((b - c).abs() / c < 0.015, "{b} vs {c}");

    let o = plap(&["eigenm", "--domain", "square:9", "--p", "2", "--m", "2", "--partition", "optimize"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_reports_and_persists() {
    let dir = tempfile::tempdir().unwrap();
    let o = plap(
        &["verify", "--suite", "picone", "--interval-nodes", "101", "--square-nodes", "9", "--report", "v.json"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stdout(&o));
    let r = read_json(&dir.path().join("v.json"));
    assert_eq!(r["passed"], Value::Bool(true));
    assert_eq!(plap(&["verify", "--suite", "nonsense"], dir.path()).status.code(), Some(2));
}
