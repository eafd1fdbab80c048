use std::path::Path;
use std::process::{Command, Output};

fn guiscout(args: &[&str], home: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_guiscout"))
        .args(args)
        .env("GUISCOUT_HOME", home)
        .env_remove("GUISCOUT_EMBEDDER")
        .env_remove("GUISCOUT_GEN_ENDPOINT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn setup(home: &Path) {
    let fx = home.join("fx");
    let o = guiscout(&["fixture", fx.to_str().unwrap(), "--dim", "64"], home);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = guiscout(&["ingest", fx.join("manifest.jsonl").to_str().unwrap(), "--dim", "64"], home);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["ingested"], 17);
}

#[test]
fn ingest_then_search_through_the_home_directory() {
    let home = tempfile::tempdir().unwrap();
    setup(home.path());
    assert!(home.path().join("index/index.gsix").exists());
    let o = guiscout(&["search", "Health Monitoring Report", "--format", "lines", "-k", "3"], home.path());
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["rank"], 1);

    let o = guiscout(&["search", "login", "--filter", "platform=web", "--format", "json"], home.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["hits"].as_array().unwrap().iter().all(|h| h["record"]["platform"] == "web"));
}

#[test]
fn strict_ingest_fails_on_bad_records() {
    let home = tempfile::tempdir().unwrap();
    let fx = home.path().join("fx");
    guiscout(&["fixture", fx.to_str().unwrap(), "--dim", "64"], home.path());
    let o = guiscout(
        &["ingest", fx.join("manifest.jsonl").to_str().unwrap(), "--dim", "64", "--strict"],
        home.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 record(s) failed"));
}

#[test]
fn usage_errors_exit_with_two() {
    let home = tempfile::tempdir().unwrap();
    setup(home.path());
    for args in [
        vec!["search", "x", "--filter", "color=red"],
        vec!["search", "x", "--filter", "platform"],
        vec!["search", "  "],
        vec!["search", "x", "-k", "0"],
        vec!["search"],
        vec!["frobnicate"],
        vec!["generate", "--endpoint", "http://127.0.0.1:9", "--temperature", "2.5", "refine", "x"],
    ] {
        let o = guiscout(&args, home.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn operational_errors_exit_with_one() {
    let home = tempfile::tempdir().unwrap();
    let o = guiscout(&["search", "x"], home.path());
    assert_eq!(o.status.code(), Some(1));
    let o = guiscout(&["ingest", "/nonexistent/manifest.jsonl"], home.path());
    assert_eq!(o.status.code(), Some(1));
    let o = guiscout(&["generate", "--endpoint", "http://127.0.0.1:9", "refine", "x"], home.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn classify_prints_probabilities() {
    let home = tempfile::tempdir().unwrap();
    setup(home.path());
    let img = home.path().join("fx/images/screen-006.png");
    let o = guiscout(
        &["classify", img.to_str().unwrap(), "--index-dir", home.path().join("index").to_str().unwrap(),
          "--label", "login screen with password", "--label", "weather forecast"],
        home.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["label"], "login screen with password");
    let o = guiscout(&["classify", img.to_str().unwrap(), "--label", "a", "--label", "a"], home.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_reports_percentiles() {
    let home = tempfile::tempdir().unwrap();
    let ix = home.path().join("syn");
    let o = guiscout(&["synth", "--index-dir", ix.to_str().unwrap(), "-n", "500", "--dim", "64"], home.path());
    assert!(o.status.success());
    let out = home.path().join("report.json");
    let o = guiscout(
        &["bench", "--index-dir", ix.to_str().unwrap(), "--num-queries", "10", "--out", out.to_str().unwrap()],
        home.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let r: guiscout::bench::BenchReport = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert_eq!(r.corpus_size, 500);
    let e2e = r.op("end_to_end").unwrap();
    assert_eq!(e2e.count, 10);
    assert!(e2e.p50_ms <= e2e.p95_ms && e2e.p95_ms <= e2e.p99_ms);
}
