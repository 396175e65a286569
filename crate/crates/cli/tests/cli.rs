use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coalition-share"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn gen(dir: &Path, setting: u8, seed: u64) -> PathBuf {
    let path = dir.join(format!("s{setting}_{seed}.json"));
    run(&[
        "gen",
        "--setting",
        &setting.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        path.to_str().unwrap(),
    ]);
    path
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Header and rows of a CSV result, manifest comment lines dropped.
fn csv_rows(out: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with("# ")).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn gen_writes_seeded_scenario_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), 1, 42);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&a).unwrap()).unwrap();
    assert_eq!(doc["manifest"]["command"], "gen");
    assert_eq!(doc["manifest"]["seeds"], serde_json::json!([42]));
    assert_eq!(doc["providers"].as_array().unwrap().len(), 3);
    assert_eq!(doc["applications"].as_array().unwrap().len(), 9);
}

#[test]
fn repeated_runs_match_apart_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 3, 11);
    let s = s.to_str().unwrap();
    for args in [
        vec!["gpoa", "--scenario", s, "--order", "random:seed=5"],
        vec!["ppmpoa", "--scenario", s],
    ] {
        let mut a = json(&run(&args));
        let mut b = json(&run(&args));
        assert!(a["manifest"]["wall_time_ms"].as_f64().unwrap() >= 0.0);
        a.as_object_mut().unwrap().remove("manifest");
        b.as_object_mut().unwrap().remove("manifest");
        assert_eq!(a, b);
    }
}

#[test]
fn missing_scenario_exits_with_code_2() {
    let out = bin().args(["gpoa", "--scenario", "/no/such/scenario.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/scenario.json"));
}

#[test]
fn bad_ordering_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 1, 1);
    let out = bin()
        .args(["gpoa", "--scenario", s.to_str().unwrap(), "--order", "sideways"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn table3_lists_every_coalition() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 1, 42);
    let out = run(&["table3", "--scenario", s.to_str().unwrap()]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header[0], "coalition");
    assert_eq!(rows.len(), 7);
    let values: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let grand = rows.iter().find(|r| r[0] == "{1,2,3}").unwrap()[1].parse::<f64>().unwrap();
    assert!(values.iter().all(|&v| v <= grand));
    for row in &rows {
        assert!(row[row.len() - 4..].iter().all(|v| v == "pass"), "{row:?}");
    }
}

#[test]
fn table3_on_single_provider() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 1, 42);
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(&s).unwrap()).unwrap();
    doc["providers"].as_array_mut().unwrap().truncate(1);
    doc["applications"].as_array_mut().unwrap().truncate(3);
    let one = dir.path().join("one.json");
    std::fs::write(&one, doc.to_string()).unwrap();
    let out = run(&["table3", "--scenario", one.to_str().unwrap()]);
    assert_eq!(csv_rows(&out).1.len(), 1);
}

#[test]
fn compare_defaults_to_cdo() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 1, 42);
    let out = run(&["compare", "--scenario", s.to_str().unwrap()]);
    let (header, rows) = csv_rows(&out);
    assert_eq!(header, ["method", "provider", "utility", "satisfaction", "utilization", "fragmentation"]);
    let methods: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(methods.into_iter().collect::<Vec<_>>(), ["alone", "gpoa:cdo:k=0", "ppmpoa"]);
    assert_eq!(rows.len(), 12);
}

#[test]
fn report_reads_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 1, 42);
    let g = dir.path().join("g.json");
    run(&["gpoa", "--scenario", s.to_str().unwrap(), "--out", g.to_str().unwrap()]);
    let out = run(&["report", "--scenario", s.to_str().unwrap(), "--allocation", g.to_str().unwrap()]);
    let (_, rows) = csv_rows(&out);
    let sat: Vec<f64> = rows
        .iter()
        .filter(|r| r[0].starts_with("provider:") && r[1] == "satisfaction")
        .map(|r| r[2].parse().unwrap())
        .collect();
    assert_eq!(sat.len(), 3);
    assert!(sat.iter().all(|&v| (v - 1.0).abs() < 1e-9));
}

#[test]
fn verify_and_misreport_on_setting1() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 1, 42);
    let s = s.to_str().unwrap();
    for alg in ["gpoa", "ppmpoa"] {
        let v = json(&run(&["verify", "--scenario", s, "--algorithm", alg]));
        assert_eq!(v["result"]["passed"], true);
    }
    let m = json(&run(&["misreport", "--scenario", s, "--provider", "2", "--cap-factor", "0.5"]));
    let o = &m["result"]["outcome"];
    assert!(o["misreport"].as_f64().unwrap() <= o["truthful"].as_f64().unwrap() + 1e-6);
}

#[test]
fn ppmpoa_trace_has_one_row_per_match() {
    let dir = tempfile::tempdir().unwrap();
    let s = gen(dir.path(), 3, 5);
    let trace = dir.path().join("trace.csv");
    let out = run(&["ppmpoa", "--scenario", s.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    let matches = json(&out)["result"]["run"]["matches"].as_array().unwrap().len();
    let text = std::fs::read_to_string(&trace).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with("# ")).count() - 1;
    assert_eq!(rows, matches);
    assert!(matches > 0);
    assert_eq!(json(&out)["result"]["blocking_pairs"], serde_json::json!([]));
}
