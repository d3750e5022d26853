use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_asif");

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/sim40.csv")
}

fn asif(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .arg("--reproducible")
        .env("ASIF_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn matched(dir: &Path) -> PathBuf {
    ok(&asif(&["match", "--data", fixture().to_str().unwrap(), "--caps", "0.3"], dir));
    dir.join("matched.csv")
}

#[test]
fn match_test_infer_pipeline_covers_true_effect() {
    let dir = tempfile::tempdir().unwrap();
    let m = matched(dir.path());
    let m = m.to_str().unwrap();
    let result = json(&dir.path().join("match_result.json"));
    assert_eq!(result["manifest"], "match.manifest.json");
    let n_pairs = result["result"]["pairs"].as_array().unwrap().len();
    assert!(n_pairs >= 10);
    assert_eq!(fs::read_to_string(m).unwrap().lines().count(), 1 + 2 * n_pairs);

    ok(&asif(&["test-design", "--data", m, "--design", "paired", "--m", "500"], dir.path()));
    let t = json(&dir.path().join("test_design.json"));
    let p = t["result"]["run"]["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);

    ok(&asif(&["infer", "--data", m, "--design", "paired", "--grid", "-15:15:0.01", "--m", "1000"], dir.path()));
    let r = &json(&dir.path().join("infer.json"))["result"];
    let (lo, hi) = (r["ci_low"].as_f64().unwrap(), r["ci_high"].as_f64().unwrap());
    assert!(lo <= 1.0 && 1.0 <= hi, "[{lo}, {hi}]");

    ok(&asif(&["infer", "--data", m, "--design", "paired", "--method", "neyman"], dir.path()));
    assert_eq!(json(&dir.path().join("infer.json"))["result"]["method"], "neyman-paired");
}

#[test]
fn missing_treatment_column_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "a,b\n1,2\n3,4\n").unwrap();
    let o = asif(&["diagnose", "--data", data.to_str().unwrap(), "--designs", "complete"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`w`"));
}

#[test]
fn parse_errors_report_lines() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "a,w\n1,1\n2,0\nthree,1\n").unwrap();
    let o = asif(&["match", "--data", data.to_str().unwrap(), "--caps", "0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
}

#[test]
fn infeasible_and_empty_region_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let o = asif(&["match", "--data", f.to_str().unwrap(), "--caps", "0.3", "--min-pairs", "19"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let m = matched(dir.path());
    let o = asif(&["infer", "--data", m.to_str().unwrap(), "--design", "paired", "--grid", "60:61:0.5", "--m", "200"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let r = json(&dir.path().join("infer.json"));
    assert_eq!(r["result"]["diagnostics"]["nonempty_acceptance_region"], false);
}

#[test]
fn observed_outside_constrained_support_warns() {
    let dir = tempfile::tempdir().unwrap();
    let m = matched(dir.path());
    let smds = json(&dir.path().join("match_result.json"))["result"]["achieved_smds"].clone();
    let worst = smds.as_array().unwrap().iter().map(|v| v.as_f64().unwrap().abs()).fold(0.0, f64::max);
    let design = format!(r#"{{"kind":"constrained","caps":{}}}"#, 0.95 * worst);
    let o = asif(&["test-design", "--data", m.to_str().unwrap(), "--design", &design, "--m", "100"], dir.path());
    ok(&o);
    assert!(String::from_utf8_lossy(&o.stderr).contains("NotInSupport"));
    let t = json(&dir.path().join("test_design.json"));
    assert_eq!(t["result"]["warnings"][0]["warning"], "not_in_support");
}

#[test]
fn diagnose_writes_tables_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let m = matched(dir.path());
    ok(&asif(&["diagnose", "--data", m.to_str().unwrap(), "--designs", r#"["complete", "paired"]"#, "--m", "1000"], dir.path()));
    let density = fs::read_to_string(dir.path().join("density.svg")).unwrap();
    assert_eq!(density.matches(r#"class="density""#).count(), 2);
    assert_eq!(density.matches(r#"class="observed""#).count(), 1);
    assert!(!density.contains("generated"));
    let csv = fs::read_to_string(dir.path().join("diagnostic.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 1000);
    let summary = json(&dir.path().join("diagnostic.json"));
    assert_eq!(summary["result"]["designs"].as_array().unwrap().len(), 2);
    let manifest = json(&dir.path().join("diagnose.manifest.json"));
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["diagnostic.csv", "diagnostic.json", "love_plot.svg", "density.svg"]);
}

#[test]
fn svg_timestamp_only_without_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let m = matched(dir.path());
    let o = Command::new(BIN)
        .args(["diagnose", "--data", m.to_str().unwrap(), "--designs", "complete", "--m", "50", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    ok(&o);
    assert!(fs::read_to_string(dir.path().join("density.svg")).unwrap().contains("<!-- generated: "));
    assert!(json(&dir.path().join("diagnose.manifest.json"))["started_at"].is_u64());
}
