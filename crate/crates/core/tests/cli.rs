use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adeqsim"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    exe().args(args).output().expect("spawn adeqsim")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn evaluate_writes_both_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = fixture("rts24");
    let o = run(&[
        "evaluate", "--config", path_str(&cfg), "--strategy", "coordinated", "--mode", "U3", "--index", "EGCS",
        "--scenarios", "2", "--out", path_str(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rel = read_json(&out.join("reliability.json"));
    assert_eq!(rel["strategy"], "coordinated");
    assert_eq!(rel["mode"], "U3");
    let cc = read_json(&out.join("cc.json"));
    assert_eq!(cc["index"], "EGCS");
    assert!(cc["capacity_mw"].as_f64().unwrap() >= 0.0);
}

#[test]
fn missing_config_exits_two_naming_the_path() {
    let o = run(&["evaluate", "--config", "/nowhere/sys.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nowhere/sys.json"));
}

#[test]
fn malformed_flags_and_documents_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"buses\": [").unwrap();
    let o = run(&["evaluate", "--config", path_str(&bad), "--out", path_str(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["evaluate", "--config", path_str(&fixture("smoke")), "--gamma", "1.5", "--out", path_str(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("fault3");
    let go = |dir: &str| {
        let out = tmp.path().join(dir);
        let o = run(&[
            "evaluate", "--config", path_str(&cfg), "--years", "5", "--seed", "7", "--scenarios", "1", "--emit-plots",
            "--out", path_str(&out),
        ]);
        assert!(o.status.success());
        (std::fs::read(out.join("reliability.json")).unwrap(), std::fs::read(out.join("convergence.csv")).unwrap())
    };
    let a = go("a");
    assert_eq!(a, go("b"));
    // Convergence export of a 5-year run has one row per year.
    let (_, rows) = read_csv(&tmp.path().join("a/convergence.csv"));
    assert_eq!(rows.len(), 5);
}

#[test]
fn plot_exports_are_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("plots");
    let cfg = fixture("rts24");
    let o = run(&["evaluate", "--config", path_str(&cfg), "--scenarios", "1", "--emit-plots", "--out", path_str(&out)]);
    assert!(o.status.success());
    let (header, rows) = read_csv(&out.join("operations.csv"));
    assert_eq!(header, ["hour", "unit", "soc", "charge_mw", "discharge_mw", "state"]);
    let units = 10;
    assert_eq!(rows.len(), 8760 * units);
    let mut seen = vec![vec![false; units]; 8760];
    for r in &rows {
        let (h, u): (usize, usize) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!(!seen[h][u], "hour {h} unit {u} twice");
        seen[h][u] = true;
        assert!(["normal", "emergency", "recovery"].contains(&r[5].as_str()));
    }
}

#[test]
fn one_point_sweep_matches_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("rts24");
    let spec = tmp.path().join("spec.json");
    std::fs::write(&spec, r#"{"parameter": "gamma", "values": [0.05], "strategy": "greedy", "mode": "U2"}"#).unwrap();
    let sweep_out = tmp.path().join("s");
    let eval_out = tmp.path().join("e");
    let common = ["--scenarios", "2", "--seed", "3"];
    let o = run(&[&["sweep", "--config", path_str(&cfg), "--sweep", path_str(&spec), "--out", path_str(&sweep_out)], &common[..]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&[
        &["evaluate", "--config", path_str(&cfg), "--strategy", "greedy", "--mode", "U2", "--gamma", "0.05", "--out", path_str(&eval_out)],
        &common[..],
    ]
    .concat());
    assert!(o.status.success());
    let (header, rows) = read_csv(&sweep_out.join("sweep.csv"));
    assert_eq!(rows.len(), 1);
    assert!(rows.iter().all(|r| r.len() == header.len()));
    let rel = read_json(&eval_out.join("reliability.json"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let cell = |name: &str| rows[0][col(name)].parse::<f64>().unwrap();
    assert_eq!(cell("eens_theoretical_mwh_per_yr"), rel["eens_theoretical_mwh_per_yr"].as_f64().unwrap());
    assert_eq!(cell("eens_practical_mwh_per_yr"), rel["eens_practical_mwh_per_yr"].as_f64().unwrap());
    assert_eq!(cell("lolp"), rel["lolp"].as_f64().unwrap());
}

#[test]
fn failed_sweep_rows_keep_the_rest() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"parameter": "res_penetration", "values": [1.5, 0.2], "strategy": "greedy", "mode": "U1",
            "fleet": {"template": "es", "placement": "bundled-with-rg", "power_fraction": 0.3, "duration_hours": 4}}"#,
    )
    .unwrap();
    let out = tmp.path().join("o");
    let cfg = fixture("rts24");
    let o = run(&["sweep", "--config", path_str(&cfg), "--sweep", path_str(&spec), "--scenarios", "1", "--emit-plots", "--out", path_str(&out)]);
    assert!(o.status.success());
    let (header, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(header.last().map(String::as_str), Some("error"));
    assert!(!rows[0].last().unwrap().is_empty());
    assert!(rows[1].last().unwrap().is_empty());
    assert!(rows[1][2].parse::<f64>().unwrap() > 0.0);
    let (curve_header, curve) = read_csv(&out.join("sweep_curve.csv"));
    assert_eq!(curve.len(), 1);
    assert!(curve.iter().all(|r| r.len() == curve_header.len()));
}

#[test]
fn fixtures_command_writes_loadable_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["fixtures", "--out", path_str(tmp.path())]);
    assert!(o.status.success());
    for name in adeqsim::fixtures::NAMES {
        let shipped = std::fs::read(fixture(name)).unwrap();
        let fresh = std::fs::read(tmp.path().join(format!("{name}.json"))).unwrap();
        assert_eq!(shipped, fresh, "{name}");
    }
}
