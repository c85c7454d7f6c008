use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const GOLDEN: &str = r#"{
  "s0": [1.0, 1.0], "b": [0.0], "sigma": [[0.0], [0.2]], "T": 1.0, "periods": 1,
  "mu": [["0", "1/10"], ["1/10", "0"]],
  "claim": {"kind": "constant-physical", "vector": ["1", "0"]},
  "eps": [0.05, 0.1, 0.2, 0.4], "xi": [1.0, 0.0], "seed": 7, "n_paths": 500, "n_steps": 8
}"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conehedge"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn strings(v: &Value) -> Vec<Vec<String>> {
    serde_json::from_value(v.clone()).unwrap()
}

#[test]
fn cone_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GOLDEN);
    let out = run(&["cone"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let cone = read_json(&tmp.path().join("cone.json"));
    let gens = strings(&cone["generators"]);
    assert!(gens.contains(&vec!["11/10".into(), "-1/1".into()]));
    assert!(gens.contains(&vec!["-9/10".into(), "1/1".into()]));
    let duals = strings(&cone["dual_generators"]);
    assert!(duals.contains(&vec!["1/1".into(), "9/10".into()]));
    assert!(duals.contains(&vec!["1/1".into(), "11/10".into()]));
}

#[test]
fn superhedge_golden_root() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GOLDEN);
    let out = run(&["superhedge"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sets = read_json(&tmp.path().join("superhedge.json"));
    // Both leaves need one unit of cash and the stock is worth nothing in
    // the claim, so the root set is the solvency cone shifted by (1, 0).
    let root = &sets["0"];
    let mut rows: Vec<(Vec<String>, String)> = root["inequalities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| (serde_json::from_value(h["normal"].clone()).unwrap(), h["offset"].as_str().unwrap().to_string()))
        .collect();
    rows.sort();
    assert_eq!(
        rows,
        vec![
            (vec!["1/1".to_string(), "11/10".to_string()], "1/1".to_string()),
            (vec!["1/1".to_string(), "9/10".to_string()], "1/1".to_string()),
        ]
    );
    assert_eq!(strings(&root["vertices"]), vec![vec!["1/1".to_string(), "0/1".to_string()]]);
    let csv = fs::read_to_string(tmp.path().join("root_vertices.csv")).unwrap();
    assert_eq!(csv, "x1,x2\n1,0\n");
}

#[test]
fn artifacts_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GOLDEN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        for cmd in [&["eps"][..], &["eps", "--mode", "mc"], &["price", "--mode", "mc"], &["price"], &["tree"]] {
            let out = run(cmd, &cfg, dir);
            assert_eq!(out.status.code(), Some(0), "{cmd:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 4);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn seed_changes_monte_carlo_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &GOLDEN.replace(r#""vector": ["1", "0"]"#, r#""vector": ["0", "1"]"#));
    let read = |seed: &str| {
        let dir = tmp.path().join(seed);
        let out = run(&["price", "--mode", "mc", "--seed", seed], &cfg, &dir);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read_to_string(dir.join("price.json")).unwrap()
    };
    assert_ne!(read("1"), read("2"));
}

#[test]
fn errors_name_the_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write_config(tmp.path(), &GOLDEN.replace(r#""periods": 1"#, r#""periods": 1, "volatility": 3"#));
    let out = run(&["cone"], &unknown, tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["invariant"].as_str().unwrap().contains("RunConfig"));

    let zero = write_config(tmp.path(), &GOLDEN.replace(r#"["0", "1/10"], ["1/10", "0"]"#, r#"["0", "0"], ["0", "0"]"#));
    let out = run(&["cone"], &zero, tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["invariant"].as_str().unwrap().contains("round-trip"));
    let out = run(&["cone", "--allow-degenerate"], &zero, tmp.path());
    assert_eq!(out.status.code(), Some(0));

    let cfg = write_config(tmp.path(), GOLDEN);
    let out = run(&["decompose", "--alpha", "1,-1"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn decompose_default_alpha() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GOLDEN);
    let out = run(&["decompose"], &cfg, tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let v = read_json(&tmp.path().join("decompose.json"));
    assert_eq!(strings(&v["b"]), vec![vec!["0/1", "19/2"], vec!["21/2", "0/1"]]);
}

#[test]
fn verify_quick_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_conehedge"))
        .args(["verify", "--quick", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&tmp.path().join("verify.json"))["passed"], Value::Bool(true));
}
