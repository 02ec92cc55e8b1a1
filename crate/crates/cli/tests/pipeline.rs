use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn forklab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forklab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = forklab(dir, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    p.canonicalize().unwrap().display().to_string()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn full_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    let out = ok(d, &["forkgen", "guard", "--out", "r1", "--invocations", "200"]);
    assert!(out.starts_with("units="), "{out}");
    ok(d, &["forkgen", "loops", "--out", "r2", "--invocations", "300"]);
    assert!(d.join("r1").join("raw.csv").exists());

    let stats = ok(d, &["export", "r1", "r2", "--csv", "data.csv"]);
    assert!(stats.contains("raw=") && stats.contains("pct="), "{stats}");
    assert!(header(&d.join("data.csv")).starts_with("benchmark,"));

    ok(d, &["analyze", "histogram", "data.csv", "--out", "hist.csv"]);
    assert_eq!(header(&d.join("hist.csv")), "bin_center,tp,tn,fp,fn,total");
    let hist = fs::read_to_string(d.join("hist.csv")).unwrap();
    let tp: u64 = hist.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert!(tp >= 1, "the guarded loop should produce a true positive\n{hist}");

    ok(d, &["analyze", "classify", "data.csv", "--out", "classes.csv"]);
    assert!(d.join("classes.csv").exists());

    let peel = fixture("peel_model.json");
    ok(d, &["estimate", "data.csv", "--source", "heuristic", "--out", "heur.csv"]);
    let reduced = forklab(d, &["estimate", "data.csv", "--source", "model", "--model", &peel]);
    assert_eq!(reduced.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&reduced.stderr).contains("keep-all-features"));
    ok(d, &["export", "r1", "r2", "--csv", "full.csv", "--keep-all-features"]);
    ok(d, &["estimate", "full.csv", "--source", "model", "--model", &peel, "--out", "model.csv"]);
    assert!(d.join("model.csv").exists());
    ok(d, &["estimate", "data.csv", "--source", "best", "--out", "best.csv"]);
    let cmp = ok(d, &["compare", "heur.csv", "best.csv"]);
    assert!(!cmp.trim().is_empty());
}

#[test]
fn standardized_export_with_scaler() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["forkgen", "stencil", "--out", "r", "--opt", "unroll", "--invocations", "200"]);
    ok(d, &["export", "r", "--csv", "z.csv", "--standardize", "--no-filter"]);
    let scaler: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("scaler.json")).unwrap()).unwrap();
    let names = scaler["feature_names"].as_array().unwrap();
    assert!(names.len() >= 2);
    let model = serde_json::json!({
        "kind": "unroll-regressor",
        "feature_names": [names[0], names[1]],
        "scaler": {
            "mean": [scaler["mean"][0], scaler["mean"][1]],
            "std": [scaler["std"][0], scaler["std"][1]],
        },
        "weights": [[0.0, 0.0], [0.5, -0.5], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
        "bias": [0.0, 0.1, 0.2, 0.1, 0.0, 0.0],
    });
    fs::write(d.join("m.json"), model.to_string()).unwrap();
    ok(
        d,
        &["analyze", "classify", "z.csv", "--opt", "unroll", "--model", "m.json", "--scaler", "scaler.json", "--out", "c.csv"],
    );
    assert!(fs::read_to_string(d.join("c.csv")).unwrap().lines().count() > 1);
}

#[test]
fn predict_runs_with_both_fixtures() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let plain = ok(d, &["run", "loops", "--invocations", "50"]);
    let peeled = ok(d, &["predict", "loops", "--invocations", "50", "--model", &fixture("peel_model.json")]);
    let unrolled = ok(
        d,
        &["predict", "loops", "--opt", "unroll", "--invocations", "50", "--model", &fixture("unroll_model.json")],
    );
    assert_eq!(plain, peeled);
    assert_eq!(plain, unrolled);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(forklab(d, &["nonsense"]).status.code(), Some(1));
    assert_eq!(forklab(d, &["run", "no_such_program"]).status.code(), Some(1));
    fs::write(d.join("bad.ml"), "fn main() { return 1 / 0; }\n").unwrap();
    assert_eq!(forklab(d, &["run", "bad.ml", "--invocations", "1"]).status.code(), Some(2));
    fs::write(d.join("broken.csv"), "not,a,dataset\n1,2,3\n").unwrap();
    assert_eq!(forklab(d, &["analyze", "histogram", "broken.csv"]).status.code(), Some(3));
    let wrong_kind = forklab(d, &["predict", "loops", "--opt", "unroll", "--model", &fixture("peel_model.json")]);
    assert_eq!(wrong_kind.status.code(), Some(3));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("cfg.json"), r#"{"invocations": 3, "seed": 5}"#).unwrap();
    let from_cfg = ok(d, &["run", "fib", "--config", "cfg.json"]);
    assert_eq!(from_cfg.lines().count(), ok(d, &["run", "fib", "--invocations", "3", "--seed", "5"]).lines().count());
    let overridden = ok(d, &["run", "fib", "--config", "cfg.json", "--invocations", "6"]);
    assert_eq!(from_cfg, ok(d, &["run", "fib", "--invocations", "3", "--seed", "5"]));
    assert_eq!(overridden, ok(d, &["run", "fib", "--invocations", "6", "--seed", "5"]));
    assert_ne!(from_cfg, overridden);
}
