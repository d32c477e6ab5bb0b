use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qdefi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdefi")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const SMALL: &str = r#"
name = "small"
seeds = [1, 2]

[[assets]]
symbol = "SYN"
synthetic = { seed = 3, n = 252, s0 = 100.0, mu = 0.1, sigma = 0.5 }

[models.logit]
kind = "logistic_regression"

[models.forest]
kind = "random_forest"
forest = { n_estimators = 20, max_depth = 6, min_samples_split = 2 }
"#;

/// Every file below `dir` except the manifest, with its bytes.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_ingest_features_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = qdefi(&["synth", "--out", "bars.csv", "--bars", "150", "--seed", "9"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = qdefi(&["ingest", "bars.csv", "--symbol", "SYN", "--out", "clean.csv"], d);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("150 bars"));
    assert_eq!(fs::read(d.join("bars.csv")).unwrap(), fs::read(d.join("clean.csv")).unwrap());
    let o = qdefi(&["features", "bars.csv", "--set", "hybrid", "--out", "f.csv"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.join("f.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header.split(',').count(), 13, "{header}");
    assert_eq!(text.lines().count(), 151);
}

#[test]
fn bad_data_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.csv"), "timestamp,open,high,low,close,volume\n0,1,0.5,1,1,1\n").unwrap();
    assert_eq!(code(&qdefi(&["ingest", "bad.csv"], tmp.path())), 3);
    assert_eq!(code(&qdefi(&["ingest", "missing.csv"], tmp.path())), 3);
}

#[test]
fn bad_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("empty.toml"), "seeds = [1]\nassets = []\n[models]\n").unwrap();
    let o = qdefi(&["run", "--config", "empty.toml", "--out", "r"], d);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    fs::write(d.join("typo.toml"), SMALL.replace("kind = \"random_forest\"", "kind = \"random_forrest\"")).unwrap();
    assert_eq!(code(&qdefi(&["run", "--config", "typo.toml"], d)), 2);
    assert_eq!(code(&qdefi(&["run", "--config", "nope.toml"], d)), 2);
    assert_eq!(code(&qdefi(&["frobnicate"], d)), 2);
}

#[test]
fn failing_model_exits_4_with_context() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = SMALL.to_string()
        + "\n[models.tf]\nkind = \"transformer\"\ntransformer = { n_features = 122, window = 10, layers = 1, heads = 3, model_dim = 32, ffn_dim = 8 }\n";
    fs::write(d.join("exp.toml"), cfg).unwrap();
    let o = qdefi(&["run", "--config", "exp.toml", "--out", "r", "--jobs", "1"], d);
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("tf/SYN/seed"), "{err}");
}

#[test]
fn run_report_and_repeat_from_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("exp.toml"), SMALL).unwrap();
    let o = qdefi(&["run", "--config", "exp.toml", "--out", "a", "--jobs", "2"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("Rank") && stdout.contains("Max DD"), "{stdout}");

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 4);
    for f in manifest["files"].as_array().unwrap() {
        let bytes = fs::read(d.join("a").join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(bytes.len() as u64, f["bytes"].as_u64().unwrap());
    }
    for rel in ["tables/ranking.txt", "tables/significance.csv", "tables/uncertainty.json", "plots/equity_SYN.svg"] {
        assert!(d.join("a").join(rel).exists(), "{rel}");
    }

    let o = qdefi(&["run", "--config", "a/manifest.json", "--out", "b", "--jobs", "1"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (a, b) = (snapshot(&d.join("a")), snapshot(&d.join("b")));
    assert_eq!(a.len(), b.len());
    for ((pa, ba), (pb, bb)) in a.iter().zip(&b) {
        assert_eq!(pa, pb);
        assert!(ba == bb, "{} differs", pa.display());
    }

    fs::remove_dir_all(d.join("a/tables")).unwrap();
    let o = qdefi(&["report", "a", "--format", "text"], d);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(d.join("a/tables/ranking.txt")).unwrap(), fs::read(d.join("b/tables/ranking.txt")).unwrap());
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("exp.toml"), SMALL).unwrap();
    let o = qdefi(&["run", "--config", "exp.toml", "--out", "r", "--seed", "77", "--predict-ahead", "2", "--no-causal-mask"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = fs::read_to_string(d.join("r/config.toml")).unwrap();
    assert!(cfg.contains("base_seed = 77") && cfg.contains("predict_ahead = 2"), "{cfg}");
}
