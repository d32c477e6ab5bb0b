use std::collections::BTreeMap;

use qdefi_core::backtest::BacktestReport;
use qdefi_core::market_data::GbmParams;
use qdefi_core::runner::report::{self, Format, COLUMNS, RANKING_HEADER};
use qdefi_core::runner::{
    derive_seed, run_experiment, AssetSpec, ExperimentConfig, ModelKind, ModelSpec, ResultBundle, RunRecord,
};

fn config(models: &[(&str, ModelKind)], seeds: &[u64]) -> ExperimentConfig {
    ExperimentConfig {
        name: "t".into(),
        seeds: seeds.to_vec(),
        assets: vec![AssetSpec {
            symbol: "SYN".into(),
            csv: None,
            synthetic: Some(GbmParams { seed: 4, ..GbmParams::default() }),
        }],
        models: models.iter().map(|&(id, k)| (id.to_string(), ModelSpec::new(k))).collect(),
        ..ExperimentConfig::paper_matrix()
    }
}

#[test]
fn minimal_run_gives_one_report_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&[("lr", ModelKind::LogisticRegression)], &[1]);
    let (bundle, manifest) = run_experiment(&cfg, tmp.path(), 1).unwrap();
    assert_eq!(bundle.runs.len(), 1);
    assert_eq!(manifest.runs[0].run_seed, derive_seed(0, "lr", "SYN", 1));
    assert!(tmp.path().join("manifest.json").exists());
    assert!(tmp.path().join("runs/lr__SYN__1.json").exists());
    let paths: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    let mut sorted = paths.clone();
    sorted.sort();
    assert_eq!(paths, sorted);
}

#[test]
fn seeds_differ_per_cell() {
    let mut seen = std::collections::BTreeSet::new();
    for m in ["a", "b"] {
        for asset in ["X", "Y"] {
            for i in 1..=5 {
                assert!(seen.insert(derive_seed(7, m, asset, i)));
            }
        }
    }
    assert_ne!(derive_seed(7, "a", "X", 1), derive_seed(8, "a", "X", 1));
}

#[test]
fn validation_rejects_bad_configs() {
    let mut cfg = config(&[], &[1]);
    assert!(cfg.validate().is_err());
    cfg = config(&[("x", ModelKind::Qsvm)], &[]);
    assert!(cfg.validate().is_err());
    cfg = config(&[("x", ModelKind::Qsvm)], &[1, 1]);
    assert!(cfg.validate().is_err());
    cfg = config(&[("x", ModelKind::Qsvm)], &[1]);
    cfg.assets.clear();
    assert!(cfg.validate().is_err());
    cfg = config(&[("x", ModelKind::Qnn)], &[1]);
    cfg.models.get_mut("x").unwrap().features = Some(qdefi_core::features::FeatureConfig::Full);
    assert!(cfg.validate().is_err());
    assert!(ExperimentConfig::paper_matrix().validate().is_ok());
}

#[test]
fn config_roundtrips_through_toml() {
    let cfg = ExperimentConfig::paper_matrix();
    let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(cfg, back);
}

fn fake_run(id: &str, kind: ModelKind, i: u64, ret: f64, sharpe: Option<f64>) -> RunRecord {
    let report = BacktestReport {
        total_return: ret,
        annualized_return: ret * 2.0,
        sharpe,
        max_drawdown: 0.1 + ret.abs(),
        calmar: Some(ret * 2.0 / (0.1 + ret.abs())),
        volatility: 0.2 + 0.01 * i as f64,
        rebalance_count: 3,
        accuracy: 0.5,
        precision: 0.5,
        recall: 0.5,
        f1: 0.5,
        auc: None,
    };
    RunRecord {
        model_id: id.into(),
        kind,
        asset: "SYN".into(),
        run_index: i,
        run_seed: i,
        report,
        curve: qdefi_core::backtest::EquityCurve {
            timestamps: vec![0, 1, 2],
            values: vec![1.0, 1.0 + ret / 2.0, 1.0 + ret],
            rebalanced: vec![false; 3],
        },
        probas: vec![],
        labels: vec![],
        train_loss: vec![],
        val_loss: vec![],
        checkpoint: None,
    }
}

fn fake_bundle() -> ResultBundle {
    let specs = [
        ("rf", ModelKind::RandomForest, 0.05),
        ("gb", ModelKind::GradientBoosting, 0.03),
        ("qnn", ModelKind::Qnn, -0.02),
        ("qs", ModelKind::QasaSequence, 0.08),
        ("qr", ModelKind::QuantumRwkv, 0.01),
    ];
    let mut runs = Vec::new();
    for (id, k, base) in specs {
        for i in 1..=4u64 {
            let r = base + 0.003 * i as f64 * if i % 2 == 0 { 1.0 } else { -1.0 };
            runs.push(fake_run(id, k, i, r, Some(r * 20.0)));
        }
    }
    ResultBundle { config: config(&[], &[1]), runs }
}

#[test]
fn group_aggregates_are_means_of_member_means() {
    let b = fake_bundle();
    let rows = report::ranking(&b);
    let by_id: BTreeMap<&str, &report::ModelRow> = rows.iter().map(|r| (r.model_id.as_str(), r)).collect();
    for g in report::groups(&b) {
        for (_, m) in COLUMNS {
            let xs: Vec<f64> = g.models.iter().map(|id| by_id[id.as_str()].metrics[m].unwrap().mean).collect();
            let want = xs.iter().sum::<f64>() / xs.len() as f64;
            assert!((g.metrics[m].unwrap() - want).abs() <= 1e-12, "{} {m}", g.group);
        }
    }
    let labels: Vec<String> = report::groups(&b).into_iter().map(|g| g.group).collect();
    assert_eq!(labels, ["Classical", "Quantum", "Hybrid"]);
}

#[test]
fn ranking_is_sorted_by_sharpe_and_headers_are_exact() {
    let b = fake_bundle();
    let rows = report::ranking(&b);
    let ids: Vec<&str> = rows.iter().map(|r| r.model_id.as_str()).collect();
    assert_eq!(ids, ["qs", "rf", "gb", "qr", "qnn"]);
    let files: BTreeMap<String, String> = report::render(&b, Format::Text).into_iter().collect();
    let header = files["tables/ranking.txt"].lines().next().unwrap().to_string();
    let cells: Vec<&str> = header.split("  ").map(str::trim).filter(|c| !c.is_empty()).collect();
    assert_eq!(cells, RANKING_HEADER);
    let csv: BTreeMap<String, String> = report::render(&b, Format::Csv).into_iter().collect();
    for name in ["ranking", "uncertainty", "groups", "significance", "per_asset"] {
        let h = csv[&format!("tables/{name}.csv")].lines().next().unwrap().to_string();
        let cols: Vec<&str> = h.split(',').collect();
        let tail: Vec<&str> = cols.iter().rev().take(if name == "uncertainty" { 10 } else { 5 }).rev().copied().collect();
        if name == "uncertainty" {
            assert_eq!(tail[0], "Return mean");
            assert_eq!(tail[9], "Calmar std");
        } else {
            assert_eq!(tail, ["Return", "Sharpe", "Volatility", "Max DD", "Calmar"], "{name}");
        }
    }
}

#[test]
fn uncertainty_uses_sample_std() {
    let b = fake_bundle();
    let row = report::ranking(&b).into_iter().find(|r| r.model_id == "rf").unwrap();
    let xs: Vec<f64> = b.runs.iter().filter(|r| r.model_id == "rf").map(|r| r.report.total_return).collect();
    let m = xs.iter().sum::<f64>() / 4.0;
    let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0).sqrt();
    let s = row.metrics["total_return"].unwrap();
    assert!((s.mean - m).abs() < 1e-15 && (s.std.unwrap() - sd).abs() < 1e-15);
}

#[test]
fn significance_covers_every_pair() {
    let b = fake_bundle();
    let sig = report::significance(&b);
    assert_eq!(sig.len(), 10);
    for s in &sig {
        for (_, m) in COLUMNS {
            let p = s.p_values[m];
            assert!(p.is_none_or(|p| (0.0..=1.0).contains(&p)));
        }
    }
}

#[test]
fn svg_has_one_polyline_per_model_and_a_legend() {
    let b = fake_bundle();
    let files: BTreeMap<String, String> = report::render(&b, Format::Svg).into_iter().collect();
    for name in ["plots/equity_SYN.svg", "plots/drawdown_SYN.svg"] {
        let svg = &files[name];
        assert_eq!(svg.matches("<polyline").count(), 5);
        let legend = &svg[svg.find("class=\"legend\"").unwrap()..];
        assert_eq!(legend.matches("<text").count(), 5);
    }
}

#[test]
fn per_asset_has_mean_rows() {
    let b = fake_bundle();
    let rows = report::per_asset(&b);
    assert_eq!(rows.iter().filter(|r| r.asset == "MEAN").count(), 5);
}

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 2);
}
