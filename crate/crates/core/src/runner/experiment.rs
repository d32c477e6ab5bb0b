use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AssetSpec, ExperimentConfig, ModelKind, ModelSpec};
use super::{derive_seed, report, sha256_hex, Result, RunnerError};
use crate::backtest::{metrics, simulate, BacktestReport, EquityCurve};
use crate::features::build_matrix;
use crate::features::FeatureConfig;
use crate::hybrid::{HybridKind, HybridModel, HybridSpec, Network, QasaConfig};
use crate::labeling::LabeledDataset;
use crate::market_data::{generate_gbm, load_csv, CandleSeries};
use crate::models::{
    Classifier, GradientBoosting, LogisticRegression, QnnModel, Qsvm, RandomForest, VqcConfig, VqeModel,
};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One asset's bars with labels on the full feature matrix.
#[derive(Debug, Clone)]
pub struct AssetData {
    pub symbol: String,
    pub series: CandleSeries,
    pub dataset: LabeledDataset,
}

pub fn prepare_asset(spec: &AssetSpec, cfg: &ExperimentConfig) -> Result<AssetData> {
    let data_err = |m: String| RunnerError::Data { asset: spec.symbol.clone(), message: m };
    let series = match (&spec.csv, &spec.synthetic) {
        (Some(path), None) => load_csv(path, &spec.symbol).map_err(|e| data_err(e.to_string()))?,
        (None, Some(p)) => generate_gbm(p).map_err(|e| data_err(e.to_string()))?,
        _ => return Err(RunnerError::Config(format!("asset `{}` needs one source", spec.symbol))),
    };
    let full = build_matrix(&series, &FeatureConfig::Full).map_err(|e| data_err(e.to_string()))?;
    let dataset =
        LabeledDataset::build(&series, full, &cfg.label, cfg.predict_ahead).map_err(|e| data_err(e.to_string()))?;
    dataset.check_balance().map_err(|e| data_err(e.to_string()))?;
    Ok(AssetData { symbol: spec.symbol.clone(), series, dataset })
}

/// Outcome of one (model, asset, run index) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model_id: String,
    pub kind: ModelKind,
    pub asset: String,
    pub run_index: u64,
    pub run_seed: u64,
    pub report: BacktestReport,
    pub curve: EquityCurve,
    pub probas: Vec<f64>,
    pub labels: Vec<u8>,
    /// Training loss per epoch for iteratively trained models.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub train_loss: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub val_loss: Vec<f64>,
    /// Trained tensors of hybrid models as `(name, rows, cols)` plus flat values.
    #[serde(skip)]
    pub checkpoint: Option<(Vec<(String, usize, usize)>, Vec<f64>)>,
}

impl RunRecord {
    pub fn run_id(&self) -> String {
        format!("{}__{}__{}", self.model_id, self.asset, self.run_index)
    }
}

impl AssetData {
    /// Labeled rows (`0..labels.len()`) restricted to the columns of `features`.
    pub fn model_rows(&self, features: &FeatureConfig) -> Result<Vec<Vec<f64>>> {
        let schema = &self.dataset.features.schema;
        let cols: Vec<usize> = match features.names() {
            None => (0..schema.len()).collect(),
            Some(names) => names
                .iter()
                .map(|n| schema.index_of(n).ok_or_else(|| RunnerError::Config(format!("unknown feature column `{n}`"))))
                .collect::<Result<_>>()?,
        };
        let rows = &self.dataset.features.rows[..self.dataset.labels.len()];
        Ok(rows.iter().map(|r| cols.iter().map(|&j| r[j]).collect()).collect())
    }
}

fn hybrid_spec(kind: HybridKind, m: &ModelSpec) -> HybridSpec {
    let mut spec = HybridSpec::default();
    if let Some(q) = &m.qasa {
        match kind {
            HybridKind::QasaHybrid => spec.qasa_hybrid = q.clone(),
            _ => spec.qasa_sequence = q.clone(),
        }
    }
    if let Some(q) = &m.qrwkv {
        spec.qrwkv = q.clone();
    }
    if let Some(t) = &m.transformer {
        spec.transformer = t.clone();
    }
    if let Some(t) = &m.train {
        spec.train = t.clone();
    }
    spec
}

/// Fits one model on the train split and backtests its test-split signals.
pub fn run_one(
    model_id: &str,
    spec: &ModelSpec,
    data: &AssetData,
    cfg: &ExperimentConfig,
    run_index: u64,
) -> Result<RunRecord> {
    let seed = derive_seed(cfg.base_seed, model_id, &data.symbol, run_index);
    let fail = |m: String| RunnerError::Run {
        model: model_id.to_string(),
        asset: data.symbol.clone(),
        seed: run_index,
        message: m,
    };
    let ds = &data.dataset;
    let split = &ds.split;
    let rows = data.model_rows(&spec.feature_config())?;
    let at = |r: &Range<usize>| rows[r.clone()].to_vec();
    let (x_train, y_train) = (at(&split.train), ds.y(split.train.clone()));
    let (x_val, y_val) = (at(&split.val), ds.y(split.val.clone()));
    let x_test = at(&split.test);

    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();
    let mut checkpoint = None;
    let probas = match spec.kind {
        ModelKind::RandomForest => RandomForest::fit(&x_train, &y_train, &spec.forest.unwrap_or_default(), seed)
            .map_err(|e| fail(e.to_string()))?
            .predict_proba(&x_test),
        ModelKind::GradientBoosting => {
            let m = GradientBoosting::fit(&x_train, &y_train, &spec.boost.unwrap_or_default(), seed)
                .map_err(|e| fail(e.to_string()))?;
            train_loss = m.loss_curve.clone();
            m.predict_proba(&x_test)
        }
        ModelKind::LogisticRegression => {
            let m = LogisticRegression::fit(&x_train, &y_train, &spec.logistic.unwrap_or_default())
                .map_err(|e| fail(e.to_string()))?;
            m.predict_proba(&x_test)
        }
        ModelKind::VqeClassifier => {
            let c = spec.vqc.unwrap_or_else(VqcConfig::vqe);
            let m = VqeModel::fit(&x_train, &y_train, Some((&x_val, &y_val)), &c, seed)
                .map_err(|e| fail(e.to_string()))?;
            train_loss = m.history.train_loss.clone();
            val_loss = m.history.val_loss.clone();
            m.predict_proba(&x_test)
        }
        ModelKind::Qnn => {
            let c = spec.vqc.unwrap_or_else(VqcConfig::qnn);
            let m = QnnModel::fit(&x_train, &y_train, Some((&x_val, &y_val)), &c, seed)
                .map_err(|e| fail(e.to_string()))?;
            train_loss = m.history.train_loss.clone();
            val_loss = m.history.val_loss.clone();
            m.predict_proba(&x_test)
        }
        ModelKind::Qsvm => {
            Qsvm::fit(&x_train, &y_train, &spec.qsvm.unwrap_or_default()).map_err(|e| fail(e.to_string()))?.predict_proba(&x_test)
        }
        ModelKind::QasaHybrid | ModelKind::QasaSequence | ModelKind::QuantumRwkv | ModelKind::Transformer => {
            let kind = match spec.kind {
                ModelKind::QasaHybrid => HybridKind::QasaHybrid,
                ModelKind::QasaSequence => HybridKind::QasaSequence,
                ModelKind::QuantumRwkv => HybridKind::Qrwkv,
                _ => HybridKind::Transformer,
            };
            let hs = hybrid_spec(kind, spec);
            let m = HybridModel::fit(kind, &hs, &rows, &ds.labels, split.train.clone(), split.val.clone(), seed)
                .map_err(|e| fail(e.to_string()))?;
            train_loss = m.history.train_loss.clone();
            val_loss = m.history.val_loss.clone();
            let store = m.net.store();
            let shapes = store.names.iter().zip(&store.tensors).map(|(n, t)| (n.clone(), t.rows, t.cols)).collect();
            checkpoint = Some((shapes, store.flat()));
            m.predict_range(&rows, split.test.clone()).map_err(|e| fail(e.to_string()))?
        }
    };
    let signals: Vec<u8> = probas.iter().map(|&p| (p >= 0.5) as u8).collect();
    let labels = ds.y(split.test.clone());
    let bars = &data.series.candles()[split.test.clone()];
    let ts: Vec<i64> = bars.iter().map(|c| c.timestamp).collect();
    let closes: Vec<f64> = bars.iter().map(|c| c.close).collect();
    let curve = simulate(&ts, &closes, &signals, &cfg.strategy).map_err(|e| fail(e.to_string()))?;
    let report = metrics(&curve, &signals, &labels, &probas).map_err(|e| fail(e.to_string()))?;
    Ok(RunRecord {
        model_id: model_id.to_string(),
        kind: spec.kind,
        asset: data.symbol.clone(),
        run_index,
        run_seed: seed,
        report,
        curve,
        probas,
        labels,
        train_loss,
        val_loss,
        checkpoint,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub run_id: String,
    pub model_id: String,
    pub asset: String,
    pub run_index: u64,
    pub run_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    pub runs: Vec<ManifestRun>,
    /// Wall-clock seconds per stage; the only non-reproducible values in a run directory.
    pub stage_seconds: BTreeMap<String, f64>,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| RunnerError::Artifact { path: path.display().to_string(), message: e.to_string() })
    }
}

/// All run records of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
}

fn io_err(path: &Path, e: std::io::Error) -> RunnerError {
    RunnerError::Io { path: path.display().to_string(), source: e }
}

pub(crate) fn write_file(root: &Path, rel: &str, bytes: &[u8], files: &mut Vec<FileEntry>) -> Result<()> {
    let path = root.join(rel);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
    files.push(FileEntry { path: rel.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
    Ok(())
}

/// Runs every (model, asset, seed) cell on a pool of `jobs` workers (0 = all cores)
/// and writes the run directory `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<(ResultBundle, Manifest)> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| RunnerError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let mut stages = BTreeMap::new();

    let t = Instant::now();
    let assets: Vec<AssetData> =
        pool.install(|| cfg.assets.par_iter().map(|a| prepare_asset(a, cfg)).collect::<Result<_>>())?;
    stages.insert("data".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let cells: Vec<(&String, &ModelSpec, &AssetData, u64)> = cfg
        .models
        .iter()
        .flat_map(|(id, m)| assets.iter().flat_map(move |a| cfg.seeds.iter().map(move |&s| (id, m, a, s))))
        .collect();
    let runs: Vec<RunRecord> =
        pool.install(|| cells.par_iter().map(|&(id, m, a, s)| run_one(id, m, a, cfg, s)).collect::<Result<_>>())?;
    stages.insert("fit_and_backtest".to_string(), t.elapsed().as_secs_f64());

    let bundle = ResultBundle { config: cfg.clone(), runs };
    let t = Instant::now();
    let mut files = write_bundle(&bundle, out)?;
    stages.insert("report".to_string(), t.elapsed().as_secs_f64());

    let cfg_text = cfg.to_toml();
    write_file(out, "config.toml", cfg_text.as_bytes(), &mut files)?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(cfg_text.as_bytes()),
        config: cfg.clone(),
        runs: bundle
            .runs
            .iter()
            .map(|r| ManifestRun {
                run_id: r.run_id(),
                model_id: r.model_id.clone(),
                asset: r.asset.clone(),
                run_index: r.run_index,
                run_seed: r.run_seed,
            })
            .collect(),
        stage_seconds: stages,
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = out.join(MANIFEST_FILE);
    fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    Ok((bundle, manifest))
}

/// Writes run records, checkpoints, loss curves and every report format.
pub fn write_bundle(bundle: &ResultBundle, out: &Path) -> Result<Vec<FileEntry>> {
    let mut files = Vec::new();
    for r in &bundle.runs {
        let id = r.run_id();
        let json = serde_json::to_string_pretty(r).expect("record serializes");
        write_file(out, &format!("runs/{id}.json"), json.as_bytes(), &mut files)?;
        if !r.train_loss.is_empty() {
            let mut csv = String::from("epoch,train_loss,val_loss\n");
            for (e, tl) in r.train_loss.iter().enumerate() {
                let vl = r.val_loss.get(e).copied().unwrap_or(f64::NAN);
                csv.push_str(&format!("{e},{tl:e},{vl:e}\n"));
            }
            write_file(out, &format!("loss/{id}.csv"), csv.as_bytes(), &mut files)?;
        }
        if let Some((shapes, values)) = &r.checkpoint {
            let meta = serde_json::json!({
                "run_id": id,
                "model": r.kind,
                "run_seed": r.run_seed,
                "dtype": "f64-le",
                "tensors": shapes.iter().map(|(n, rows, cols)| serde_json::json!({"name": n, "rows": rows, "cols": cols})).collect::<Vec<_>>(),
            });
            let blob: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
            write_file(out, &format!("checkpoints/{id}.json"), serde_json::to_string_pretty(&meta).expect("json").as_bytes(), &mut files)?;
            write_file(out, &format!("checkpoints/{id}.bin"), &blob, &mut files)?;
        }
    }
    for (rel, bytes) in report::render_all(bundle) {
        write_file(out, &rel, bytes.as_bytes(), &mut files)?;
    }
    Ok(files)
}

/// Reads a run directory written by [`run_experiment`].
pub fn load_bundle(dir: &Path) -> Result<ResultBundle> {
    let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
    let mut runs = Vec::with_capacity(manifest.runs.len());
    for r in &manifest.runs {
        let path: PathBuf = dir.join("runs").join(format!("{}.json", r.run_id));
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let rec: RunRecord = serde_json::from_str(&text)
            .map_err(|e| RunnerError::Artifact { path: path.display().to_string(), message: e.to_string() })?;
        runs.push(rec);
    }
    Ok(ResultBundle { config: manifest.config, runs })
}

impl ExperimentConfig {
    /// Uses the unmasked attention equation in every QASA Sequence model.
    pub fn disable_causal_mask(&mut self) {
        for m in self.models.values_mut() {
            if m.kind == ModelKind::QasaSequence {
                let q = m.qasa.clone().unwrap_or_else(QasaConfig::sequence);
                m.qasa = Some(QasaConfig { causal_mask: false, ..q });
            }
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML config, or the config embedded in a run manifest (`*.json`).
    pub fn load_any(path: &Path) -> Result<Self> {
        if path.extension().is_some_and(|e| e == "json") {
            let m = Manifest::load(path).map_err(|e| RunnerError::Config(e.to_string()))?;
            Ok(m.config)
        } else {
            Self::load(path)
        }
    }
}
