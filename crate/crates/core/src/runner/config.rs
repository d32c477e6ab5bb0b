use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Result, RunnerError};
use crate::backtest::StrategySpec;
use crate::features::FeatureConfig;
use crate::hybrid::{QasaConfig, QrwkvConfig, TrainConfig, TransformerConfig};
use crate::labeling::LabelSpec;
use crate::market_data::GbmParams;
use crate::models::{BoostConfig, ForestConfig, LogitConfig, QsvmConfig, VqcConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    GradientBoosting,
    LogisticRegression,
    VqeClassifier,
    Qnn,
    Qsvm,
    QasaHybrid,
    QasaSequence,
    QuantumRwkv,
    Transformer,
}

/// Model families used for the aggregate tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelGroup {
    Classical,
    PureQuantum,
    HybridQuantum,
    Transformer,
}

impl ModelGroup {
    pub const ALL: [ModelGroup; 4] =
        [ModelGroup::Classical, ModelGroup::PureQuantum, ModelGroup::HybridQuantum, ModelGroup::Transformer];

    pub fn label(self) -> &'static str {
        match self {
            ModelGroup::Classical => "Classical",
            ModelGroup::PureQuantum => "Quantum",
            ModelGroup::HybridQuantum => "Hybrid",
            ModelGroup::Transformer => "Transformer",
        }
    }
}

impl ModelKind {
    pub const ALL: [ModelKind; 10] = [
        ModelKind::RandomForest,
        ModelKind::GradientBoosting,
        ModelKind::LogisticRegression,
        ModelKind::VqeClassifier,
        ModelKind::Qnn,
        ModelKind::Qsvm,
        ModelKind::QasaHybrid,
        ModelKind::QasaSequence,
        ModelKind::QuantumRwkv,
        ModelKind::Transformer,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoosting => "gradient_boosting",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::VqeClassifier => "vqe_classifier",
            ModelKind::Qnn => "qnn",
            ModelKind::Qsvm => "qsvm",
            ModelKind::QasaHybrid => "qasa_hybrid",
            ModelKind::QasaSequence => "qasa_sequence",
            ModelKind::QuantumRwkv => "quantum_rwkv",
            ModelKind::Transformer => "transformer",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "Random Forest",
            ModelKind::GradientBoosting => "Gradient Boosting",
            ModelKind::LogisticRegression => "Logistic Regression",
            ModelKind::VqeClassifier => "VQE Classifier",
            ModelKind::Qnn => "QNN",
            ModelKind::Qsvm => "QSVM",
            ModelKind::QasaHybrid => "QASA Hybrid",
            ModelKind::QasaSequence => "QASA Sequence",
            ModelKind::QuantumRwkv => "QuantumRWKV",
            ModelKind::Transformer => "Transformer",
        }
    }

    pub fn group(self) -> ModelGroup {
        use ModelKind::*;
        match self {
            RandomForest | GradientBoosting | LogisticRegression => ModelGroup::Classical,
            VqeClassifier | Qnn | Qsvm => ModelGroup::PureQuantum,
            QasaHybrid | QasaSequence | QuantumRwkv => ModelGroup::HybridQuantum,
            Transformer => ModelGroup::Transformer,
        }
    }

    pub fn default_features(self) -> FeatureConfig {
        match self.group() {
            ModelGroup::Classical | ModelGroup::Transformer => FeatureConfig::Full,
            ModelGroup::PureQuantum => FeatureConfig::Quantum6,
            ModelGroup::HybridQuantum => FeatureConfig::Hybrid,
        }
    }

    /// Feature counts accepted for this family.
    fn feature_range(self) -> std::ops::RangeInclusive<usize> {
        match self.group() {
            ModelGroup::Classical | ModelGroup::Transformer => 1..=crate::features::FULL_FEATURE_COUNT,
            ModelGroup::PureQuantum => 1..=8,
            ModelGroup::HybridQuantum => 1..=crate::features::FULL_FEATURE_COUNT,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// One model entry; unset sub-configurations take the model's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forest: Option<ForestConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boost: Option<BoostConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logistic: Option<LogitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vqc: Option<VqcConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qsvm: Option<QsvmConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qasa: Option<QasaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qrwkv: Option<QrwkvConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transformer: Option<TransformerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            features: None,
            forest: None,
            boost: None,
            logistic: None,
            vqc: None,
            qsvm: None,
            qasa: None,
            qrwkv: None,
            transformer: None,
            train: None,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        self.features.clone().unwrap_or_else(|| self.kind.default_features())
    }
}

/// Where an asset's bars come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetSpec {
    pub symbol: String,
    /// OHLCV CSV, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<GbmParams>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

fn default_ahead() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    /// Where `run` writes; not part of the experiment's identity, so never serialized.
    #[serde(default = "default_out", skip_serializing)]
    pub out_dir: PathBuf,
    /// Mixed into every per-run seed.
    #[serde(default)]
    pub base_seed: u64,
    /// Run indices; one run per (model, asset, entry).
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_ahead")]
    pub predict_ahead: usize,
    #[serde(default)]
    pub label: LabelSpec,
    #[serde(default)]
    pub strategy: StrategySpec,
    pub assets: Vec<AssetSpec>,
    /// Keyed by a free-form model id, used in file names and tables.
    pub models: BTreeMap<String, ModelSpec>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for a in &mut cfg.assets {
            if let Some(p) = &a.csv {
                if p.is_relative() {
                    a.csv = Some(base.join(p));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The 10-model matrix over one synthetic 252-bar series.
    pub fn paper_matrix() -> Self {
        Self {
            name: "paper-matrix".into(),
            out_dir: default_out(),
            base_seed: 0,
            seeds: default_seeds(),
            predict_ahead: 1,
            label: LabelSpec::default(),
            strategy: StrategySpec::default(),
            assets: vec![AssetSpec { symbol: "SYN".into(), csv: None, synthetic: Some(GbmParams::default()) }],
            models: ModelKind::ALL.iter().map(|&k| (k.id().to_string(), ModelSpec::new(k))).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RunnerError::Config(m));
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        if self.assets.is_empty() {
            return bad("at least one asset is required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.seeds {
            if !seen.insert(s) {
                return bad(format!("seed {s} is listed twice"));
            }
        }
        let mut symbols = std::collections::BTreeSet::new();
        for a in &self.assets {
            if a.symbol.is_empty() || !a.symbol.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return bad(format!("asset symbol `{}` must be non-empty [A-Za-z0-9_-]", a.symbol));
            }
            if !symbols.insert(&a.symbol) {
                return bad(format!("asset `{}` is listed twice", a.symbol));
            }
            if a.csv.is_some() == a.synthetic.is_some() {
                return bad(format!("asset `{}` needs exactly one of `csv` or `synthetic`", a.symbol));
            }
        }
        self.label.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        self.strategy.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        for (id, m) in &self.models {
            if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return bad(format!("model id `{id}` must be non-empty [A-Za-z0-9_-]"));
            }
            let n = match m.feature_config().names() {
                None => crate::features::FULL_FEATURE_COUNT,
                Some(v) => v.len(),
            };
            if !m.kind.feature_range().contains(&n) {
                return bad(format!("model `{id}` ({}) cannot take {n} features", m.kind));
            }
            if matches!(m.kind, ModelKind::VqeClassifier | ModelKind::Qnn) && n == 7 {
                return bad(format!("model `{id}` takes 1-6 or 8 features, got 7"));
            }
        }
        Ok(())
    }
}
