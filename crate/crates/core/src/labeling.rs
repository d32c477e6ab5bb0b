//! Binary rebalance labels and the chronological train/validation/test split.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::market_data::CandleSeries;

/// Minimum number of post-warm-up rows accepted by [`split`].
pub const MIN_USABLE_ROWS: usize = 20;
/// Minimum examples of each class in the training range.
pub const MIN_CLASS_COUNT: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("feature column `{0}` is missing")]
    MissingFeature(String),
    #[error("too few rows: {usable} usable after warm-up, {needed} needed")]
    TooFewRows { usable: usize, needed: usize },
    #[error("degenerate training labels: {zeros} zeros, {ones} ones")]
    DegenerateLabels { zeros: usize, ones: usize },
    #[error("invalid label spec: {0}")]
    InvalidSpec(String),
    #[error("series has {series} bars but the feature matrix has {features} rows")]
    Misaligned { series: usize, features: usize },
}

pub type Result<T> = std::result::Result<T, LabelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Close deviates from its 20-bar mean by more than `tau_rebalance`.
    #[default]
    AmmRebalance,
    /// Bollinger position is more than `bb_band` away from the middle.
    ConcentratedLiquidity,
    /// Absolute simple return exceeds `tau_price`.
    QuantumEnhanced,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::AmmRebalance, Task::ConcentratedLiquidity, Task::QuantumEnhanced];

    pub fn name(self) -> &'static str {
        match self {
            Task::AmmRebalance => "amm_rebalance",
            Task::ConcentratedLiquidity => "concentrated_liquidity",
            Task::QuantumEnhanced => "quantum_enhanced",
        }
    }

    fn column(self) -> &'static str {
        match self {
            Task::AmmRebalance => "price_ma_ratio",
            Task::ConcentratedLiquidity => "bb_position",
            Task::QuantumEnhanced => "returns",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelSpec {
    pub task: Task,
    pub tau_rebalance: f64,
    pub tau_price: f64,
    pub bb_band: f64,
}

impl Default for LabelSpec {
    fn default() -> Self {
        Self { task: Task::AmmRebalance, tau_rebalance: 0.02, tau_price: 0.01, bb_band: 0.3 }
    }
}

impl LabelSpec {
    pub fn for_task(task: Task) -> Self {
        Self { task, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("tau_rebalance", self.tau_rebalance), ("tau_price", self.tau_price), ("bb_band", self.bb_band)]
        {
            if !(v > 0.0 && v < 1.0) {
                return Err(LabelError::InvalidSpec(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    /// Label for one value of the task's source column. NaN gives 0.
    pub fn rule(&self, value: f64) -> u8 {
        let hit = match self.task {
            Task::AmmRebalance => (value - 1.0).abs() > self.tau_rebalance,
            Task::ConcentratedLiquidity => (value - 0.5).abs() > self.bb_band,
            Task::QuantumEnhanced => value.abs() > self.tau_price,
        };
        hit as u8
    }
}

/// Labels describing the condition of each bar (nowcast).
pub fn label(series: &CandleSeries, features: &FeatureMatrix, spec: &LabelSpec) -> Result<Vec<u8>> {
    spec.validate()?;
    if series.len() != features.n_rows() {
        return Err(LabelError::Misaligned { series: series.len(), features: features.n_rows() });
    }
    let name = spec.task.column();
    let col = features.column(name).ok_or_else(|| LabelError::MissingFeature(name.to_string()))?;
    Ok(col.iter().map(|&v| spec.rule(v)).collect())
}

/// Row ranges of a chronological split, in matrix row indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl Split {
    pub fn usable(&self) -> Range<usize> {
        self.train.start..self.test.end
    }
}

/// Sizes `(train, val, test)` for `n` rows with boundaries at `floor(0.7n)` and `floor(0.85n)`.
pub fn chronological_split(n: usize) -> (usize, usize, usize) {
    // integer arithmetic avoids 0.7·n rounding below an exact boundary
    let a = n * 70 / 100;
    let b = n * 85 / 100;
    (a, b - a, n - b)
}

/// 70/15/15 split of the rows after the warm-up prefix.
pub fn split(n_rows: usize, warm_up: usize) -> Result<Split> {
    let usable = n_rows.saturating_sub(warm_up);
    if usable < MIN_USABLE_ROWS {
        return Err(LabelError::TooFewRows { usable, needed: MIN_USABLE_ROWS });
    }
    let (tr, va, _) = chronological_split(usable);
    let a = warm_up + tr;
    let b = a + va;
    Ok(Split { train: warm_up..a, val: a..b, test: b..n_rows })
}

/// Features, aligned targets and split for one series.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    /// `labels[t]` is the target for feature row `t`: the rule evaluated at `t + predict_ahead`.
    /// Its length is `n_rows − predict_ahead`.
    pub labels: Vec<u8>,
    pub split: Split,
    pub predict_ahead: usize,
    pub spec: LabelSpec,
}

impl LabeledDataset {
    pub fn build(
        series: &CandleSeries,
        features: FeatureMatrix,
        spec: &LabelSpec,
        predict_ahead: usize,
    ) -> Result<Self> {
        let raw = label(series, &features, spec)?;
        let n = raw.len().saturating_sub(predict_ahead);
        let labels = raw[predict_ahead.min(raw.len())..].to_vec();
        let split = split(n, features.warm_up)?;
        Ok(Self { features, labels, split, predict_ahead, spec: *spec })
    }

    /// `(zeros, ones)` over `range`.
    pub fn class_balance(&self, range: Range<usize>) -> (usize, usize) {
        let ones = self.labels[range.clone()].iter().filter(|&&y| y == 1).count();
        (range.len() - ones, ones)
    }

    /// Fails when either class has fewer than [`MIN_CLASS_COUNT`] training rows.
    pub fn check_balance(&self) -> Result<()> {
        let (zeros, ones) = self.class_balance(self.split.train.clone());
        if zeros < MIN_CLASS_COUNT || ones < MIN_CLASS_COUNT {
            return Err(LabelError::DegenerateLabels { zeros, ones });
        }
        Ok(())
    }

    pub fn x(&self, range: Range<usize>) -> Vec<Vec<f64>> {
        self.features.rows[range].to_vec()
    }

    pub fn y(&self, range: Range<usize>) -> Vec<u8> {
        self.labels[range].to_vec()
    }
}
