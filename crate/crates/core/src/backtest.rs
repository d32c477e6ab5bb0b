//! Signal-driven two-asset rebalancing, performance and classification metrics,
//! multi-run summaries and Welch's t-test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::stats::{mean, sample_std, sample_var};

pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Error, PartialEq)]
pub enum BacktestError {
    #[error("{signals} signals for {bars} bars")]
    MisalignedSignals { bars: usize, signals: usize },
    #[error("equity curve needs at least 2 points, got {0}")]
    DegenerateCurve(usize),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("need at least 2 runs, got {0}")]
    TooFewRuns(usize),
    #[error("each sample needs at least 2 values, got {0} and {1}")]
    TooFewValues(usize, usize),
    #[error("both samples are constant with different means")]
    ZeroVariancePair,
    #[error("non-finite value in input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, BacktestError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategySpec {
    /// Target weight of the base asset; the quote asset takes the rest.
    pub base_weight: f64,
    pub fee_bps: f64,
    pub initial_capital: f64,
}

impl Default for StrategySpec {
    fn default() -> Self {
        Self { base_weight: 0.5, fee_bps: 0.0, initial_capital: 10_000.0 }
    }
}

impl StrategySpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_weight) {
            return Err(BacktestError::InvalidStrategy(format!("base_weight {} outside [0, 1]", self.base_weight)));
        }
        if !(self.fee_bps >= 0.0 && self.fee_bps.is_finite()) {
            return Err(BacktestError::InvalidStrategy(format!("fee_bps {} must be >= 0", self.fee_bps)));
        }
        if !(self.initial_capital > 0.0 && self.initial_capital.is_finite()) {
            return Err(BacktestError::InvalidStrategy(format!("initial capital {}", self.initial_capital)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityCurve {
    pub timestamps: Vec<i64>,
    pub values: Vec<f64>,
    pub rebalanced: Vec<bool>,
}

/// Marks a base/quote portfolio to market at each close.
///
/// The portfolio starts at the target weights on the first close. On a 1-signal it
/// is reset to the target weights at that close, paying `fee_bps` of the traded
/// notional out of the portfolio.
pub fn simulate(timestamps: &[i64], closes: &[f64], signals: &[u8], spec: &StrategySpec) -> Result<EquityCurve> {
    spec.validate()?;
    if signals.len() != closes.len() || timestamps.len() != closes.len() {
        return Err(BacktestError::MisalignedSignals { bars: closes.len(), signals: signals.len() });
    }
    if closes.is_empty() {
        return Err(BacktestError::DegenerateCurve(0));
    }
    if closes.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(BacktestError::NonFinite);
    }
    let w = spec.base_weight;
    let fee = spec.fee_bps / 10_000.0;
    let mut base = spec.initial_capital * w / closes[0];
    let mut quote = spec.initial_capital * (1.0 - w);
    let mut values = Vec::with_capacity(closes.len());
    let mut rebalanced = Vec::with_capacity(closes.len());
    for (&p, &s) in closes.iter().zip(signals) {
        let mut v = base * p + quote;
        if s == 1 {
            let traded = (w * v - base * p).abs();
            v -= fee * traded;
            base = w * v / p;
            quote = (1.0 - w) * v;
        }
        values.push(v);
        rebalanced.push(s == 1);
    }
    Ok(EquityCurve { timestamps: timestamps.to_vec(), values, rebalanced })
}

/// Simple returns of consecutive curve points.
pub fn curve_returns(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

/// `μ/σ·√252` of daily returns (ddof 1); `None` when σ is 0 or undefined.
pub fn sharpe(returns: &[f64]) -> Option<f64> {
    if returns.len() < 2 {
        return None;
    }
    let s = sample_std(returns);
    (s > 0.0 && s.is_finite()).then(|| mean(returns) / s * TRADING_DAYS.sqrt())
}

/// Largest peak-to-trough decline as a fraction of the peak.
pub fn max_drawdown(v: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut mdd: f64 = 0.0;
    for &x in v {
        peak = peak.max(x);
        mdd = mdd.max((peak - x) / peak);
    }
    mdd
}

/// Area under the ROC curve via the rank statistic with average ranks for ties.
/// `None` when `labels` holds a single class.
pub fn auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n = scores.len();
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    let rank_sum: f64 = (0..n).filter(|&k| labels[k] == 1).map(|k| ranks[k]).sum();
    let (p, q) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    /// `(V_T − V_0)/V_0` as a fraction.
    pub total_return: f64,
    pub annualized_return: f64,
    pub sharpe: Option<f64>,
    /// Positive fraction of the peak.
    pub max_drawdown: f64,
    pub calmar: Option<f64>,
    /// Annualized standard deviation of daily returns.
    pub volatility: f64,
    pub rebalance_count: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

/// Scalar view of a report, keyed by metric name; undefined values are absent.
pub const METRIC_NAMES: [&str; 12] = [
    "total_return",
    "annualized_return",
    "sharpe",
    "max_drawdown",
    "calmar",
    "volatility",
    "rebalance_count",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "auc",
];

impl BacktestReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "total_return" => Some(self.total_return),
            "annualized_return" => Some(self.annualized_return),
            "sharpe" => self.sharpe,
            "max_drawdown" => Some(self.max_drawdown),
            "calmar" => self.calmar,
            "volatility" => Some(self.volatility),
            "rebalance_count" => Some(self.rebalance_count as f64),
            "accuracy" => Some(self.accuracy),
            "precision" => Some(self.precision),
            "recall" => Some(self.recall),
            "f1" => Some(self.f1),
            "auc" => self.auc,
            _ => None,
        }
    }
}

/// Trading metrics from the curve and classification metrics from `signals`
/// against `labels` (AUC from `probas`).
pub fn metrics(curve: &EquityCurve, signals: &[u8], labels: &[u8], probas: &[f64]) -> Result<BacktestReport> {
    let v = &curve.values;
    if v.len() < 2 {
        return Err(BacktestError::DegenerateCurve(v.len()));
    }
    if signals.len() != labels.len() || probas.len() != labels.len() {
        return Err(BacktestError::MisalignedSignals { bars: labels.len(), signals: signals.len() });
    }
    let r = curve_returns(v);
    let total_return = v[v.len() - 1] / v[0] - 1.0;
    let annualized_return = (1.0 + total_return).powf(TRADING_DAYS / r.len() as f64) - 1.0;
    let mdd = max_drawdown(v);
    let vol = if r.len() >= 2 { sample_std(&r) * TRADING_DAYS.sqrt() } else { 0.0 };

    let mut c = [[0usize; 2]; 2];
    for (&s, &y) in signals.iter().zip(labels) {
        c[(s == 1) as usize][(y == 1) as usize] += 1;
    }
    let (tp, fp, fn_, tn) = (c[1][1] as f64, c[1][0] as f64, c[0][1] as f64, c[0][0] as f64);
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Ok(BacktestReport {
        total_return,
        annualized_return,
        sharpe: sharpe(&r),
        max_drawdown: mdd,
        calmar: (mdd > 0.0).then(|| annualized_return / mdd),
        volatility: vol,
        rebalance_count: signals.iter().filter(|&&s| s == 1).count(),
        accuracy: ratio(tp + tn, tp + tn + fp + fn_),
        precision,
        recall,
        f1: ratio(2.0 * precision * recall, precision + recall),
        auc: auc(probas, labels),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; `None` with fewer than two defined values.
    pub std: Option<f64>,
    /// Runs where the metric was defined.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRunSummary {
    pub runs: usize,
    /// Metrics undefined in every run are absent.
    pub metrics: BTreeMap<String, MetricSummary>,
}

impl MultiRunSummary {
    pub fn get(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.get(name)
    }
}

/// Per-metric sample mean and standard deviation (ddof 1) over the runs where the
/// metric is defined.
pub fn aggregate_runs(reports: &[BacktestReport]) -> Result<MultiRunSummary> {
    if reports.len() < 2 {
        return Err(BacktestError::TooFewRuns(reports.len()));
    }
    let mut metrics = BTreeMap::new();
    for name in METRIC_NAMES {
        let xs: Vec<f64> = reports.iter().filter_map(|r| r.metric(name)).collect();
        if xs.is_empty() {
            continue;
        }
        let std = (xs.len() >= 2).then(|| sample_std(&xs));
        metrics.insert(name.to_string(), MetricSummary { mean: mean(&xs), std, n: xs.len() });
    }
    Ok(MultiRunSummary { runs: reports.len(), metrics })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
}

/// Welch's unequal-variance t-test. Two constant samples with the same mean give
/// `t = 0, p = 1`; with different means the statistic is undefined.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(BacktestError::TooFewValues(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(BacktestError::NonFinite);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (sample_var(a) / na, sample_var(b) / nb);
    let diff = mean(a) - mean(b);
    if sa + sb == 0.0 {
        return if diff == 0.0 {
            Ok(WelchResult { t: 0.0, df: na + nb - 2.0, p: 1.0 })
        } else {
            Err(BacktestError::ZeroVariancePair)
        };
    }
    let t = diff / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(WelchResult { t, df, p })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(n: usize) -> Vec<i64> {
        (0..n as i64).collect()
    }

    fn curve(v: &[f64]) -> EquityCurve {
        EquityCurve { timestamps: ts(v.len()), values: v.to_vec(), rebalanced: vec![false; v.len()] }
    }

    #[test]
    fn flat_price_keeps_capital() {
        let c = simulate(&ts(5), &[3.0; 5], &[0; 5], &StrategySpec::default()).unwrap();
        assert!(c.values.iter().all(|&v| v == 10_000.0));
    }

    #[test]
    fn untouched_half_appreciates() {
        let c = simulate(&ts(3), &[10.0, 15.0, 20.0], &[0; 3], &StrategySpec::default()).unwrap();
        assert!((c.values[2] - 15_000.0).abs() < 1e-9);
    }

    #[test]
    fn misaligned_signals() {
        let e = simulate(&ts(3), &[1.0; 3], &[0; 2], &StrategySpec::default()).unwrap_err();
        assert_eq!(e, BacktestError::MisalignedSignals { bars: 3, signals: 2 });
    }

    #[test]
    fn fee_reduces_value() {
        let p = [10.0, 12.0, 9.0, 11.0];
        let cheap = simulate(&ts(4), &p, &[0, 1, 1, 0], &StrategySpec::default()).unwrap();
        let dear = simulate(&ts(4), &p, &[0, 1, 1, 0], &StrategySpec { fee_bps: 30.0, ..Default::default() }).unwrap();
        assert!(dear.values[3] < cheap.values[3]);
    }

    #[test]
    fn metric_examples() {
        let r = metrics(&curve(&[100.0, 110.0]), &[0, 0], &[0, 1], &[0.2, 0.8]).unwrap();
        assert!((r.total_return - 0.10).abs() < 1e-15);
        assert_eq!(r.sharpe, None);
        assert_eq!(max_drawdown(&[1.0, 2.0, 3.0]), 0.0);
        assert!((max_drawdown(&[100.0, 120.0, 90.0, 105.0]) - 0.25).abs() < 1e-15);
        assert_eq!(metrics(&curve(&[1.0]), &[0], &[0], &[0.5]).unwrap_err(), BacktestError::DegenerateCurve(1));
    }

    #[test]
    fn sharpe_three_points() {
        // returns 0.1 and -0.05: mean 0.025, std 0.15/sqrt(2)
        let r = curve_returns(&[100.0, 110.0, 104.5]);
        let expected = 0.025 / (0.15 / 2f64.sqrt()) * 252f64.sqrt();
        assert!((sharpe(&r).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn auc_edge_cases() {
        let y = [0, 0, 1, 1];
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &y), Some(1.0));
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &y), Some(0.0));
        assert_eq!(auc(&[0.5; 4], &y), Some(0.5));
        assert_eq!(auc(&[0.5; 4], &[1; 4]), None);
    }

    #[test]
    fn classification_counts() {
        let c = curve(&[1.0, 1.0, 1.0, 1.0]);
        let r = metrics(&c, &[1, 1, 0, 0], &[1, 0, 1, 0], &[0.6, 0.7, 0.4, 0.3]).unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (0.5, 0.5, 0.5, 0.5));
        assert_eq!(r.rebalance_count, 2);
        assert_eq!(r.calmar, None);
    }

    #[test]
    fn aggregate_two_returns() {
        let base = metrics(&curve(&[100.0, 110.0, 105.0]), &[0; 2], &[0, 1], &[0.1, 0.9]).unwrap();
        let a = BacktestReport { total_return: 0.10, ..base.clone() };
        let b = BacktestReport { total_return: 0.12, ..base.clone() };
        let s = aggregate_runs(&[a, b]).unwrap();
        let tr = s.get("total_return").unwrap();
        assert!((tr.mean - 0.11).abs() < 1e-15);
        assert!((tr.std.unwrap() - 0.02 / 2f64.sqrt()).abs() < 1e-15);
        let same = aggregate_runs(&[base.clone(), base.clone()]).unwrap();
        assert!(same.metrics.values().all(|m| m.std == Some(0.0)));
        assert_eq!(aggregate_runs(&[base]).unwrap_err(), BacktestError::TooFewRuns(1));
    }

    #[test]
    fn welch_conventions() {
        let a = [1.0, 2.0, 3.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
        let c = welch_t_test(&[2.0; 3], &[2.0; 4]).unwrap();
        assert_eq!(c.p, 1.0);
        assert_eq!(welch_t_test(&[1.0; 3], &[2.0; 3]).unwrap_err(), BacktestError::ZeroVariancePair);
        let j = [1e-9, -1e-9, 2e-9, 0.0, -2e-9];
        let a: Vec<f64> = j.iter().map(|e| 1.0 + e).collect();
        let b: Vec<f64> = j.iter().rev().map(|e| 2.0 + e).collect();
        assert!(welch_t_test(&a, &b).unwrap().p < 1e-6);
    }
}
