//! Classical feature engineering over a [`CandleSeries`].
//!
//! The full schema has 122 columns in nine groups. Reduced selections feed the
//! hybrid (12 columns) and pure-quantum (6 or 8 columns) model families.

pub mod indicators;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use chrono::{DateTime, Datelike, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::CandleSeries;
use indicators as ind;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("series too short: {needed} bars needed, {got} available")]
    SeriesTooShort { needed: usize, got: usize },
    #[error("unknown base column `{0}`")]
    UnknownBaseColumn(String),
    #[error("lag must be >= 1")]
    ZeroLag,
    #[error("non-positive price at bar {0}")]
    NonPositivePrice(usize),
    #[error("timestamp {0} out of range")]
    BadTimestamp(i64),
    #[error("column `{name}` has NaN at row {row}, after the warm-up prefix")]
    NanAfterWarmUp { name: String, row: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Basic,
    MovingAverage,
    Technical,
    Volatility,
    Volume,
    Time,
    Microstructure,
    Lagged,
    Interaction,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 9] = [
        FeatureGroup::Basic,
        FeatureGroup::MovingAverage,
        FeatureGroup::Technical,
        FeatureGroup::Volatility,
        FeatureGroup::Volume,
        FeatureGroup::Time,
        FeatureGroup::Microstructure,
        FeatureGroup::Lagged,
        FeatureGroup::Interaction,
    ];

    /// Column count of this group in the full schema.
    pub fn full_count(self) -> usize {
        match self {
            FeatureGroup::Basic => 8,
            FeatureGroup::MovingAverage => 16,
            FeatureGroup::Technical => 15,
            FeatureGroup::Volatility => 12,
            FeatureGroup::Volume => 8,
            // 12 calendar columns plus a 12-way month one-hot block
            FeatureGroup::Time => 24,
            FeatureGroup::Microstructure => 8,
            FeatureGroup::Lagged => 25,
            FeatureGroup::Interaction => 6,
        }
    }
}

/// One computed feature column.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub group: FeatureGroup,
    pub values: Vec<f64>,
}

impl Column {
    fn new(name: impl Into<String>, group: FeatureGroup, values: Vec<f64>) -> Self {
        Self { name: name.into(), group, values }
    }

    /// Index of the first row from which the column is finite through the end.
    pub fn first_valid(&self) -> usize {
        self.values.iter().rposition(|v| !v.is_finite()).map_or(0, |i| i + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub groups: Vec<FeatureGroup>,
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn group_counts(&self) -> BTreeMap<FeatureGroup, usize> {
        let mut counts = BTreeMap::new();
        for g in &self.groups {
            *counts.entry(*g).or_insert(0) += 1;
        }
        counts
    }
}

/// Row-major feature values aligned with the source series.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    pub timestamps: Vec<i64>,
    pub rows: Vec<Vec<f64>>,
    /// Leading rows that contain NaN; every later row is finite.
    pub warm_up: usize,
}

impl FeatureMatrix {
    pub fn from_columns(timestamps: Vec<i64>, columns: Vec<Column>) -> Result<Self> {
        let n = timestamps.len();
        let warm_up = columns.iter().map(Column::first_valid).max().unwrap_or(0).min(n);
        let rows = (0..n).map(|t| columns.iter().map(|c| c.values[t]).collect()).collect();
        let schema = FeatureSchema {
            names: columns.iter().map(|c| c.name.clone()).collect(),
            groups: columns.iter().map(|c| c.group).collect(),
        };
        Ok(Self { schema, timestamps, rows, warm_up })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.schema.index_of(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn columns(&self) -> Vec<Column> {
        (0..self.n_cols())
            .map(|j| {
                Column::new(
                    self.schema.names[j].clone(),
                    self.schema.groups[j],
                    self.rows.iter().map(|r| r[j]).collect(),
                )
            })
            .collect()
    }

    /// Keeps the named columns, in the given order, recomputing the warm-up.
    pub fn select(&self, names: &[&str]) -> Result<FeatureMatrix> {
        let all = self.columns();
        let mut picked = Vec::with_capacity(names.len());
        for name in names {
            let c = all
                .iter()
                .find(|c| c.name == *name)
                .ok_or_else(|| FeatureError::UnknownBaseColumn(name.to_string()))?;
            picked.push(c.clone());
        }
        FeatureMatrix::from_columns(self.timestamps.clone(), picked)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "timestamp")?;
        for n in &self.schema.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (ts, row) in self.timestamps.iter().zip(&self.rows) {
            write!(w, "{ts}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn descriptor(&self) -> SchemaDescriptor {
        SchemaDescriptor {
            columns: self
                .schema
                .names
                .iter()
                .zip(&self.schema.groups)
                .map(|(name, group)| ColumnDescriptor { name: name.clone(), group: *group })
                .collect(),
            group_counts: self.schema.group_counts(),
            warm_up: self.warm_up,
            n_rows: self.n_rows(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnDescriptor {
    pub name: String,
    pub group: FeatureGroup,
}

/// JSON description of a matrix layout, for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaDescriptor {
    pub columns: Vec<ColumnDescriptor>,
    pub group_counts: BTreeMap<FeatureGroup, usize>,
    pub warm_up: usize,
    pub n_rows: usize,
}

/// Which columns a model family consumes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureConfig {
    Full,
    Hybrid,
    Quantum6,
    Quantum8,
    Custom(Vec<String>),
}

pub const HYBRID_FEATURES: [&str; 12] = [
    "returns",
    "log_returns",
    "price_ma_ratio",
    "high_low_ratio",
    "price_position",
    "rsi",
    "macd_histogram",
    "bb_position",
    "atr_ratio",
    "volatility_20",
    "volume_ratio_20",
    "order_flow_imbalance",
];

/// Primary feature of each of the six qubit lines, in qubit order.
pub const QUANTUM_FEATURES: [&str; 6] =
    ["price_momentum", "price_ma_ratio", "volatility_20", "rsi", "volume_ratio_20", "bb_position"];

/// Secondary angles carried on qubits 3 and 5 in 8-feature mode.
pub const QUANTUM_EXTRA_FEATURES: [&str; 2] = ["macd", "atr_ratio"];

impl FeatureConfig {
    /// Selected column names; `None` means the full schema.
    pub fn names(&self) -> Option<Vec<String>> {
        let owned = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        match self {
            FeatureConfig::Full => None,
            FeatureConfig::Hybrid => Some(owned(&HYBRID_FEATURES)),
            FeatureConfig::Quantum6 => Some(owned(&QUANTUM_FEATURES)),
            FeatureConfig::Quantum8 => {
                let mut v = owned(&QUANTUM_FEATURES);
                v.extend(owned(&QUANTUM_EXTRA_FEATURES));
                Some(v)
            }
            FeatureConfig::Custom(v) => Some(v.clone()),
        }
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureConfig::Full => write!(f, "full"),
            FeatureConfig::Hybrid => write!(f, "hybrid"),
            FeatureConfig::Quantum6 => write!(f, "quantum6"),
            FeatureConfig::Quantum8 => write!(f, "quantum8"),
            FeatureConfig::Custom(v) => write!(f, "custom({})", v.len()),
        }
    }
}

/// Columns in the full schema.
pub const FULL_FEATURE_COUNT: usize = 122;
/// Bars needed before every column of the full schema has a value.
pub const FULL_MIN_LENGTH: usize = 71;

pub const MA_PERIODS: [usize; 4] = [5, 10, 20, 50];
pub const VOLATILITY_WINDOWS: [usize; 4] = [5, 10, 20, 50];
pub const VOLUME_WINDOWS: [usize; 3] = [5, 10, 20];
pub const LAGS: [usize; 5] = [1, 2, 3, 5, 10];
pub const LAG_BASES: [&str; 5] = ["returns", "log_returns", "volume_ratio_20", "volatility_20", "rsi"];
/// VR_20 above this marks a volume event.
pub const VOLUME_SIGNAL_THRESHOLD: f64 = 1.5;

fn require(series: &CandleSeries, needed: usize) -> Result<()> {
    if series.len() < needed {
        return Err(FeatureError::SeriesTooShort { needed, got: series.len() });
    }
    Ok(())
}

struct Ohlcv {
    open: Vec<f64>,
    high: Vec<f64>,
    low: Vec<f64>,
    close: Vec<f64>,
    volume: Vec<f64>,
}

impl Ohlcv {
    fn of(series: &CandleSeries) -> Self {
        let c = series.candles();
        Self {
            open: c.iter().map(|c| c.open).collect(),
            high: c.iter().map(|c| c.high).collect(),
            low: c.iter().map(|c| c.low).collect(),
            close: c.iter().map(|c| c.close).collect(),
            volume: c.iter().map(|c| c.volume).collect(),
        }
    }
}

fn ratio(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x / y).collect()
}

fn product(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Returns, log returns, price/MA ratios, high/low ratio, bar position and momentum.
pub fn compute_basic(series: &CandleSeries) -> Result<Vec<Column>> {
    require(series, 21)?;
    let d = Ohlcv::of(series);
    let sma20 = ind::sma(&d.close, 20);
    let position = (0..d.close.len())
        .map(|t| {
            let range = d.high[t] - d.low[t];
            if range == 0.0 {
                0.5
            } else {
                (d.close[t] - d.low[t]) / range
            }
        })
        .collect();
    use FeatureGroup::Basic as G;
    Ok(vec![
        Column::new("returns", G, ind::simple_returns(&d.close)),
        Column::new("log_returns", G, ind::log_returns(&d.close)),
        Column::new("price_ma_ratio", G, ratio(&d.close, &sma20)),
        Column::new("high_low_ratio", G, ratio(&d.high, &d.low)),
        Column::new("price_position", G, position),
        Column::new("price_momentum", G, ind::momentum(&d.close, 5)),
        Column::new("price_sma_20_ratio", G, ratio(&d.close, &sma20)),
        Column::new("price_momentum_10", G, ind::momentum(&d.close, 10)),
    ])
}

/// SMA and EMA of the close for each period, plus close-to-average ratios.
pub fn compute_moving_averages(series: &CandleSeries, periods: &[usize]) -> Result<Vec<Column>> {
    require(series, periods.iter().copied().max().unwrap_or(1))?;
    let close = series.closes();
    let g = FeatureGroup::MovingAverage;
    let smas: Vec<Vec<f64>> = periods.iter().map(|&n| ind::sma(&close, n)).collect();
    let emas: Vec<Vec<f64>> = periods.iter().map(|&n| ind::ema(&close, n)).collect();
    let mut cols = Vec::with_capacity(periods.len() * 4);
    for (n, v) in periods.iter().zip(&smas) {
        cols.push(Column::new(format!("sma_{n}"), g, v.clone()));
    }
    for (n, v) in periods.iter().zip(&emas) {
        cols.push(Column::new(format!("ema_{n}"), g, v.clone()));
    }
    for (n, v) in periods.iter().zip(&smas) {
        cols.push(Column::new(format!("close_sma_{n}_ratio"), g, ratio(&close, v)));
    }
    for (n, v) in periods.iter().zip(&emas) {
        cols.push(Column::new(format!("close_ema_{n}_ratio"), g, ratio(&close, v)));
    }
    Ok(cols)
}

pub fn compute_rsi(series: &CandleSeries, period: usize) -> Result<Vec<f64>> {
    require(series, period + 1)?;
    Ok(ind::rsi(&series.closes(), period))
}

/// `(macd, signal, histogram)` from EMA_12 − EMA_26 and its EMA_9.
pub fn compute_macd(series: &CandleSeries) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    require(series, 35)?;
    let close = series.closes();
    let fast = ind::ema(&close, 12);
    let slow = ind::ema(&close, 26);
    let macd: Vec<f64> = fast.iter().zip(&slow).map(|(a, b)| a - b).collect();
    let signal = ind::ema(&macd, 9);
    let hist = macd.iter().zip(&signal).map(|(m, s)| m - s).collect();
    Ok((macd, signal, hist))
}

/// Bollinger middle/upper/lower/width/position with sample σ.
pub struct Bollinger {
    pub middle: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub width: Vec<f64>,
    pub position: Vec<f64>,
}

pub fn compute_bollinger(series: &CandleSeries, period: usize, k: f64) -> Result<Bollinger> {
    require(series, period)?;
    let close = series.closes();
    let middle = ind::sma(&close, period);
    let sd = ind::rolling_std(&close, period);
    let upper: Vec<f64> = middle.iter().zip(&sd).map(|(m, s)| m + k * s).collect();
    let lower: Vec<f64> = middle.iter().zip(&sd).map(|(m, s)| m - k * s).collect();
    let mut width = vec![f64::NAN; close.len()];
    let mut position = vec![f64::NAN; close.len()];
    for t in 0..close.len() {
        if middle[t].is_nan() {
            continue;
        }
        let band = upper[t] - lower[t];
        width[t] = band / middle[t];
        position[t] = if band == 0.0 { 0.5 } else { (close[t] - lower[t]) / band };
    }
    Ok(Bollinger { middle, upper, lower, width, position })
}

/// `(true_range, atr, atr_ratio)`.
pub fn compute_atr(series: &CandleSeries, period: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    require(series, period + 1)?;
    let d = Ohlcv::of(series);
    let tr = ind::true_range(&d.high, &d.low, &d.close);
    let atr = ind::sma(&tr, period);
    let atr_ratio = ratio(&atr, &d.close);
    Ok((tr, atr, atr_ratio))
}

fn technical_columns(series: &CandleSeries) -> Result<Vec<Column>> {
    let close = series.closes();
    let (macd, signal, hist) = compute_macd(series)?;
    let bb = compute_bollinger(series, 20, 2.0)?;
    let (tr, atr, atr_ratio) = compute_atr(series, 14)?;
    let g = FeatureGroup::Technical;
    Ok(vec![
        Column::new("rsi", g, compute_rsi(series, 14)?),
        Column::new("macd_ratio", g, ratio(&macd, &close)),
        Column::new("macd", g, macd),
        Column::new("macd_signal", g, signal),
        Column::new("macd_histogram", g, hist),
        Column::new("bb_middle", g, bb.middle),
        Column::new("bb_upper", g, bb.upper),
        Column::new("bb_lower", g, bb.lower),
        Column::new("bb_width", g, bb.width),
        Column::new("bb_position", g, bb.position),
        Column::new("true_range", g, tr),
        Column::new("atr", g, atr),
        Column::new("atr_ratio", g, atr_ratio),
        Column::new("rsi_7", g, compute_rsi(series, 7)?),
        Column::new("rsi_21", g, compute_rsi(series, 21)?),
    ])
}

/// Rolling σ of returns per window, EWMA σ (λ = 0.94), volatility of σ_20 over
/// 10 bars, the σ_20 regime flag against its trailing 50-bar 80th percentile,
/// rolling σ of log returns, and 20-bar Parkinson volatility.
pub fn compute_volatility(series: &CandleSeries, windows: &[usize]) -> Result<Vec<Column>> {
    require(series, FULL_MIN_LENGTH)?;
    let d = Ohlcv::of(series);
    let r = ind::simple_returns(&d.close);
    let lr = ind::log_returns(&d.close);
    let g = FeatureGroup::Volatility;
    let sigma20 = ind::rolling_std(&r, 20);
    let mut cols: Vec<Column> = windows
        .iter()
        .map(|&n| Column::new(format!("volatility_{n}"), g, ind::rolling_std(&r, n)))
        .collect();
    cols.push(Column::new("ewma_volatility", g, ind::ewma_volatility(&r, &sigma20, ind::EWMA_LAMBDA)));
    cols.push(Column::new("vol_of_vol", g, ind::rolling_std(&sigma20, 10)));
    cols.push(Column::new("vol_regime", g, ind::regime(&sigma20, 50, 0.8)));
    for &n in windows {
        cols.push(Column::new(format!("log_volatility_{n}"), g, ind::rolling_std(&lr, n)));
    }
    cols.push(Column::new("parkinson_volatility_20", g, ind::parkinson(&d.high, &d.low, 20)));
    Ok(cols)
}

/// Volume ratios, volume-price trend, OBV, the VR_20 event flag and log-volume terms.
pub fn compute_volume_features(series: &CandleSeries, windows: &[usize]) -> Result<Vec<Column>> {
    require(series, 21)?;
    let d = Ohlcv::of(series);
    let r = ind::simple_returns(&d.close);
    let g = FeatureGroup::Volume;
    let mut cols: Vec<Column> = windows
        .iter()
        .map(|&n| Column::new(format!("volume_ratio_{n}"), g, ind::volume_ratio(&d.volume, n)))
        .collect();
    let vr20 = ind::volume_ratio(&d.volume, 20);
    let signal = vr20
        .iter()
        .map(|v| if v.is_nan() { f64::NAN } else if *v > VOLUME_SIGNAL_THRESHOLD { 1.0 } else { 0.0 })
        .collect();
    let log_volume: Vec<f64> = d.volume.iter().map(|v| v.ln_1p()).collect();
    let mut log_change = vec![f64::NAN; d.volume.len()];
    for t in 1..d.volume.len() {
        log_change[t] = log_volume[t] - log_volume[t - 1];
    }
    cols.push(Column::new("vpt", g, product(&d.volume, &r)));
    cols.push(Column::new("obv", g, ind::obv(&d.close, &d.volume)));
    cols.push(Column::new("volume_signal", g, signal));
    cols.push(Column::new("log_volume", g, log_volume));
    cols.push(Column::new("log_volume_change", g, log_change));
    Ok(cols)
}

/// Calendar features from the UTC timestamp. Day of week counts from Monday = 0.
pub fn compute_time_features(series: &CandleSeries) -> Result<Vec<Column>> {
    let n = series.len();
    let g = FeatureGroup::Time;
    let mut hour = Vec::with_capacity(n);
    let mut dow = Vec::with_capacity(n);
    let mut month = Vec::with_capacity(n);
    let mut dom = Vec::with_capacity(n);
    for c in series.candles() {
        let dt = DateTime::from_timestamp(c.timestamp, 0).ok_or(FeatureError::BadTimestamp(c.timestamp))?;
        hour.push(dt.hour() as f64);
        dow.push(dt.weekday().num_days_from_monday() as f64);
        month.push(dt.month() as f64);
        dom.push(dt.day() as f64);
    }
    let tau = std::f64::consts::TAU;
    let cyc = |xs: &[f64], period: f64, offset: f64, f: fn(f64) -> f64| -> Vec<f64> {
        xs.iter().map(|x| f(tau * (x - offset) / period)).collect()
    };
    let mut cols = vec![
        Column::new("hour_sin", g, cyc(&hour, 24.0, 0.0, f64::sin)),
        Column::new("hour_cos", g, cyc(&hour, 24.0, 0.0, f64::cos)),
        Column::new("dow_sin", g, cyc(&dow, 7.0, 0.0, f64::sin)),
        Column::new("dow_cos", g, cyc(&dow, 7.0, 0.0, f64::cos)),
        Column::new("month_sin", g, cyc(&month, 12.0, 1.0, f64::sin)),
        Column::new("month_cos", g, cyc(&month, 12.0, 1.0, f64::cos)),
        Column::new("dom_sin", g, cyc(&dom, 31.0, 1.0, f64::sin)),
        Column::new("dom_cos", g, cyc(&dom, 31.0, 1.0, f64::cos)),
    ];
    for m in 1..=12 {
        let onehot = month.iter().map(|&x| if x == m as f64 { 1.0 } else { 0.0 }).collect();
        cols.push(Column::new(format!("month_{m:02}"), g, onehot));
    }
    cols.push(Column::new("hour", g, hour));
    cols.push(Column::new("day_of_week", g, dow));
    cols.push(Column::new("month", g, month));
    cols.push(Column::new("day_of_month", g, dom));
    Ok(cols)
}

/// Spread proxy, price impact, order-flow imbalance and their short averages.
pub fn compute_microstructure(series: &CandleSeries) -> Result<Vec<Column>> {
    require(series, 2)?;
    let d = Ohlcv::of(series);
    let r = ind::simple_returns(&d.close);
    let n = d.close.len();
    let spread: Vec<f64> = (0..n).map(|t| (d.high[t] - d.low[t]) / d.close[t]).collect();
    let impact: Vec<f64> = (0..n)
        .map(|t| {
            let denom = d.volume[t].ln_1p();
            if r[t].is_nan() {
                f64::NAN
            } else if denom == 0.0 {
                0.0
            } else {
                r[t].abs() / denom
            }
        })
        .collect();
    let ofi: Vec<f64> = (0..n)
        .map(|t| {
            let range = d.high[t] - d.low[t];
            if range == 0.0 {
                0.0
            } else {
                (d.close[t] - d.open[t]) / range
            }
        })
        .collect();
    let g = FeatureGroup::Microstructure;
    Ok(vec![
        Column::new("spread_ma_5", g, ind::sma(&spread, 5)),
        Column::new("spread_ma_20", g, ind::sma(&spread, 20)),
        Column::new("ofi_ma_5", g, ind::sma(&ofi, 5)),
        Column::new("ofi_ma_20", g, ind::sma(&ofi, 20)),
        Column::new("impact_ma_20", g, ind::sma(&impact, 20)),
        Column::new("spread", g, spread),
        Column::new("price_impact", g, impact),
        Column::new("order_flow_imbalance", g, ofi),
    ])
}

fn lookup<'a>(cols: &'a [Column], name: &str) -> Result<&'a [f64]> {
    cols.iter()
        .find(|c| c.name == name)
        .map(|c| c.values.as_slice())
        .ok_or_else(|| FeatureError::UnknownBaseColumn(name.into()))
}

fn lagged_columns(cols: &[Column], bases: &[&str], lags: &[usize]) -> Result<Vec<Column>> {
    if lags.contains(&0) {
        return Err(FeatureError::ZeroLag);
    }
    let mut out = Vec::with_capacity(bases.len() * lags.len());
    for base in bases {
        let x = lookup(cols, base)?;
        for &k in lags {
            out.push(Column::new(format!("{base}_lag_{k}"), FeatureGroup::Lagged, ind::lag(x, k)));
        }
    }
    Ok(out)
}

/// Lagged copies of the base columns (returns, log returns, VR_20, σ_20, RSI).
pub fn compute_lagged(matrix: &FeatureMatrix, lags: &[usize]) -> Result<Vec<Column>> {
    lagged_columns(&matrix.columns(), &LAG_BASES, lags)
}

fn interaction_columns(cols: &[Column]) -> Result<Vec<Column>> {
    let r = lookup(cols, "returns")?;
    let sigma = lookup(cols, "volatility_20")?;
    let vr = lookup(cols, "volume_ratio_20")?;
    let rsi = lookup(cols, "rsi")?;
    let spread = lookup(cols, "spread")?;
    let atr_ratio = lookup(cols, "atr_ratio")?;
    let rsi_c: Vec<f64> = rsi.iter().map(|v| (v - 50.0) / 50.0).collect();
    let g = FeatureGroup::Interaction;
    Ok(vec![
        Column::new("vol_volume_interaction", g, product(sigma, vr)),
        Column::new("momentum_rsi_interaction", g, product(r, &rsi_c)),
        Column::new("return_volume_interaction", g, product(r, vr)),
        Column::new("vol_rsi_interaction", g, product(sigma, &rsi_c)),
        Column::new("spread_volume_interaction", g, product(spread, vr)),
        Column::new("atr_vol_interaction", g, product(atr_ratio, sigma)),
    ])
}

/// Elementwise interaction products over already computed columns.
pub fn compute_interactions(matrix: &FeatureMatrix) -> Result<Vec<Column>> {
    interaction_columns(&matrix.columns())
}

fn check_prices(series: &CandleSeries) -> Result<()> {
    for (t, c) in series.candles().iter().enumerate() {
        if c.close <= 0.0 || c.low <= 0.0 {
            return Err(FeatureError::NonPositivePrice(t));
        }
    }
    Ok(())
}

/// All 122 columns, grouped in schema order.
pub fn full_columns(series: &CandleSeries) -> Result<Vec<Column>> {
    require(series, FULL_MIN_LENGTH)?;
    check_prices(series)?;
    let mut cols = compute_basic(series)?;
    cols.extend(compute_moving_averages(series, &MA_PERIODS)?);
    cols.extend(technical_columns(series)?);
    cols.extend(compute_volatility(series, &VOLATILITY_WINDOWS)?);
    cols.extend(compute_volume_features(series, &VOLUME_WINDOWS)?);
    cols.extend(compute_time_features(series)?);
    cols.extend(compute_microstructure(series)?);
    let lagged = lagged_columns(&cols, &LAG_BASES, &LAGS)?;
    let inter = interaction_columns(&cols)?;
    cols.extend(lagged);
    cols.extend(inter);
    Ok(cols)
}

/// Builds the feature matrix for `config`, recording the warm-up prefix.
pub fn build_matrix(series: &CandleSeries, config: &FeatureConfig) -> Result<FeatureMatrix> {
    let all = full_columns(series)?;
    let cols = match config.names() {
        None => all,
        Some(names) => names
            .iter()
            .map(|n| {
                all.iter()
                    .find(|c| &c.name == n)
                    .cloned()
                    .ok_or_else(|| FeatureError::UnknownBaseColumn(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let m = FeatureMatrix::from_columns(series.timestamps(), cols)?;
    for (t, row) in m.rows.iter().enumerate().skip(m.warm_up) {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NanAfterWarmUp { name: m.schema.names[j].clone(), row: t });
        }
    }
    Ok(m)
}
