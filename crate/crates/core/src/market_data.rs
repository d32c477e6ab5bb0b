//! OHLCV candle ingestion, validation and synthetic series generation.
//!
//! CSV is the only ingest format: a header row `timestamp,open,high,low,close,volume`
//! followed by one bar per line, timestamps in Unix epoch seconds (UTC).

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds in one daily bar.
pub const DAY_SECONDS: i64 = 86_400;

/// 2024-01-01T00:00:00Z, the default origin of synthetic series.
pub const SYNTHETIC_EPOCH: i64 = 1_704_067_200;

const HEADER: [&str; 6] = ["timestamp", "open", "high", "low", "close", "volume"];

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing or wrong header, expected `timestamp,open,high,low,close,volume`")]
    BadHeader,
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row} violates candle invariant: {reason}")]
    InvariantViolation { row: usize, reason: String },
    #[error("timestamps not strictly increasing at row {row} (timestamp {timestamp})")]
    NonMonotonicTime { row: usize, timestamp: i64 },
    #[error("gap of {missing} bar(s) before row {row}")]
    Gap { row: usize, missing: i64 },
    #[error("irregular bar spacing at row {row}: {spacing}s vs cadence {cadence}s")]
    IrregularSpacing { row: usize, spacing: i64, cadence: i64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T> = std::result::Result<T, MarketDataError>;

/// A single OHLCV bar. `close` is the price series the features are built on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Candle {
    /// Checks the OHLCV invariants, returning a description of the first violation.
    pub fn check(&self) -> std::result::Result<(), String> {
        let fields = [self.open, self.high, self.low, self.close, self.volume];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err("non-finite field".into());
        }
        if self.low > self.high {
            return Err(format!("high {} < low {}", self.high, self.low));
        }
        if self.open < self.low || self.open > self.high {
            return Err(format!("open {} outside [low, high]", self.open));
        }
        if self.close < self.low || self.close > self.high {
            return Err(format!("close {} outside [low, high]", self.close));
        }
        if self.volume < 0.0 {
            return Err(format!("negative volume {}", self.volume));
        }
        Ok(())
    }
}

/// What to do with missing bars between two ingested candles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    #[default]
    Reject,
    /// Insert flat zero-volume bars at the previous close.
    ForwardFill,
}

/// A validated, strictly increasing, uniformly spaced series of candles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandleSeries {
    pub symbol: String,
    candles: Vec<Candle>,
}

impl CandleSeries {
    /// Validates `candles` (assumed already in time order) and wraps them.
    pub fn new(symbol: impl Into<String>, candles: Vec<Candle>) -> Result<Self> {
        for (row, c) in candles.iter().enumerate() {
            c.check().map_err(|reason| MarketDataError::InvariantViolation { row, reason })?;
        }
        for (row, w) in candles.windows(2).enumerate() {
            if w[1].timestamp <= w[0].timestamp {
                return Err(MarketDataError::NonMonotonicTime {
                    row: row + 1,
                    timestamp: w[1].timestamp,
                });
            }
        }
        Ok(Self { symbol: symbol.into(), candles })
    }

    pub fn candles(&self) -> &[Candle] {
        &self.candles
    }

    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.close).collect()
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.candles.iter().map(|c| c.timestamp).collect()
    }

    /// Sub-series over `range`; invariants are inherited.
    pub fn slice(&self, range: std::ops::Range<usize>) -> CandleSeries {
        CandleSeries { symbol: self.symbol.clone(), candles: self.candles[range].to_vec() }
    }

    /// Same bars with every price multiplied by `factor` (> 0).
    pub fn scale_prices(&self, factor: f64) -> CandleSeries {
        let candles = self
            .candles
            .iter()
            .map(|c| Candle {
                open: c.open * factor,
                high: c.high * factor,
                low: c.low * factor,
                close: c.close * factor,
                ..*c
            })
            .collect();
        CandleSeries { symbol: self.symbol.clone(), candles }
    }
}

/// Loads a CSV file, rejecting gaps.
pub fn load_csv(path: impl AsRef<Path>, symbol: &str) -> Result<CandleSeries> {
    load_csv_with(path, symbol, GapPolicy::Reject)
}

pub fn load_csv_with(path: impl AsRef<Path>, symbol: &str, gaps: GapPolicy) -> Result<CandleSeries> {
    let file = std::fs::File::open(path)?;
    read_csv(file, symbol, gaps)
}

pub fn read_csv<R: Read>(reader: R, symbol: &str, gaps: GapPolicy) -> Result<CandleSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != HEADER.len() || header.iter().zip(HEADER).any(|(a, b)| a != b) {
        return Err(MarketDataError::BadHeader);
    }

    let mut candles = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != HEADER.len() {
            return Err(MarketDataError::MalformedRow {
                row,
                reason: format!("expected 6 fields, found {}", record.len()),
            });
        }
        let timestamp: i64 = record[0].parse().map_err(|_| MarketDataError::MalformedRow {
            row,
            reason: format!("bad timestamp `{}`", &record[0]),
        })?;
        let mut nums = [0.0_f64; 5];
        for (k, slot) in nums.iter_mut().enumerate() {
            let field = &record[k + 1];
            *slot = field.parse().map_err(|_| MarketDataError::MalformedRow {
                row,
                reason: format!("bad {} `{}`", HEADER[k + 1], field),
            })?;
        }
        let candle = Candle {
            timestamp,
            open: nums[0],
            high: nums[1],
            low: nums[2],
            close: nums[3],
            volume: nums[4],
        };
        candle.check().map_err(|reason| MarketDataError::InvariantViolation { row, reason })?;
        candles.push((row, candle));
    }

    candles.sort_by_key(|(_, c)| c.timestamp);
    for w in candles.windows(2) {
        if w[1].1.timestamp == w[0].1.timestamp {
            return Err(MarketDataError::NonMonotonicTime { row: w[1].0, timestamp: w[1].1.timestamp });
        }
    }
    let candles: Vec<Candle> = candles.into_iter().map(|(_, c)| c).collect();
    let candles = enforce_cadence(candles, gaps)?;
    CandleSeries::new(symbol, candles)
}

/// Cadence is the smallest spacing seen; larger spacings must be whole multiples of it.
fn enforce_cadence(candles: Vec<Candle>, gaps: GapPolicy) -> Result<Vec<Candle>> {
    let Some(cadence) = candles.windows(2).map(|w| w[1].timestamp - w[0].timestamp).min() else {
        return Ok(candles);
    };
    let mut out: Vec<Candle> = Vec::with_capacity(candles.len());
    for (row, c) in candles.into_iter().enumerate() {
        if let Some(prev) = out.last().copied() {
            let spacing = c.timestamp - prev.timestamp;
            if spacing % cadence != 0 {
                return Err(MarketDataError::IrregularSpacing { row, spacing, cadence });
            }
            let missing = spacing / cadence - 1;
            if missing > 0 {
                match gaps {
                    GapPolicy::Reject => return Err(MarketDataError::Gap { row, missing }),
                    GapPolicy::ForwardFill => {
                        for k in 1..=missing {
                            out.push(Candle {
                                timestamp: prev.timestamp + k * cadence,
                                open: prev.close,
                                high: prev.close,
                                low: prev.close,
                                close: prev.close,
                                volume: 0.0,
                            });
                        }
                    }
                }
            }
        }
        out.push(c);
    }
    Ok(out)
}

/// Writes the series in the ingest format; floats use shortest round-trip formatting.
pub fn write_csv<W: Write>(series: &CandleSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for c in series.candles() {
        w.write_record(&[
            c.timestamp.to_string(),
            c.open.to_string(),
            c.high.to_string(),
            c.low.to_string(),
            c.close.to_string(),
            c.volume.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(series: &CandleSeries, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(series, std::io::BufWriter::new(file))
}

/// Deterministic mean-reversion episodes layered over a GBM path.
///
/// Every `period` bars starting at `first_start`, the close is displaced by
/// `±jump` (alternating sign) for `duration` bars and then returns to the
/// underlying path. The bar before each episode carries a volume spike of
/// `volume_spike`×, so the onset is visible in lagged volume features and the
/// end is visible in lagged returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedSignal {
    pub period: usize,
    pub duration: usize,
    pub jump: f64,
    pub volume_spike: f64,
    pub first_start: usize,
}

impl Default for PlantedSignal {
    fn default() -> Self {
        Self { period: 20, duration: 4, jump: 0.06, volume_spike: 6.0, first_start: 25 }
    }
}

impl PlantedSignal {
    /// Signed displacement applied to bar `t` (0 outside episodes).
    pub fn displacement(&self, t: usize) -> f64 {
        if t < self.first_start {
            return 0.0;
        }
        let k = (t - self.first_start) / self.period;
        let phase = (t - self.first_start) % self.period;
        if phase < self.duration {
            if k % 2 == 0 {
                self.jump
            } else {
                -self.jump
            }
        } else {
            0.0
        }
    }

    /// Whether bar `t` immediately precedes an episode.
    pub fn is_precursor(&self, t: usize) -> bool {
        let next = t + 1;
        next >= self.first_start && (next - self.first_start) % self.period == 0
    }
}

/// Parameters of the synthetic daily series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub seed: u64,
    pub n: usize,
    pub s0: f64,
    /// Annual drift.
    pub mu: f64,
    /// Annual volatility.
    pub sigma: f64,
    #[serde(default)]
    pub planted_signal: Option<PlantedSignal>,
    #[serde(default = "default_start")]
    pub start_timestamp: i64,
}

fn default_start() -> i64 {
    SYNTHETIC_EPOCH
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            seed: 1,
            n: 252,
            s0: 100.0,
            mu: 0.1,
            sigma: 0.5,
            planted_signal: None,
            start_timestamp: SYNTHETIC_EPOCH,
        }
    }
}

/// Generates a GBM close path with OHLV built around it.
///
/// `open = prev_close`, `high = max(prev_close, close)·(1+|ε|)`,
/// `low = min(prev_close, close)·(1−|ε|)`, log-normal volume. The first bar opens
/// at `s0`. Identical parameters give bit-identical output.
pub fn generate_gbm(params: &GbmParams) -> Result<CandleSeries> {
    let GbmParams { seed, n, s0, mu, sigma, .. } = *params;
    if n < 2 {
        return Err(MarketDataError::InvalidParam(format!("n must be >= 2, got {n}")));
    }
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(MarketDataError::InvalidParam(format!("s0 must be positive, got {s0}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || !mu.is_finite() {
        return Err(MarketDataError::InvalidParam(format!("bad drift/vol ({mu}, {sigma})")));
    }
    if let Some(p) = &params.planted_signal {
        if p.period == 0 || p.duration == 0 || p.duration >= p.period || !(p.jump > -1.0) {
            return Err(MarketDataError::InvalidParam(format!("bad planted signal {p:?}")));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let dt = 1.0 / 252.0;
    let drift = (mu - 0.5 * sigma * sigma) * dt;
    let diffusion = sigma * dt.sqrt();
    // intrabar excursion scale; zero when the path is deterministic
    let wick = 0.5 * diffusion;

    let mut base = s0;
    let mut prev_close = s0;
    let mut candles = Vec::with_capacity(n);
    for t in 0..n {
        let z: f64 = std_normal.sample(&mut rng);
        let e_hi: f64 = std_normal.sample(&mut rng);
        let e_lo: f64 = std_normal.sample(&mut rng);
        let e_vol: f64 = std_normal.sample(&mut rng);
        if t > 0 {
            base *= (drift + diffusion * z).exp();
        }
        let (close, spike) = match &params.planted_signal {
            Some(p) => {
                let c = base * (1.0 + p.displacement(t));
                let s = if p.is_precursor(t) { p.volume_spike } else { 1.0 };
                (c, s)
            }
            None => (base, 1.0),
        };
        let high = prev_close.max(close) * (1.0 + (wick * e_hi).abs());
        let low = prev_close.min(close) * (1.0 - (wick * e_lo).abs()).max(0.0);
        let volume = spike * (13.8 + 0.25 * e_vol).exp();
        candles.push(Candle {
            timestamp: params.start_timestamp + t as i64 * DAY_SECONDS,
            open: prev_close,
            high,
            low,
            close,
            volume,
        });
        prev_close = close;
    }
    CandleSeries::new("SYNTH", candles)
}
