//! Slice-level indicator kernels. Every output has the input's length and
//! carries NaN wherever its lookback is not yet filled.
//!
//! Rolling quantities are recomputed from their window at each index (no running
//! sums), so a value depends only on the bars inside its window.

use crate::stats::{mean, quantile_linear, sample_std};

/// Exponential smoothing factor used for the EWMA volatility.
pub const EWMA_LAMBDA: f64 = 0.94;

fn window(x: &[f64], t: usize, n: usize) -> Option<&[f64]> {
    if t + 1 < n {
        return None;
    }
    let w = &x[t + 1 - n..=t];
    w.iter().all(|v| v.is_finite()).then_some(w)
}

/// `(P_t − P_{t−1}) / P_{t−1}`.
pub fn simple_returns(p: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; p.len()];
    for t in 1..p.len() {
        out[t] = (p[t] - p[t - 1]) / p[t - 1];
    }
    out
}

pub fn log_returns(p: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; p.len()];
    for t in 1..p.len() {
        out[t] = (p[t] / p[t - 1]).ln();
    }
    out
}

/// `P_t / P_{t−k} − 1`.
pub fn momentum(p: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; p.len()];
    for t in k..p.len() {
        out[t] = p[t] / p[t - k] - 1.0;
    }
    out
}

pub fn sma(x: &[f64], n: usize) -> Vec<f64> {
    (0..x.len()).map(|t| window(x, t, n).map_or(f64::NAN, mean)).collect()
}

/// EMA with `α = 2/(n+1)`, seeded with the SMA of the first `n` finite values.
pub fn ema(x: &[f64], n: usize) -> Vec<f64> {
    let alpha = 2.0 / (n as f64 + 1.0);
    let mut out = vec![f64::NAN; x.len()];
    let mut prev: Option<f64> = None;
    for t in 0..x.len() {
        prev = match prev {
            Some(e) if x[t].is_finite() => Some(alpha * x[t] + (1.0 - alpha) * e),
            Some(_) => None,
            None => window(x, t, n).map(mean),
        };
        if let Some(e) = prev {
            out[t] = e;
        }
    }
    out
}

/// Rolling sample standard deviation (ddof = 1).
pub fn rolling_std(x: &[f64], n: usize) -> Vec<f64> {
    (0..x.len()).map(|t| window(x, t, n).map_or(f64::NAN, sample_std)).collect()
}

/// RSI over the trailing `n` simple returns, with simple-mean gains and losses.
///
/// No movement at all gives 50; gains without losses give 100.
pub fn rsi(p: &[f64], n: usize) -> Vec<f64> {
    let r = simple_returns(p);
    (0..p.len())
        .map(|t| match window(&r, t, n) {
            None => f64::NAN,
            Some(w) => {
                let gain = w.iter().map(|v| v.max(0.0)).sum::<f64>() / n as f64;
                let loss = w.iter().map(|v| (-v).max(0.0)).sum::<f64>() / n as f64;
                if loss == 0.0 {
                    if gain == 0.0 {
                        50.0
                    } else {
                        100.0
                    }
                } else {
                    100.0 - 100.0 / (1.0 + gain / loss)
                }
            }
        })
        .collect()
}

/// `max(H−L, |H−P_{t−1}|, |L−P_{t−1}|)`; undefined on the first bar.
pub fn true_range(high: &[f64], low: &[f64], close: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; close.len()];
    for t in 1..close.len() {
        let pc = close[t - 1];
        out[t] = (high[t] - low[t]).max((high[t] - pc).abs()).max((low[t] - pc).abs());
    }
    out
}

/// EWMA volatility seeded with the first finite value of `seed_sigma`.
pub fn ewma_volatility(returns: &[f64], seed_sigma: &[f64], lambda: f64) -> Vec<f64> {
    let mut out = vec![f64::NAN; returns.len()];
    let mut var: Option<f64> = None;
    for t in 0..returns.len() {
        var = match var {
            Some(v) => Some(lambda * v + (1.0 - lambda) * returns[t] * returns[t]),
            None if seed_sigma[t].is_finite() => Some(seed_sigma[t] * seed_sigma[t]),
            None => None,
        };
        if let Some(v) = var {
            out[t] = v.sqrt();
        }
    }
    out
}

/// `1(σ_t > Q_0.8(σ_{t−lookback}, …, σ_{t−1}))`, the quantile excluding the current bar.
pub fn regime(sigma: &[f64], lookback: usize, q: f64) -> Vec<f64> {
    (0..sigma.len())
        .map(|t| {
            if t < lookback || !sigma[t].is_finite() {
                return f64::NAN;
            }
            let w = &sigma[t - lookback..t];
            if w.iter().any(|v| !v.is_finite()) {
                return f64::NAN;
            }
            if sigma[t] > quantile_linear(w, q) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// `V_t / SMA_n(V)_t`; an all-zero window gives the neutral ratio 1.
pub fn volume_ratio(volume: &[f64], n: usize) -> Vec<f64> {
    sma(volume, n)
        .iter()
        .zip(volume)
        .map(|(&m, &v)| {
            if m.is_nan() {
                f64::NAN
            } else if m == 0.0 {
                1.0
            } else {
                v / m
            }
        })
        .collect()
}

/// On-balance volume, starting at 0 on the first bar.
pub fn obv(close: &[f64], volume: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; close.len()];
    for t in 1..close.len() {
        let step = if close[t] > close[t - 1] {
            volume[t]
        } else if close[t] < close[t - 1] {
            -volume[t]
        } else {
            0.0
        };
        out[t] = out[t - 1] + step;
    }
    out
}

/// Parkinson high-low volatility over `n` bars.
pub fn parkinson(high: &[f64], low: &[f64], n: usize) -> Vec<f64> {
    let sq: Vec<f64> = high.iter().zip(low).map(|(h, l)| (h / l).ln().powi(2)).collect();
    let scale = 4.0 * std::f64::consts::LN_2;
    sma(&sq, n).iter().map(|m| (m / scale).sqrt()).collect()
}

/// Shift by `k` bars with a NaN prefix.
pub fn lag(x: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![f64::NAN; x.len()];
    if k < x.len() {
        out[k..].copy_from_slice(&x[..x.len() - k]);
    }
    out
}
