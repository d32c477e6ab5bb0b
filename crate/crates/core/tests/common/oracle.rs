//! Straight-line loop oracles for every feature column. Written without the
//! library's indicator kernels: each index recomputes its quantity from the raw
//! bars, variances use Welford updates, quantiles use explicit rank search.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Timelike};
use qdefi_core::market_data::CandleSeries;

const NAN: f64 = f64::NAN;

fn welford_std(xs: &[f64]) -> f64 {
    let mut n = 0.0;
    let mut m = 0.0;
    let mut s = 0.0;
    for &x in xs {
        n += 1.0;
        let d = x - m;
        m += d / n;
        s += d * (x - m);
    }
    (s / (n - 1.0)).sqrt()
}

fn avg(xs: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in xs {
        s += x;
    }
    s / xs.len() as f64
}

fn ret(p: &[f64], t: usize) -> f64 {
    if t == 0 {
        NAN
    } else {
        p[t] / p[t - 1] - 1.0
    }
}

fn trailing(f: impl Fn(usize) -> f64, t: usize, n: usize) -> Option<Vec<f64>> {
    if t + 1 < n {
        return None;
    }
    let v: Vec<f64> = (t + 1 - n..=t).map(f).collect();
    v.iter().all(|x| x.is_finite()).then_some(v)
}

fn ema_series(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![NAN; x.len()];
    let a = 2.0 / (n as f64 + 1.0);
    let start = (0..x.len()).find(|&t| t + 1 >= n && x[t + 1 - n..=t].iter().all(|v| v.is_finite()));
    if let Some(s) = start {
        out[s] = avg(&x[s + 1 - n..=s]);
        for t in s + 1..x.len() {
            out[t] = out[t - 1] + a * (x[t] - out[t - 1]);
        }
    }
    out
}

fn rsi_at(p: &[f64], t: usize, n: usize) -> f64 {
    if t < n {
        return NAN;
    }
    let (mut g, mut l) = (0.0, 0.0);
    for i in 0..n {
        let r = ret(p, t - i);
        if r > 0.0 {
            g += r;
        } else {
            l -= r;
        }
    }
    g /= n as f64;
    l /= n as f64;
    if l == 0.0 {
        return if g == 0.0 { 50.0 } else { 100.0 };
    }
    100.0 * g / (g + l)
}

fn pct(sorted_src: &[f64], q: f64) -> f64 {
    let mut v = sorted_src.to_vec();
    // insertion sort, independent of the library's sort
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            j -= 1;
        }
    }
    let h = (v.len() as f64 - 1.0) * q;
    let i = h as usize;
    if i + 1 >= v.len() {
        v[i]
    } else {
        v[i] + (h - i as f64) * (v[i + 1] - v[i])
    }
}

/// Every feature column keyed by name.
pub fn oracle(series: &CandleSeries) -> BTreeMap<String, Vec<f64>> {
    let c = series.candles();
    let n = c.len();
    let p: Vec<f64> = c.iter().map(|x| x.close).collect();
    let o: Vec<f64> = c.iter().map(|x| x.open).collect();
    let h: Vec<f64> = c.iter().map(|x| x.high).collect();
    let l: Vec<f64> = c.iter().map(|x| x.low).collect();
    let v: Vec<f64> = c.iter().map(|x| x.volume).collect();
    let mut out: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut put = |name: &str, col: Vec<f64>| {
        out.insert(name.to_string(), col);
    };

    let r: Vec<f64> = (0..n).map(|t| ret(&p, t)).collect();
    let lr: Vec<f64> = (0..n).map(|t| if t == 0 { NAN } else { p[t].ln() - p[t - 1].ln() }).collect();
    let sma_of = |x: &[f64], k: usize| -> Vec<f64> {
        (0..n).map(|t| trailing(|i| x[i], t, k).map_or(NAN, |w| avg(&w))).collect()
    };
    let std_of = |x: &[f64], k: usize| -> Vec<f64> {
        (0..n).map(|t| trailing(|i| x[i], t, k).map_or(NAN, |w| welford_std(&w))).collect()
    };

    // basic
    let ma20 = sma_of(&p, 20);
    put("returns", r.clone());
    put("log_returns", lr.clone());
    put("price_ma_ratio", (0..n).map(|t| p[t] / ma20[t]).collect());
    put("price_sma_20_ratio", (0..n).map(|t| p[t] / ma20[t]).collect());
    put("high_low_ratio", (0..n).map(|t| h[t] / l[t]).collect());
    put("price_position", (0..n).map(|t| if h[t] == l[t] { 0.5 } else { (p[t] - l[t]) / (h[t] - l[t]) }).collect());
    put("price_momentum", (0..n).map(|t| if t < 5 { NAN } else { (p[t] - p[t - 5]) / p[t - 5] }).collect());
    put("price_momentum_10", (0..n).map(|t| if t < 10 { NAN } else { (p[t] - p[t - 10]) / p[t - 10] }).collect());

    // moving averages
    for k in [5, 10, 20, 50] {
        let s = sma_of(&p, k);
        let e = ema_series(&p, k);
        put(&format!("close_sma_{k}_ratio"), (0..n).map(|t| p[t] / s[t]).collect());
        put(&format!("close_ema_{k}_ratio"), (0..n).map(|t| p[t] / e[t]).collect());
        put(&format!("sma_{k}"), s);
        put(&format!("ema_{k}"), e);
    }

    // technical
    let rsi14: Vec<f64> = (0..n).map(|t| rsi_at(&p, t, 14)).collect();
    put("rsi", rsi14.clone());
    put("rsi_7", (0..n).map(|t| rsi_at(&p, t, 7)).collect());
    put("rsi_21", (0..n).map(|t| rsi_at(&p, t, 21)).collect());
    let e12 = ema_series(&p, 12);
    let e26 = ema_series(&p, 26);
    let macd: Vec<f64> = (0..n).map(|t| e12[t] - e26[t]).collect();
    let sig = ema_series(&macd, 9);
    put("macd_histogram", (0..n).map(|t| macd[t] - sig[t]).collect());
    put("macd_ratio", (0..n).map(|t| macd[t] / p[t]).collect());
    put("macd_signal", sig);
    put("macd", macd);
    let sd20 = std_of(&p, 20);
    let up: Vec<f64> = (0..n).map(|t| ma20[t] + 2.0 * sd20[t]).collect();
    let lo: Vec<f64> = (0..n).map(|t| ma20[t] - 2.0 * sd20[t]).collect();
    put("bb_width", (0..n).map(|t| (up[t] - lo[t]) / ma20[t]).collect());
    put(
        "bb_position",
        (0..n)
            .map(|t| {
                if ma20[t].is_nan() {
                    NAN
                } else if up[t] == lo[t] {
                    0.5
                } else {
                    (p[t] - lo[t]) / (up[t] - lo[t])
                }
            })
            .collect(),
    );
    put("bb_middle", ma20.clone());
    put("bb_upper", up);
    put("bb_lower", lo);
    let tr: Vec<f64> = (0..n)
        .map(|t| {
            if t == 0 {
                NAN
            } else {
                let a = h[t] - l[t];
                let b = (h[t] - p[t - 1]).abs();
                let d = (l[t] - p[t - 1]).abs();
                if a >= b && a >= d {
                    a
                } else if b >= d {
                    b
                } else {
                    d
                }
            }
        })
        .collect();
    let atr = sma_of(&tr, 14);
    put("atr_ratio", (0..n).map(|t| atr[t] / p[t]).collect());
    put("atr", atr);
    put("true_range", tr);

    // volatility
    let s20 = std_of(&r, 20);
    for k in [5, 10, 20, 50] {
        put(&format!("volatility_{k}"), std_of(&r, k));
        put(&format!("log_volatility_{k}"), std_of(&lr, k));
    }
    let mut ew = vec![NAN; n];
    let mut var = NAN;
    for t in 0..n {
        if var.is_nan() {
            if s20[t].is_finite() {
                var = s20[t] * s20[t];
            }
        } else {
            var = 0.94 * var + 0.06 * r[t] * r[t];
        }
        ew[t] = var.sqrt();
    }
    put("ewma_volatility", ew);
    put("vol_of_vol", std_of(&s20, 10));
    put(
        "vol_regime",
        (0..n)
            .map(|t| {
                if t < 70 {
                    return NAN;
                }
                let q = pct(&s20[t - 50..t], 0.8);
                (s20[t] > q) as u8 as f64
            })
            .collect(),
    );
    let pk: Vec<f64> = (0..n)
        .map(|t| {
            trailing(|i| (h[i] / l[i]).ln().powi(2), t, 20)
                .map_or(NAN, |w| (avg(&w) / (4.0 * 2f64.ln())).sqrt())
        })
        .collect();
    put("parkinson_volatility_20", pk);

    // volume
    let vr = |k: usize| -> Vec<f64> {
        let m = sma_of(&v, k);
        (0..n).map(|t| if m[t].is_nan() { NAN } else if m[t] == 0.0 { 1.0 } else { v[t] / m[t] }).collect()
    };
    let vr20 = vr(20);
    put("volume_ratio_5", vr(5));
    put("volume_ratio_10", vr(10));
    put("volume_ratio_20", vr20.clone());
    put("vpt", (0..n).map(|t| v[t] * r[t]).collect());
    let mut obv = vec![0.0; n];
    for t in 1..n {
        obv[t] = obv[t - 1] + v[t] * ((p[t] > p[t - 1]) as i32 - (p[t] < p[t - 1]) as i32) as f64;
    }
    put("obv", obv);
    put("volume_signal", vr20.iter().map(|x| if x.is_nan() { NAN } else { (*x > 1.5) as u8 as f64 }).collect());
    put("log_volume", v.iter().map(|x| (1.0 + x).ln()).collect());
    put("log_volume_change", (0..n).map(|t| if t == 0 { NAN } else { ((1.0 + v[t]) / (1.0 + v[t - 1])).ln() }).collect());

    // time
    let mut cal = vec![[0.0f64; 4]; n];
    for t in 0..n {
        let dt = DateTime::from_timestamp(c[t].timestamp, 0).unwrap();
        cal[t] = [dt.hour() as f64, dt.weekday().num_days_from_monday() as f64, dt.month() as f64, dt.day() as f64];
    }
    let pi2 = 2.0 * std::f64::consts::PI;
    put("hour_sin", cal.iter().map(|x| (pi2 * x[0] / 24.0).sin()).collect());
    put("hour_cos", cal.iter().map(|x| (pi2 * x[0] / 24.0).cos()).collect());
    put("dow_sin", cal.iter().map(|x| (pi2 * x[1] / 7.0).sin()).collect());
    put("dow_cos", cal.iter().map(|x| (pi2 * x[1] / 7.0).cos()).collect());
    put("month_sin", cal.iter().map(|x| (pi2 * (x[2] - 1.0) / 12.0).sin()).collect());
    put("month_cos", cal.iter().map(|x| (pi2 * (x[2] - 1.0) / 12.0).cos()).collect());
    put("dom_sin", cal.iter().map(|x| (pi2 * (x[3] - 1.0) / 31.0).sin()).collect());
    put("dom_cos", cal.iter().map(|x| (pi2 * (x[3] - 1.0) / 31.0).cos()).collect());
    put("hour", cal.iter().map(|x| x[0]).collect());
    put("day_of_week", cal.iter().map(|x| x[1]).collect());
    put("month", cal.iter().map(|x| x[2]).collect());
    put("day_of_month", cal.iter().map(|x| x[3]).collect());
    for m in 1..=12 {
        put(&format!("month_{m:02}"), cal.iter().map(|x| (x[2] as u32 == m) as u8 as f64).collect());
    }

    // microstructure
    let spread: Vec<f64> = (0..n).map(|t| (h[t] - l[t]) / p[t]).collect();
    let impact: Vec<f64> = (0..n)
        .map(|t| if t == 0 { NAN } else if v[t] == 0.0 { 0.0 } else { r[t].abs() / (1.0 + v[t]).ln() })
        .collect();
    let ofi: Vec<f64> = (0..n).map(|t| if h[t] == l[t] { 0.0 } else { (p[t] - o[t]) / (h[t] - l[t]) }).collect();
    put("spread_ma_5", sma_of(&spread, 5));
    put("spread_ma_20", sma_of(&spread, 20));
    put("ofi_ma_5", sma_of(&ofi, 5));
    put("ofi_ma_20", sma_of(&ofi, 20));
    put("impact_ma_20", sma_of(&impact, 20));

    // lagged
    let bases: [(&str, &Vec<f64>); 5] =
        [("returns", &r), ("log_returns", &lr), ("volume_ratio_20", &vr20), ("volatility_20", &s20), ("rsi", &rsi14)];
    for (name, col) in bases {
        for k in [1usize, 2, 3, 5, 10] {
            put(&format!("{name}_lag_{k}"), (0..n).map(|t| if t < k { NAN } else { col[t - k] }).collect());
        }
    }

    // interactions
    let atr_ratio = atr_ratio_direct(&p, &h, &l);
    put("vol_volume_interaction", (0..n).map(|t| s20[t] * vr20[t]).collect());
    put("momentum_rsi_interaction", (0..n).map(|t| r[t] * (rsi14[t] - 50.0) / 50.0).collect());
    put("return_volume_interaction", (0..n).map(|t| r[t] * vr20[t]).collect());
    put("vol_rsi_interaction", (0..n).map(|t| s20[t] * (rsi14[t] - 50.0) / 50.0).collect());
    put("spread_volume_interaction", (0..n).map(|t| spread[t] * vr20[t]).collect());
    put("atr_vol_interaction", (0..n).map(|t| atr_ratio[t] * s20[t]).collect());
    put("spread", spread);
    put("price_impact", impact);
    put("order_flow_imbalance", ofi);
    out
}

// ATR ratio recomputed from the raw bars for the interaction block.
fn atr_ratio_direct(p: &[f64], h: &[f64], l: &[f64]) -> Vec<f64> {
    (0..p.len())
        .map(|t| {
            if t < 14 {
                return NAN;
            }
            let mut s = 0.0;
            for i in t - 13..=t {
                let pc = p[i - 1];
                s += (h[i] - l[i]).max((h[i] - pc).abs()).max((l[i] - pc).abs());
            }
            s / 14.0 / p[t]
        })
        .collect()
}

/// Relative difference with a unit floor on the denominator; NaN must match NaN.
pub fn rel_err(a: f64, b: f64) -> f64 {
    if a.is_nan() && b.is_nan() {
        return 0.0;
    }
    if a.is_nan() != b.is_nan() {
        return f64::INFINITY;
    }
    (a - b).abs() / b.abs().max(1.0)
}

/// `I_x(a, b)` by the Lentz continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    fn ln_gamma(z: f64) -> f64 {
        // Lanczos, g = 7
        const C: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        if z < 0.5 {
            return (std::f64::consts::PI / (std::f64::consts::PI * z).sin()).ln() - ln_gamma(1.0 - z);
        }
        let z = z - 1.0;
        let mut s = C[0];
        for (i, c) in C.iter().enumerate().skip(1) {
            s += c / (z + i as f64);
        }
        let t = z + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + s.ln()
    }
    fn cf(x: f64, a: f64, b: f64) -> f64 {
        let tiny = 1e-300;
        let mut c = 1.0;
        let mut d = 1.0 - (a + b) * x / (a + 1.0);
        if d.abs() < tiny {
            d = tiny;
        }
        d = 1.0 / d;
        let mut h = d;
        for m in 1..10_000 {
            let m = m as f64;
            let num = m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
            for k in [num, -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0))] {
                d = 1.0 + k * d;
                if d.abs() < tiny {
                    d = tiny;
                }
                c = 1.0 + k / c;
                if c.abs() < tiny {
                    c = tiny;
                }
                d = 1.0 / d;
                h *= d * c;
            }
            if (d * c - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * cf(x, a, b) / a
    } else {
        1.0 - front * cf(1.0 - x, b, a) / b
    }
}

/// Welch `(t, two-sided p)` written out from the textbook formulas.
pub fn welch_reference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let stats = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    let (na, ma, va) = stats(a);
    let (nb, mb, vb) = stats(b);
    let se2 = va / na + vb / nb;
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let p = regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5);
    (t, p)
}

/// Reference dual solver: accelerated projected gradient ascent, projecting onto
/// `{0 ≤ α ≤ C, yᵀα = 0}` by bisection on the equality multiplier.
pub fn reference_dual(k: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| y[i] * y[j] * k[i][j]).collect()).collect();
    let project = |v: &[f64]| -> Vec<f64> {
        let at = |mu: f64| -> (Vec<f64>, f64) {
            let a: Vec<f64> = v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect();
            let s = a.iter().zip(y).map(|(a, y)| a * y).sum();
            (a, s)
        };
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if at(mid).1 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(0.5 * (lo + hi)).0
    };
    let dual = |a: &[f64]| -> f64 {
        let quad: f64 = (0..n).map(|i| (0..n).map(|j| a[i] * q[i][j] * a[j]).sum::<f64>()).sum();
        a.iter().sum::<f64>() - 0.5 * quad
    };
    let lip: f64 = (0..n).map(|i| q[i][i]).sum::<f64>().max(1e-12);
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..20000 {
        let grad: Vec<f64> = (0..n).map(|i| 1.0 - (0..n).map(|j| q[i][j] * z[j]).sum::<f64>()).collect();
        let step: Vec<f64> = z.iter().zip(&grad).map(|(zi, g)| zi + g / lip).collect();
        let next = project(&step);
        let t2 = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&a).map(|(nx, ax)| nx + (t - 1.0) / t2 * (nx - ax)).collect();
        a = next;
        t = t2;
    }
    dual(&a)
}

/// Largest relative decline over every ordered pair of points.
pub fn brute_mdd(v: &[f64]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            m = m.max((v[i] - v[j]) / v[i]);
        }
    }
    m
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
pub fn pair_auc(s: &[f64], y: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}
