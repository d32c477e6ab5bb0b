#![allow(dead_code)]

pub mod dense;
pub mod oracle;

use qdefi_core::market_data::{Candle, CandleSeries};
use rand::Rng;

/// Random OHLCV series with occasional flat bars, zero volume and volume bursts.
pub fn fuzz_series<R: Rng>(rng: &mut R, n: usize) -> CandleSeries {
    let mut close = 10f64.powf(rng.random_range(-1.0..4.0));
    let vol = rng.random_range(0.001..0.08);
    let start = 1_600_000_000 + rng.random_range(0..2000) * 86_400;
    let mut candles = Vec::with_capacity(n);
    for t in 0..n {
        let prev = close;
        let kind = rng.random_range(0..20);
        if kind == 0 {
            // unchanged close
        } else {
            close = prev * (1.0 + rng.random_range(-vol..vol) as f64).max(0.2);
        }
        let (high, low, open) = if kind == 1 {
            (close, close, close)
        } else {
            let hi = prev.max(close) * (1.0 + rng.random_range(0.0..vol));
            let lo = prev.min(close) * (1.0 - rng.random_range(0.0..vol));
            (hi, lo, prev.clamp(lo, hi))
        };
        let volume = match rng.random_range(0..15) {
            0 => 0.0,
            1 => rng.random_range(1e5..1e7),
            _ => rng.random_range(1e3..5e4),
        };
        candles.push(Candle { timestamp: start + t as i64 * 86_400, open, high, low, close, volume });
    }
    CandleSeries::new("FUZZ", candles).unwrap()
}

use num_complex::Complex64;
use qdefi_core::qsim::{Circuit, Encoding, Gate, GateKind, Statevector};

/// Random gate list on `n` qubits (CNOTs only when n ≥ 2).
pub fn random_gates<R: Rng>(rng: &mut R, n: usize, len: usize) -> Vec<Gate> {
    (0..len)
        .map(|_| {
            let t = rng.random_range(0..n);
            let theta = rng.random_range(-7.0..7.0);
            match rng.random_range(0..if n > 1 { 4 } else { 3 }) {
                0 => Gate::rx(t, theta),
                1 => Gate::ry(t, theta),
                2 => Gate::rz(t, theta),
                _ => {
                    let mut c = rng.random_range(0..n - 1);
                    if c >= t {
                        c += 1;
                    }
                    Gate::cnot(c, t)
                }
            }
        })
        .collect()
}

pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> Statevector {
    let mut amps: Vec<Complex64> =
        (0..1 << n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    Statevector::from_amplitudes(n, amps).unwrap()
}

/// Random parameterized circuit: every rotation is either trainable or input-driven.
pub fn random_param_circuit<R: Rng>(rng: &mut R, n: usize, len: usize, encoding: Encoding) -> Circuit {
    let mut c = Circuit::new(n, encoding).unwrap();
    let n_params = rng.random_range(1..6);
    let n_inputs = rng.random_range(1..4);
    let mut used_input = false;
    for g in random_gates(rng, n, len) {
        if g.kind == GateKind::Cnot {
            c.push(g).unwrap();
        } else if encoding == Encoding::Angle && rng.random_bool(0.3) {
            let scale = [1.0, 0.5, 2.0][rng.random_range(0..3)];
            c.push_input(g.kind, g.target, rng.random_range(0..n_inputs), scale).unwrap();
            used_input = true;
        } else {
            c.push_param(g.kind, g.target, rng.random_range(0..n_params)).unwrap();
        }
    }
    if encoding == Encoding::Angle && !used_input {
        c.push_input(GateKind::Ry, 0, 0, 1.0).unwrap();
    }
    if c.n_params() == 0 {
        c.push_param(GateKind::Rx, 0, 0).unwrap();
    }
    c
}
