use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{Id, Tape, Tensor};

/// Named trainable tensors. Quantum tensors (rotation angles) get their own learning rate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub names: Vec<String>,
    pub tensors: Vec<Tensor>,
    pub quantum: Vec<bool>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, t: Tensor, quantum: bool) -> usize {
        self.names.push(name.into());
        self.tensors.push(t);
        self.quantum.push(quantum);
        self.tensors.len() - 1
    }

    /// Weight `out × input` drawn from `U(±1/√input)`.
    pub fn add_weight(&mut self, name: &str, out: usize, input: usize, rng: &mut ChaCha8Rng) -> usize {
        let k = 1.0 / (input as f64).sqrt();
        let data = (0..out * input).map(|_| rng.random_range(-k..k)).collect();
        self.add(name, Tensor::from_vec(out, input, data), false)
    }

    pub fn add_bias(&mut self, name: &str, out: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> usize {
        let k = 1.0 / (fan_in as f64).sqrt();
        let data = (0..out).map(|_| rng.random_range(-k..k)).collect();
        self.add(name, Tensor::row_vec(data), false)
    }

    /// Rotation angles drawn from `U(−π, π)`.
    pub fn add_angles(&mut self, name: &str, n: usize, rng: &mut ChaCha8Rng) -> usize {
        let pi = std::f64::consts::PI;
        let data = (0..n).map(|_| rng.random_range(-pi..pi)).collect();
        self.add(name, Tensor::row_vec(data), true)
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let mut off = 0;
        for t in &mut self.tensors {
            let n = t.len();
            t.data.copy_from_slice(&v[off..off + n]);
            off += n;
        }
    }

    /// Per-scalar quantum flag, aligned with [`flat`](Self::flat).
    pub fn flat_quantum(&self) -> Vec<bool> {
        self.tensors.iter().zip(&self.quantum).flat_map(|(t, &q)| std::iter::repeat_n(q, t.len())).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Affine map of the rows of `x`: `x·Wᵀ + b`.
pub fn linear(tape: &mut Tape, x: Id, w: usize, b: usize) -> Id {
    let wn = tape.param(w);
    let bn = tape.param(b);
    let h = tape.matmul_t(x, wn);
    tape.add(h, bn)
}

/// Inverted dropout with rate `p`; a no-op without an RNG.
pub fn dropout(tape: &mut Tape, x: Id, p: f64, rng: Option<&mut ChaCha8Rng>) -> Id {
    let Some(rng) = rng else { return x };
    if p <= 0.0 {
        return x;
    }
    let v = tape.value(x);
    let keep = 1.0 / (1.0 - p);
    let mask = (0..v.len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
    let m = tape.constant(Tensor::from_vec(v.rows, v.cols, mask));
    tape.mul(x, m)
}

/// Single-layer LSTM with gate order `(input, forget, cell, output)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub hidden: usize,
    w_ih: usize,
    w_hh: usize,
    b: usize,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let k = 1.0 / (hidden as f64).sqrt();
        let mut init = |rows: usize, cols: usize| {
            Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-k..k)).collect())
        };
        let w_ih = init(4 * hidden, input);
        let w_hh = init(4 * hidden, hidden);
        let b = init(1, 4 * hidden);
        Self {
            hidden,
            w_ih: store.add(format!("{prefix}.w_ih"), w_ih, false),
            w_hh: store.add(format!("{prefix}.w_hh"), w_hh, false),
            b: store.add(format!("{prefix}.b"), b, false),
        }
    }

    /// Hidden state after each row of `x`, stacked as rows.
    pub fn forward(&self, tape: &mut Tape, x: Id) -> Id {
        let h = self.hidden;
        let steps = tape.value(x).rows;
        let pre_x = linear(tape, x, self.w_ih, self.b);
        let w_hh = tape.param(self.w_hh);
        let mut hs = tape.constant(Tensor::zeros(1, h));
        let mut cs = tape.constant(Tensor::zeros(1, h));
        let mut out = Vec::with_capacity(steps);
        for t in 0..steps {
            let px = tape.row(pre_x, t);
            let ph = tape.matmul_t(hs, w_hh);
            let g = tape.add(px, ph);
            let i = tape.slice_cols(g, 0, h);
            let i = tape.sigmoid(i);
            let f = tape.slice_cols(g, h, h);
            let f = tape.sigmoid(f);
            let c = tape.slice_cols(g, 2 * h, h);
            let c = tape.tanh(c);
            let o = tape.slice_cols(g, 3 * h, h);
            let o = tape.sigmoid(o);
            let keep = tape.mul(f, cs);
            let write = tape.mul(i, c);
            cs = tape.add(keep, write);
            let tc = tape.tanh(cs);
            hs = tape.mul(o, tc);
            out.push(hs);
        }
        tape.concat_rows(&out)
    }
}
