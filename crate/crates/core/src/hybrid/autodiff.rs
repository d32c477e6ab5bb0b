//! Minimal reverse-mode automatic differentiation over row-major matrices.
//!
//! A [`Tape`] records one forward pass; [`Tape::backward`] seeds a scalar output
//! with 1 and accumulates gradients for every parameter leaf.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::qsim::{shift_vjp, Circuit, QsimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length");
        Self { rows, cols, data }
    }

    pub fn row_vec(data: Vec<f64>) -> Self {
        Self { rows: 1, cols: data.len(), data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Self { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

pub type Id = usize;

#[derive(Clone)]
enum Op {
    Const,
    Param(usize),
    /// `A·Bᵀ`; with `A` as rows of inputs and `B` a weight stored output-major.
    MatMulT(Id, Id),
    /// `A·B`.
    MatMul(Id, Id),
    /// Elementwise sum; a single-row right operand broadcasts over rows.
    Add(Id, Id),
    Mul(Id, Id),
    Scale(Id, f64),
    Sigmoid(Id),
    Tanh(Id),
    Gelu(Id),
    Exp(Id),
    SliceCols(Id, usize),
    ConcatCols(Vec<Id>),
    ConcatRows(Vec<Id>),
    Row(Id, usize),
    Softmax(Id),
    LayerNorm(Id),
    Vqc { x: Id, params: Id, circuit: Arc<Circuit> },
    /// Binary cross-entropy of `σ(logit)` against a fixed target.
    BceLogit(Id, f64),
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

struct Node {
    op: Op,
    value: Tensor,
}

/// One recorded forward computation.
pub struct Tape<'p> {
    params: &'p [Tensor],
    nodes: Vec<Node>,
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor { rows: t.rows, cols: t.cols, data: t.data.iter().map(|&v| f(v)).collect() }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Tensor]) -> Self {
        Self { params, nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Tensor) -> Id {
        self.nodes.push(Node { op, value });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: Id) -> &Tensor {
        match self.nodes[id].op {
            Op::Param(i) => &self.params[i],
            _ => &self.nodes[id].value,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn constant(&mut self, t: Tensor) -> Id {
        self.push(Op::Const, t)
    }

    pub fn param(&mut self, index: usize) -> Id {
        assert!(index < self.params.len(), "parameter index");
        self.push(Op::Param(index), Tensor::zeros(0, 0))
    }

    pub fn matmul_t(&mut self, a: Id, b: Id) -> Id {
        let (x, w) = (self.value(a), self.value(b));
        assert_eq!(x.cols, w.cols, "matmul_t inner dimension");
        let mut out = Tensor::zeros(x.rows, w.rows);
        for i in 0..x.rows {
            let xr = x.row(i);
            for j in 0..w.rows {
                out.data[i * w.rows + j] = xr.iter().zip(w.row(j)).map(|(a, b)| a * b).sum();
            }
        }
        self.push(Op::MatMulT(a, b), out)
    }

    pub fn matmul(&mut self, a: Id, b: Id) -> Id {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!(x.cols, y.rows, "matmul inner dimension");
        let mut out = Tensor::zeros(x.rows, y.cols);
        for i in 0..x.rows {
            for k in 0..x.cols {
                let v = x.at(i, k);
                if v == 0.0 {
                    continue;
                }
                for j in 0..y.cols {
                    out.data[i * y.cols + j] += v * y.at(k, j);
                }
            }
        }
        self.push(Op::MatMul(a, b), out)
    }

    pub fn add(&mut self, a: Id, b: Id) -> Id {
        let (x, y) = (self.value(a), self.value(b));
        assert!(x.cols == y.cols && (y.rows == x.rows || y.rows == 1), "add shapes");
        let mut out = x.clone();
        for i in 0..x.rows {
            let yr = if y.rows == 1 { 0 } else { i };
            for j in 0..x.cols {
                out.data[i * x.cols + j] += y.at(yr, j);
            }
        }
        self.push(Op::Add(a, b), out)
    }

    pub fn mul(&mut self, a: Id, b: Id) -> Id {
        let (x, y) = (self.value(a), self.value(b));
        assert_eq!((x.rows, x.cols), (y.rows, y.cols), "mul shapes");
        let data = x.data.iter().zip(&y.data).map(|(a, b)| a * b).collect();
        let out = Tensor { rows: x.rows, cols: x.cols, data };
        self.push(Op::Mul(a, b), out)
    }

    pub fn scale(&mut self, a: Id, s: f64) -> Id {
        let out = map(self.value(a), |v| v * s);
        self.push(Op::Scale(a, s), out)
    }

    pub fn sigmoid(&mut self, a: Id) -> Id {
        let out = map(self.value(a), crate::stats::sigmoid);
        self.push(Op::Sigmoid(a), out)
    }

    pub fn tanh(&mut self, a: Id) -> Id {
        let out = map(self.value(a), f64::tanh);
        self.push(Op::Tanh(a), out)
    }

    pub fn gelu(&mut self, a: Id) -> Id {
        let out = map(self.value(a), gelu);
        self.push(Op::Gelu(a), out)
    }

    pub fn exp(&mut self, a: Id) -> Id {
        let out = map(self.value(a), f64::exp);
        self.push(Op::Exp(a), out)
    }

    pub fn slice_cols(&mut self, a: Id, start: usize, len: usize) -> Id {
        let x = self.value(a);
        let mut out = Tensor::zeros(x.rows, len);
        for i in 0..x.rows {
            out.data[i * len..(i + 1) * len].copy_from_slice(&x.row(i)[start..start + len]);
        }
        self.push(Op::SliceCols(a, start), out)
    }

    pub fn concat_cols(&mut self, parts: &[Id]) -> Id {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for &p in parts {
                let v = self.value(p);
                out.data[i * cols + off..i * cols + off + v.cols].copy_from_slice(v.row(i));
                off += v.cols;
            }
        }
        self.push(Op::ConcatCols(parts.to_vec()), out)
    }

    pub fn concat_rows(&mut self, parts: &[Id]) -> Id {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        for &p in parts {
            assert_eq!(self.value(p).cols, cols, "concat_rows widths");
            data.extend_from_slice(&self.value(p).data);
        }
        let out = Tensor { rows: data.len() / cols.max(1), cols, data };
        self.push(Op::ConcatRows(parts.to_vec()), out)
    }

    pub fn row(&mut self, a: Id, r: usize) -> Id {
        let out = Tensor::row_vec(self.value(a).row(r).to_vec());
        self.push(Op::Row(a, r), out)
    }

    /// Row-wise softmax. With `causal`, row `i` only spreads over columns `≤ i`.
    pub fn softmax(&mut self, a: Id, causal: bool) -> Id {
        let x = self.value(a);
        let mut out = Tensor::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            let end = if causal { (i + 1).min(x.cols) } else { x.cols };
            let r = &x.row(i)[..end];
            let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = r.iter().map(|v| (v - m).exp()).collect();
            let s: f64 = e.iter().sum();
            for (j, ej) in e.iter().enumerate() {
                out.data[i * x.cols + j] = ej / s;
            }
        }
        self.push(Op::Softmax(a), out)
    }

    /// Row-wise standardization with [`LAYER_NORM_EPS`], no affine part.
    pub fn layer_norm(&mut self, a: Id) -> Id {
        let x = self.value(a);
        let mut out = Tensor::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            let r = x.row(i);
            let n = r.len() as f64;
            let mu = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (j, v) in r.iter().enumerate() {
                out.data[i * x.cols + j] = (v - mu) * inv;
            }
        }
        self.push(Op::LayerNorm(a), out)
    }

    /// Runs `circuit` once per row of `x`, giving a row of `⟨Z_i⟩` per input row.
    pub fn vqc(&mut self, x: Id, params: Id, circuit: Arc<Circuit>) -> Result<Id, QsimError> {
        let (xs, p) = (self.value(x), self.value(params));
        let n = circuit.n_qubits();
        let mut out = Tensor::zeros(xs.rows, n);
        for i in 0..xs.rows {
            let z = circuit.expectations(xs.row(i), &p.data)?;
            out.data[i * n..(i + 1) * n].copy_from_slice(&z);
        }
        Ok(self.push(Op::Vqc { x, params, circuit }, out))
    }

    /// Scalar cross-entropy of `σ(logit)` against `target`.
    pub fn bce_logit(&mut self, logit: Id, target: f64) -> Id {
        let z = self.value(logit).data[0];
        // log(1+e^z) − t·z
        let l = z.max(0.0) + (-z.abs()).exp().ln_1p() - target * z;
        self.push(Op::BceLogit(logit, target), Tensor::row_vec(vec![l]))
    }

    /// Gradients of node `out` (a scalar) with respect to every parameter tensor.
    pub fn backward(&self, out: Id) -> Vec<Tensor> {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[out] = Some(Tensor::row_vec(vec![1.0]));
        let mut pgrads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(p.rows, p.cols)).collect();
        for id in (0..=out).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            let acc = |target: Id, delta: Tensor, grads: &mut Vec<Option<Tensor>>| match &mut grads[target] {
                Some(t) => t.data.iter_mut().zip(&delta.data).for_each(|(a, b)| *a += b),
                slot => *slot = Some(delta),
            };
            match &node.op {
                Op::Const => {}
                Op::Param(i) => pgrads[*i].data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += b),
                Op::MatMulT(a, b) => {
                    let (x, w) = (self.value(*a), self.value(*b));
                    let mut gx = Tensor::zeros(x.rows, x.cols);
                    let mut gw = Tensor::zeros(w.rows, w.cols);
                    for i in 0..x.rows {
                        for j in 0..w.rows {
                            let gij = g.at(i, j);
                            if gij == 0.0 {
                                continue;
                            }
                            for k in 0..x.cols {
                                gx.data[i * x.cols + k] += gij * w.at(j, k);
                                gw.data[j * w.cols + k] += gij * x.at(i, k);
                            }
                        }
                    }
                    acc(*a, gx, &mut grads);
                    acc(*b, gw, &mut grads);
                }
                Op::MatMul(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let mut gx = Tensor::zeros(x.rows, x.cols);
                    let mut gy = Tensor::zeros(y.rows, y.cols);
                    for i in 0..x.rows {
                        for j in 0..y.cols {
                            let gij = g.at(i, j);
                            if gij == 0.0 {
                                continue;
                            }
                            for k in 0..x.cols {
                                gx.data[i * x.cols + k] += gij * y.at(k, j);
                                gy.data[k * y.cols + j] += gij * x.at(i, k);
                            }
                        }
                    }
                    acc(*a, gx, &mut grads);
                    acc(*b, gy, &mut grads);
                }
                Op::Add(a, b) => {
                    let y = self.value(*b);
                    let gb = if y.rows == 1 && g.rows > 1 {
                        let mut s = Tensor::zeros(1, g.cols);
                        for i in 0..g.rows {
                            s.data.iter_mut().zip(g.row(i)).for_each(|(a, b)| *a += b);
                        }
                        s
                    } else {
                        g.clone()
                    };
                    acc(*b, gb, &mut grads);
                    acc(*a, g, &mut grads);
                }
                Op::Mul(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let ga = Tensor { data: g.data.iter().zip(&y.data).map(|(g, y)| g * y).collect(), ..g.clone() };
                    let gb = Tensor { data: g.data.iter().zip(&x.data).map(|(g, x)| g * x).collect(), ..g.clone() };
                    acc(*a, ga, &mut grads);
                    acc(*b, gb, &mut grads);
                }
                Op::Scale(a, s) => acc(*a, map(&g, |v| v * s), &mut grads),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let d = g.data.iter().zip(&y.data).map(|(g, y)| g * y * (1.0 - y)).collect();
                    acc(*a, Tensor { data: d, ..g.clone() }, &mut grads);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let d = g.data.iter().zip(&y.data).map(|(g, y)| g * (1.0 - y * y)).collect();
                    acc(*a, Tensor { data: d, ..g.clone() }, &mut grads);
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let d = g.data.iter().zip(&x.data).map(|(g, x)| g * gelu_grad(*x)).collect();
                    acc(*a, Tensor { data: d, ..g.clone() }, &mut grads);
                }
                Op::Exp(a) => {
                    let y = &node.value;
                    let d = g.data.iter().zip(&y.data).map(|(g, y)| g * y).collect();
                    acc(*a, Tensor { data: d, ..g.clone() }, &mut grads);
                }
                Op::SliceCols(a, start) => {
                    let x = self.value(*a);
                    let mut gx = Tensor::zeros(x.rows, x.cols);
                    for i in 0..x.rows {
                        gx.data[i * x.cols + start..i * x.cols + start + g.cols].copy_from_slice(g.row(i));
                    }
                    acc(*a, gx, &mut grads);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).cols;
                        let mut gp = Tensor::zeros(g.rows, w);
                        for i in 0..g.rows {
                            gp.data[i * w..(i + 1) * w].copy_from_slice(&g.row(i)[off..off + w]);
                        }
                        off += w;
                        acc(p, gp, &mut grads);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let v = self.value(p);
                        let n = v.len();
                        acc(p, Tensor::from_vec(v.rows, v.cols, g.data[off..off + n].to_vec()), &mut grads);
                        off += n;
                    }
                }
                Op::Row(a, r) => {
                    let x = self.value(*a);
                    let mut gx = Tensor::zeros(x.rows, x.cols);
                    gx.data[r * x.cols..(r + 1) * x.cols].copy_from_slice(&g.data);
                    acc(*a, gx, &mut grads);
                }
                Op::Softmax(a) => {
                    let y = &node.value;
                    let mut gx = Tensor::zeros(y.rows, y.cols);
                    for i in 0..y.rows {
                        let dot: f64 = g.row(i).iter().zip(y.row(i)).map(|(g, y)| g * y).sum();
                        for j in 0..y.cols {
                            gx.data[i * y.cols + j] = y.at(i, j) * (g.at(i, j) - dot);
                        }
                    }
                    acc(*a, gx, &mut grads);
                }
                Op::LayerNorm(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let mut gx = Tensor::zeros(x.rows, x.cols);
                    for i in 0..x.rows {
                        let r = x.row(i);
                        let n = r.len() as f64;
                        let mu = r.iter().sum::<f64>() / n;
                        let var = r.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
                        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                        let gm = g.row(i).iter().sum::<f64>() / n;
                        let gy = g.row(i).iter().zip(y.row(i)).map(|(g, y)| g * y).sum::<f64>() / n;
                        for j in 0..x.cols {
                            gx.data[i * x.cols + j] = inv * (g.at(i, j) - gm - y.at(i, j) * gy);
                        }
                    }
                    acc(*a, gx, &mut grads);
                }
                Op::Vqc { x, params, circuit } => {
                    let (xs, p) = (self.value(*x), self.value(*params));
                    let mut gx = Tensor::zeros(xs.rows, xs.cols);
                    let mut gp = Tensor::zeros(p.rows, p.cols);
                    for i in 0..xs.rows {
                        let r = shift_vjp(circuit, xs.row(i), &p.data, g.row(i)).expect("VQC sized by the model");
                        gx.data[i * xs.cols..(i + 1) * xs.cols].copy_from_slice(&r.grad_inputs);
                        gp.data.iter_mut().zip(&r.grad_params).for_each(|(a, b)| *a += b);
                    }
                    acc(*x, gx, &mut grads);
                    acc(*params, gp, &mut grads);
                }
                Op::BceLogit(a, t) => {
                    let z = self.value(*a).data[0];
                    acc(*a, Tensor::row_vec(vec![g.data[0] * (crate::stats::sigmoid(z) - t)]), &mut grads);
                }
            }
        }
        pgrads
    }
}
