use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{Id, Tape, Tensor};
use super::params::{linear, ParamStore};
use super::{HybridError, Network, Result};
use crate::qsim::{Circuit, Template};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QrwkvConfig {
    pub n_features: usize,
    pub window: usize,
    pub layers: usize,
    pub hidden: usize,
    pub n_qubits: usize,
    /// Width of the perceptron feeding the channel mix.
    pub mlp_hidden: usize,
}

impl Default for QrwkvConfig {
    fn default() -> Self {
        Self { n_features: 12, window: 10, layers: 4, hidden: 64, n_qubits: 4, mlp_hidden: 64 }
    }
}

impl QrwkvConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.n_features, self.window, self.layers, self.hidden, self.n_qubits, self.mlp_hidden].contains(&0) {
            return Err(HybridError::InvalidConfig("QRWKV sizes must be positive".into()));
        }
        if self.n_qubits > crate::qsim::MAX_QUBITS {
            return Err(HybridError::InvalidConfig(format!("{} qubits exceeds the simulator limit", self.n_qubits)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    angle_w: usize,
    angle_b: usize,
    theta: usize,
    key: usize,
    value: usize,
    gate_w: usize,
    gate_b: usize,
    log_tau: usize,
    w_q: usize,
    mlp_w: usize,
    mlp_b: usize,
    w_mlp: usize,
    mix_b1: usize,
    w_out: usize,
    mix_b2: usize,
    att_q: usize,
    att_k: usize,
    att_v: usize,
}

/// Node ids of one layer's per-step states.
#[derive(Debug, Clone, Default)]
pub struct LayerTrace {
    /// Per-channel decay `λ`.
    pub decay: Id,
    /// Quantum embedding, one row per step.
    pub qemb: Id,
    /// Memory `m_t` after each step.
    pub memory: Vec<Id>,
    /// Receptance gate `g_t`.
    pub gate: Vec<Id>,
    /// Key and value projections of the time mix, one row per step.
    pub key: Id,
    pub value: Id,
    /// Attention values, one row per step.
    pub attn_value: Id,
    pub attn_weights: Id,
    /// Attention output, one row per step.
    pub attn: Id,
    /// Layer output, one row per step.
    pub output: Id,
}

#[derive(Debug, Clone)]
pub struct QrwkvTrace {
    pub layers: Vec<LayerTrace>,
    pub logit: Id,
}

/// Recurrent time mixing with a learnable per-channel decay, channel mixing fed by a
/// quantum embedding, and attention over that embedding.
#[derive(Debug, Clone)]
pub struct Qrwkv {
    pub config: QrwkvConfig,
    store: ParamStore,
    input_w: usize,
    input_b: usize,
    layers: Vec<Layer>,
    head_w: usize,
    head_b: usize,
    circuit: Arc<Circuit>,
}

impl Qrwkv {
    pub fn new(config: QrwkvConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let circuit = Arc::new(Template::QrwkvRx { n_qubits: config.n_qubits }.build()?);
        let (h, nq, mh) = (config.hidden, config.n_qubits, config.mlp_hidden);
        let mut s = ParamStore::default();
        let input_w = s.add_weight("input.w", h, config.n_features, rng);
        let input_b = s.add_bias("input.b", h, config.n_features, rng);
        let layers = (0..config.layers)
            .map(|l| {
                let n = |x: &str| format!("layer{l}.{x}");
                Layer {
                    angle_w: s.add_weight(&n("angle.w"), nq, h, rng),
                    angle_b: s.add_bias(&n("angle.b"), nq, h, rng),
                    theta: s.add_angles(&n("vqc"), circuit.n_params(), rng),
                    key: s.add_weight(&n("key"), h, h, rng),
                    value: s.add_weight(&n("value"), h, h, rng),
                    gate_w: s.add_weight(&n("gate.w"), h, 2 * h, rng),
                    gate_b: s.add_bias(&n("gate.b"), h, 2 * h, rng),
                    log_tau: s.add(n("log_tau"), Tensor::zeros(1, h), false),
                    w_q: s.add_weight(&n("mix.w_q"), h, nq, rng),
                    mlp_w: s.add_weight(&n("mix.mlp.w"), mh, h, rng),
                    mlp_b: s.add_bias(&n("mix.mlp.b"), mh, h, rng),
                    w_mlp: s.add_weight(&n("mix.w_mlp"), h, mh, rng),
                    mix_b1: s.add_bias(&n("mix.b1"), h, mh, rng),
                    w_out: s.add_weight(&n("mix.w_out"), h, h, rng),
                    mix_b2: s.add_bias(&n("mix.b2"), h, h, rng),
                    att_q: s.add_weight(&n("attn.q"), nq, nq, rng),
                    att_k: s.add_weight(&n("attn.k"), nq, nq, rng),
                    att_v: s.add_weight(&n("attn.v"), h, nq, rng),
                }
            })
            .collect();
        let head_w = s.add_weight("head.w", 1, h, rng);
        let head_b = s.add_bias("head.b", 1, h, rng);
        Ok(Self { config, store: s, input_w, input_b, layers, head_w, head_b, circuit })
    }

    fn layer(&self, tape: &mut Tape, x: Id, p: &Layer) -> Result<LayerTrace> {
        let steps = tape.value(x).rows;
        let h = self.config.hidden;
        let angles = linear(tape, x, p.angle_w, p.angle_b);
        let theta = tape.param(p.theta);
        let qemb = tape.vqc(angles, theta, self.circuit.clone())?;

        // time mixing
        let wk = tape.param(p.key);
        let key = tape.matmul_t(x, wk);
        let wv = tape.param(p.value);
        let value = tape.matmul_t(x, wv);
        let lt = tape.param(p.log_tau);
        let inv_tau = tape.scale(lt, -1.0);
        let inv_tau = tape.exp(inv_tau);
        let decay = tape.scale(inv_tau, -1.0);
        let decay = tape.exp(decay);
        let gate_w = tape.param(p.gate_w);
        let gate_b = tape.param(p.gate_b);
        let mut m = tape.constant(Tensor::zeros(1, h));
        let (mut memory, mut gate, mut mixed) = (Vec::new(), Vec::new(), Vec::new());
        for t in 0..steps {
            let xt = tape.row(x, t);
            let gin = tape.concat_cols(&[xt, m]);
            let g = tape.matmul_t(gin, gate_w);
            let g = tape.add(g, gate_b);
            let g = tape.sigmoid(g);
            let kept = tape.mul(decay, m);
            let vt = tape.row(value, t);
            m = tape.add(kept, vt);
            let ut = tape.row(key, t);
            let um = tape.mul(ut, m);
            let y = tape.mul(g, um);
            let r = tape.add(xt, y);
            mixed.push(tape.layer_norm(r));
            memory.push(m);
            gate.push(g);
        }
        let hidden = tape.concat_rows(&mixed);

        // channel mixing
        let wq = tape.param(p.w_q);
        let zq = tape.matmul_t(qemb, wq);
        let mlp = linear(tape, x, p.mlp_w, p.mlp_b);
        let mlp = tape.gelu(mlp);
        let zm = linear(tape, mlp, p.w_mlp, p.mix_b1);
        let z = tape.add(zq, zm);
        let act = tape.gelu(z);
        let mut prod = vec![tape.constant(Tensor::zeros(1, h))];
        for t in 1..steps {
            let a = tape.row(act, t);
            let b = tape.row(act, t - 1);
            prod.push(tape.mul(a, b));
        }
        let prod = tape.concat_rows(&prod);
        let channel = linear(tape, prod, p.w_out, p.mix_b2);

        // attention over the quantum embedding
        let aq = tape.param(p.att_q);
        let q = tape.matmul_t(qemb, aq);
        let ak = tape.param(p.att_k);
        let k = tape.matmul_t(qemb, ak);
        let av = tape.param(p.att_v);
        let v = tape.matmul_t(qemb, av);
        let scores = tape.matmul_t(q, k);
        let attn_weights = tape.softmax(scores, true);
        let attn = tape.matmul(attn_weights, v);

        let sum = tape.add(hidden, channel);
        let sum = tape.add(sum, attn);
        let output = tape.layer_norm(sum);
        Ok(LayerTrace { decay, qemb, memory, gate, key, value, attn_value: v, attn_weights, attn, output })
    }

    pub fn trace(&self, tape: &mut Tape, x: &Tensor) -> Result<QrwkvTrace> {
        let cfg = &self.config;
        if x.cols != cfg.n_features || x.rows != cfg.window {
            return Err(HybridError::DimensionMismatch {
                expected: (cfg.window, cfg.n_features),
                got: (x.rows, x.cols),
            });
        }
        let input = tape.constant(x.clone());
        let mut h = linear(tape, input, self.input_w, self.input_b);
        let mut layers = Vec::with_capacity(self.layers.len());
        for p in &self.layers {
            let tr = self.layer(tape, h, p)?;
            h = tr.output;
            layers.push(tr);
        }
        let last = tape.row(h, x.rows - 1);
        let logit = linear(tape, last, self.head_w, self.head_b);
        Ok(QrwkvTrace { layers, logit })
    }
}

impl Network for Qrwkv {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn window(&self) -> usize {
        self.config.window
    }

    fn logit(&self, tape: &mut Tape, x: &Tensor, _rng: Option<&mut ChaCha8Rng>) -> Result<Id> {
        Ok(self.trace(tape, x)?.logit)
    }
}
