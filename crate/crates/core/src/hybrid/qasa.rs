use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{Id, Tape, Tensor};
use super::params::{dropout, linear, Lstm, ParamStore};
use super::{HybridError, Network, Result};
use crate::qsim::{Circuit, Template};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QasaMode {
    /// One feature vector, embedded as a single token.
    Hybrid,
    /// A window of bars encoded by an LSTM, one token per bar.
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QasaConfig {
    pub mode: QasaMode,
    pub n_features: usize,
    /// Token dimension before amplitude encoding; the VQCs use `⌈log₂ d⌉` qubits.
    pub embed_dim: usize,
    pub lstm_units: usize,
    pub quantum_layers: usize,
    pub ffn_hidden: usize,
    pub dropout: f64,
    pub window: usize,
    pub causal_mask: bool,
}

impl Default for QasaConfig {
    fn default() -> Self {
        Self::sequence()
    }
}

impl QasaConfig {
    pub fn hybrid() -> Self {
        Self {
            mode: QasaMode::Hybrid,
            n_features: 12,
            embed_dim: 16,
            lstm_units: 64,
            quantum_layers: 2,
            ffn_hidden: 32,
            dropout: 0.2,
            window: 1,
            causal_mask: true,
        }
    }

    pub fn sequence() -> Self {
        Self { mode: QasaMode::Sequence, window: 10, ..Self::hybrid() }
    }

    pub fn n_qubits(&self) -> usize {
        self.embed_dim.next_power_of_two().trailing_zeros() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HybridError::InvalidConfig(m));
        if self.embed_dim < 2 {
            return bad(format!("embed_dim must be at least 2, got {}", self.embed_dim));
        }
        if self.n_qubits() > crate::qsim::MAX_QUBITS {
            return bad(format!("embed_dim {} needs too many qubits", self.embed_dim));
        }
        match self.mode {
            QasaMode::Hybrid if self.window != 1 => return bad("hybrid mode takes a window of 1".into()),
            QasaMode::Sequence if self.window != 10 => return bad("sequence mode takes a window of 10".into()),
            _ => {}
        }
        if self.n_features == 0 || self.quantum_layers == 0 || self.ffn_hidden == 0 || self.lstm_units == 0 {
            return bad("sizes must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}

/// Node ids of the intermediate values of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct QasaTrace {
    /// Amplitude-encoder inputs, one row per token.
    pub tokens: Id,
    pub q: Id,
    pub k: Id,
    pub v: Id,
    pub weights: Id,
    pub context: Id,
    pub logit: Id,
}

#[derive(Debug, Clone, Copy)]
pub struct Attention {
    pub q: Id,
    pub k: Id,
    pub v: Id,
    pub weights: Id,
    pub context: Id,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Indices {
    lstm: Option<Lstm>,
    embed_w: usize,
    embed_b: usize,
    theta_q: usize,
    theta_k: usize,
    theta_v: usize,
    dec_w1: usize,
    dec_b1: usize,
    dec_w2: usize,
    dec_b2: usize,
}

/// Self-attention whose query, key and value maps are amplitude-encoded VQCs.
#[derive(Debug, Clone)]
pub struct Qasa {
    pub config: QasaConfig,
    store: ParamStore,
    idx: Indices,
    circuit: Arc<Circuit>,
}

impl Qasa {
    pub fn new(config: QasaConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let n = config.n_qubits();
        let circuit = Arc::new(Template::QasaRy { n_qubits: n, layers: config.quantum_layers }.build()?);
        let mut s = ParamStore::default();
        let (lstm, token_in) = match config.mode {
            QasaMode::Hybrid => (None, config.n_features),
            QasaMode::Sequence => {
                (Some(Lstm::new(&mut s, "lstm", config.n_features, config.lstm_units, rng)), config.lstm_units)
            }
        };
        let d = config.embed_dim;
        let np = circuit.n_params();
        let h = config.ffn_hidden;
        let idx = Indices {
            lstm,
            embed_w: s.add_weight("embed.w", d, token_in, rng),
            embed_b: s.add_bias("embed.b", d, token_in, rng),
            theta_q: s.add_angles("vqc_q", np, rng),
            theta_k: s.add_angles("vqc_k", np, rng),
            theta_v: s.add_angles("vqc_v", np, rng),
            dec_w1: s.add_weight("decoder.w1", h, n, rng),
            dec_b1: s.add_bias("decoder.b1", h, n, rng),
            dec_w2: s.add_weight("decoder.w2", 1, h, rng),
            dec_b2: s.add_bias("decoder.b2", 1, h, rng),
        };
        Ok(Self { config, store: s, idx, circuit })
    }

    pub fn trace(&self, tape: &mut Tape, x: &Tensor, rng: Option<&mut ChaCha8Rng>) -> Result<QasaTrace> {
        let cfg = &self.config;
        if x.cols != cfg.n_features || x.rows != cfg.window {
            return Err(HybridError::DimensionMismatch {
                expected: (cfg.window, cfg.n_features),
                got: (x.rows, x.cols),
            });
        }
        let input = tape.constant(x.clone());
        let seq = match &self.idx.lstm {
            Some(l) => l.forward(tape, input),
            None => input,
        };
        let mut tokens = linear(tape, seq, self.idx.embed_w, self.idx.embed_b);
        let width = 1 << cfg.n_qubits();
        if width > cfg.embed_dim {
            let pad = tape.constant(Tensor::zeros(x.rows, width - cfg.embed_dim));
            tokens = tape.concat_cols(&[tokens, pad]);
        }
        let a = self.attend(tape, tokens)?;
        let context = a.context;
        let last = tape.row(context, x.rows - 1);
        let h = linear(tape, last, self.idx.dec_w1, self.idx.dec_b1);
        let h = tape.gelu(h);
        let h = dropout(tape, h, cfg.dropout, rng);
        let logit = linear(tape, h, self.idx.dec_w2, self.idx.dec_b2);
        Ok(QasaTrace { tokens, q: a.q, k: a.k, v: a.v, weights: a.weights, context, logit })
    }

    /// Quantum self-attention over `tokens` (one amplitude-encoder input per row).
    pub fn attend(&self, tape: &mut Tape, tokens: Id) -> Result<Attention> {
        let mut maps = [0; 3];
        for (m, theta) in maps.iter_mut().zip([self.idx.theta_q, self.idx.theta_k, self.idx.theta_v]) {
            let p = tape.param(theta);
            *m = tape.vqc(tokens, p, self.circuit.clone())?;
        }
        let [q, k, v] = maps;
        let scores = tape.matmul_t(q, k);
        let scores = tape.scale(scores, 1.0 / (self.config.n_qubits() as f64).sqrt());
        let weights = tape.softmax(scores, self.config.causal_mask);
        let context = tape.matmul(weights, v);
        Ok(Attention { q, k, v, weights, context })
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }
}

impl Network for Qasa {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn window(&self) -> usize {
        self.config.window
    }

    fn logit(&self, tape: &mut Tape, x: &Tensor, rng: Option<&mut ChaCha8Rng>) -> Result<Id> {
        Ok(self.trace(tape, x, rng)?.logit)
    }
}
