use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{Id, Tape, Tensor};
use super::params::{linear, ParamStore};
use super::{HybridError, Network, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformerConfig {
    pub n_features: usize,
    pub window: usize,
    pub layers: usize,
    pub heads: usize,
    pub model_dim: usize,
    pub ffn_dim: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self { n_features: 122, window: 10, layers: 2, heads: 4, model_dim: 32, ffn_dim: 64 }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.n_features, self.window, self.layers, self.heads, self.model_dim, self.ffn_dim].contains(&0) {
            return Err(HybridError::InvalidConfig("transformer sizes must be positive".into()));
        }
        if self.model_dim % self.heads != 0 {
            return Err(HybridError::InvalidConfig(format!(
                "model_dim {} is not divisible by {} heads",
                self.model_dim, self.heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Block {
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ff1_w: usize,
    ff1_b: usize,
    ff2_w: usize,
    ff2_b: usize,
}

#[derive(Debug, Clone)]
pub struct TransformerTrace {
    /// Attention weights per layer, then per head.
    pub weights: Vec<Vec<Id>>,
    /// Per-head value projections of the first layer.
    pub first_values: Vec<Id>,
    /// Concatenated head contexts of the first layer, before the output projection.
    pub first_context: Id,
    pub logit: Id,
}

/// Post-norm causal encoder over a window of bars; classifies from the last position.
#[derive(Debug, Clone)]
pub struct Transformer {
    pub config: TransformerConfig,
    store: ParamStore,
    embed_w: usize,
    embed_b: usize,
    blocks: Vec<Block>,
    head_w: usize,
    head_b: usize,
}

/// Sinusoidal position table, `window × dim`.
pub fn positional_encoding(window: usize, dim: usize) -> Tensor {
    let mut t = Tensor::zeros(window, dim);
    for pos in 0..window {
        for i in 0..dim {
            let rate = 10_000f64.powf((2 * (i / 2)) as f64 / dim as f64);
            let a = pos as f64 / rate;
            t.data[pos * dim + i] = if i % 2 == 0 { a.sin() } else { a.cos() };
        }
    }
    t
}

impl Transformer {
    pub fn new(config: TransformerConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let (d, f) = (config.model_dim, config.ffn_dim);
        let mut s = ParamStore::default();
        let embed_w = s.add_weight("embed.w", d, config.n_features, rng);
        let embed_b = s.add_bias("embed.b", d, config.n_features, rng);
        let blocks = (0..config.layers)
            .map(|l| {
                let n = |x: &str| format!("layer{l}.{x}");
                Block {
                    wq: s.add_weight(&n("wq"), d, d, rng),
                    bq: s.add_bias(&n("bq"), d, d, rng),
                    wk: s.add_weight(&n("wk"), d, d, rng),
                    bk: s.add_bias(&n("bk"), d, d, rng),
                    wv: s.add_weight(&n("wv"), d, d, rng),
                    bv: s.add_bias(&n("bv"), d, d, rng),
                    wo: s.add_weight(&n("wo"), d, d, rng),
                    bo: s.add_bias(&n("bo"), d, d, rng),
                    ff1_w: s.add_weight(&n("ff1.w"), f, d, rng),
                    ff1_b: s.add_bias(&n("ff1.b"), f, d, rng),
                    ff2_w: s.add_weight(&n("ff2.w"), d, f, rng),
                    ff2_b: s.add_bias(&n("ff2.b"), d, f, rng),
                }
            })
            .collect();
        let head_w = s.add_weight("head.w", 1, d, rng);
        let head_b = s.add_bias("head.b", 1, d, rng);
        Ok(Self { config, store: s, embed_w, embed_b, blocks, head_w, head_b })
    }

    pub fn trace(&self, tape: &mut Tape, x: &Tensor) -> Result<TransformerTrace> {
        let cfg = &self.config;
        if x.cols != cfg.n_features || x.rows == 0 || x.rows > cfg.window {
            return Err(HybridError::DimensionMismatch { expected: (cfg.window, cfg.n_features), got: (x.rows, x.cols) });
        }
        let d = cfg.model_dim;
        let dk = d / cfg.heads;
        let input = tape.constant(x.clone());
        let e = linear(tape, input, self.embed_w, self.embed_b);
        let pos = tape.constant(positional_encoding(x.rows, d));
        let mut h = tape.add(e, pos);
        let mut weights = Vec::new();
        let (mut first_values, mut first_context) = (Vec::new(), 0);
        for (l, b) in self.blocks.iter().enumerate() {
            let q = linear(tape, h, b.wq, b.bq);
            let k = linear(tape, h, b.wk, b.bk);
            let v = linear(tape, h, b.wv, b.bv);
            let mut heads = Vec::with_capacity(cfg.heads);
            let mut layer_w = Vec::with_capacity(cfg.heads);
            for j in 0..cfg.heads {
                let qh = tape.slice_cols(q, j * dk, dk);
                let kh = tape.slice_cols(k, j * dk, dk);
                let vh = tape.slice_cols(v, j * dk, dk);
                let s = tape.matmul_t(qh, kh);
                let s = tape.scale(s, 1.0 / (dk as f64).sqrt());
                let a = tape.softmax(s, true);
                heads.push(tape.matmul(a, vh));
                layer_w.push(a);
                if l == 0 {
                    first_values.push(vh);
                }
            }
            let ctx = tape.concat_cols(&heads);
            if l == 0 {
                first_context = ctx;
            }
            let o = linear(tape, ctx, b.wo, b.bo);
            let r = tape.add(h, o);
            let h1 = tape.layer_norm(r);
            let f = linear(tape, h1, b.ff1_w, b.ff1_b);
            let f = tape.gelu(f);
            let f = linear(tape, f, b.ff2_w, b.ff2_b);
            let r = tape.add(h1, f);
            h = tape.layer_norm(r);
            weights.push(layer_w);
        }
        let last = tape.row(h, x.rows - 1);
        let logit = linear(tape, last, self.head_w, self.head_b);
        Ok(TransformerTrace { weights, first_values, first_context, logit })
    }
}

impl Network for Transformer {
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
