//! Sequence models with quantum sublayers (QASA in hybrid and sequence modes,
//! QRWKV) and a classical transformer baseline, trained end to end.
//!
//! Every model is a [`Network`]: a set of named parameter tensors plus a forward
//! pass recorded on an [`autodiff::Tape`]. Classical parameters get exact
//! reverse-mode gradients; VQC parameters get parameter-shift gradients chained
//! into the same backward sweep.

pub mod autodiff;
pub mod params;
pub mod qasa;
pub mod qrwkv;
pub mod train;
pub mod transformer;

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use autodiff::{Id, Tape, Tensor};
pub use params::ParamStore;
pub use qasa::{Qasa, QasaConfig, QasaMode};
pub use qrwkv::{Qrwkv, QrwkvConfig};
pub use train::{train, AuditReport, TrainConfig, TrainHistory, Windows};
pub use transformer::{Transformer, TransformerConfig};

use crate::models::Standardizer;
use crate::qsim::QsimError;

#[derive(Debug, Error)]
pub enum HybridError {
    #[error("non-finite activation in the forward pass")]
    NonFiniteActivation,
    #[error("gradient check failed on `{param}`: relative error {rel_err:.3e}")]
    GradientCheckFailure { param: String, rel_err: f64 },
    #[error("input window is {got:?}, expected {expected:?} (rows, features)")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no usable training windows")]
    NoTrainingWindows,
    #[error("training labels contain a single class")]
    SingleClassTraining,
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

pub type Result<T> = std::result::Result<T, HybridError>;

/// A trainable model whose forward pass ends in one logit.
pub trait Network: Send + Sync {
    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    /// Number of bars per input window.
    fn window(&self) -> usize;
    /// Records the forward pass for one window. Dropout is active only when `rng` is given.
    fn logit(&self, tape: &mut Tape, x: &Tensor, rng: Option<&mut ChaCha8Rng>) -> Result<Id>;

    /// Inference probability for one window.
    fn predict_one(&self, x: &Tensor) -> Result<f64> {
        let mut tape = Tape::new(&self.store().tensors);
        let z = self.logit(&mut tape, x, None)?;
        let z = tape.value(z).data[0];
        if !z.is_finite() {
            return Err(HybridError::NonFiniteActivation);
        }
        Ok(crate::stats::sigmoid(z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridKind {
    QasaHybrid,
    QasaSequence,
    Qrwkv,
    Transformer,
}

impl HybridKind {
    pub fn name(self) -> &'static str {
        match self {
            HybridKind::QasaHybrid => "qasa_hybrid",
            HybridKind::QasaSequence => "qasa_sequence",
            HybridKind::Qrwkv => "qrwkv",
            HybridKind::Transformer => "transformer",
        }
    }
}

/// Architecture and training settings for every hybrid kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HybridSpec {
    pub qasa_hybrid: QasaConfig,
    pub qasa_sequence: QasaConfig,
    pub qrwkv: QrwkvConfig,
    pub transformer: TransformerConfig,
    pub train: TrainConfig,
}

impl Default for HybridSpec {
    fn default() -> Self {
        Self {
            qasa_hybrid: QasaConfig::hybrid(),
            qasa_sequence: QasaConfig::sequence(),
            qrwkv: QrwkvConfig::default(),
            transformer: TransformerConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Net {
    Qasa(Qasa),
    Qrwkv(Qrwkv),
    Transformer(Transformer),
}

impl Net {
    pub fn build(kind: HybridKind, spec: &HybridSpec, n_features: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(match kind {
            HybridKind::QasaHybrid => Net::Qasa(Qasa::new(QasaConfig { n_features, ..spec.qasa_hybrid.clone() }, rng)?),
            HybridKind::QasaSequence => {
                Net::Qasa(Qasa::new(QasaConfig { n_features, ..spec.qasa_sequence.clone() }, rng)?)
            }
            HybridKind::Qrwkv => Net::Qrwkv(Qrwkv::new(QrwkvConfig { n_features, ..spec.qrwkv.clone() }, rng)?),
            HybridKind::Transformer => {
                Net::Transformer(Transformer::new(TransformerConfig { n_features, ..spec.transformer.clone() }, rng)?)
            }
        })
    }

    fn inner(&self) -> &dyn Network {
        match self {
            Net::Qasa(n) => n,
            Net::Qrwkv(n) => n,
            Net::Transformer(n) => n,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Network {
        match self {
            Net::Qasa(n) => n,
            Net::Qrwkv(n) => n,
            Net::Transformer(n) => n,
        }
    }
}

impl Network for Net {
    fn store(&self) -> &ParamStore {
        self.inner().store()
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        self.inner_mut().store_mut()
    }

    fn window(&self) -> usize {
        self.inner().window()
    }

    fn logit(&self, tape: &mut Tape, x: &Tensor, rng: Option<&mut ChaCha8Rng>) -> Result<Id> {
        self.inner().logit(tape, x, rng)
    }
}

/// A trained hybrid model with its input standardization.
#[derive(Debug, Clone)]
pub struct HybridModel {
    pub kind: HybridKind,
    pub net: Net,
    pub scaler: Standardizer,
    pub history: TrainHistory,
}

impl HybridModel {
    /// Fits on the windows ending at each row of `train`, early-stopping on `val`.
    ///
    /// `rows` is the whole feature matrix so that windows can reach back before
    /// `train.start`; windows touching a non-finite value are dropped.
    pub fn fit(
        kind: HybridKind,
        spec: &HybridSpec,
        rows: &[Vec<f64>],
        labels: &[u8],
        train: Range<usize>,
        val: Range<usize>,
        seed: u64,
    ) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        let scaler = Standardizer::fit(&rows[train.clone()]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Net::build(kind, spec, n_features, &mut rng)?;
        let w = net.window();
        let tr = Windows::build(rows, labels, train, w, &scaler);
        let va = Windows::build(rows, labels, val, w, &scaler);
        let history = train::train(&mut net, &tr, Some(&va), &spec.train, seed)?;
        Ok(Self { kind, net, scaler, history })
    }

    /// Probabilities for the windows ending at each row of `range`; a window that
    /// touches a non-finite value gets 0.5.
    pub fn predict_range(&self, rows: &[Vec<f64>], range: Range<usize>) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        let w = self.net.window();
        range
            .into_par_iter()
            .map(|t| match train::window_at(rows, t, w, &self.scaler) {
                Some(x) => self.net.predict_one(&x),
                None => Ok(0.5),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests;
