//! Experiment orchestration: configuration, per-run seeding, the
//! fit → predict → backtest pipeline, manifests and report emission.

mod config;
mod experiment;
pub mod report;

pub use config::{AssetSpec, ExperimentConfig, ModelGroup, ModelKind, ModelSpec};
pub use experiment::{
    load_bundle, prepare_asset, run_experiment, run_one, write_bundle, AssetData, FileEntry, Manifest, ManifestRun,
    ResultBundle, RunRecord, MANIFEST_FILE,
};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error for asset `{asset}`: {message}")]
    Data { asset: String, message: String },
    #[error("run {model}/{asset}/seed {seed} failed: {message}")]
    Run { model: String, asset: String, seed: u64, message: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed artifact {path}: {message}")]
    Artifact { path: String, message: String },
}

impl RunnerError {
    /// Process exit status: 2 config, 3 data, 4 run failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 2,
            RunnerError::Data { .. } | RunnerError::Artifact { .. } => 3,
            RunnerError::Run { .. } | RunnerError::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, RunnerError>;

/// Per-run seed: the first 8 bytes (little-endian) of
/// `sha256("{base_seed}/{model_id}/{asset}/{run_index}")`.
pub fn derive_seed(base_seed: u64, model_id: &str, asset: &str, run_index: u64) -> u64 {
    let digest = Sha256::digest(format!("{base_seed}/{model_id}/{asset}/{run_index}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
