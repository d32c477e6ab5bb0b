use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training, mean_log_loss, Classifier, Criterion, ModelError, Result, Tree, TreeParams};
use crate::stats::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self { n_estimators: 100, learning_rate: 0.1, max_depth: 6, min_samples_split: 2 }
    }
}

/// Logistic-loss gradient boosting with squared-error regression trees on residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    /// Log-odds of the training class prior.
    pub f0: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Training log-loss after `F_0` and after each stage.
    pub loss_curve: Vec<f64>,
}

impl GradientBoosting {
    pub fn fit(x: &[Vec<f64>], y: &[u8], config: &BoostConfig, seed: u64) -> Result<Self> {
        if !(config.learning_rate >= 0.0 && config.learning_rate <= 1.0) || config.max_depth == 0 {
            return Err(ModelError::InvalidConfig(format!("{config:?}")));
        }
        check_training(x, y)?;
        let n = x.len();
        let prior = y.iter().filter(|&&v| v == 1).count() as f64 / n as f64;
        let f0 = (prior / (1.0 - prior)).ln();
        let mut f = vec![f0; n];
        let params = TreeParams {
            criterion: Criterion::Mse,
            max_depth: config.max_depth,
            min_samples_split: config.min_samples_split,
            max_features: None,
        };
        // all features are scanned, so the generator only exists to satisfy the tree API
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<usize> = (0..n).collect();
        let probs = |f: &[f64]| f.iter().map(|&v| sigmoid(v)).collect::<Vec<_>>();
        let mut loss_curve = vec![mean_log_loss(&probs(&f), y)];
        let mut trees = Vec::with_capacity(config.n_estimators);
        for _ in 0..config.n_estimators {
            let resid: Vec<f64> = f.iter().zip(y).map(|(&v, &t)| t as f64 - sigmoid(v)).collect();
            let tree = Tree::fit(x, &resid, &rows, &params, &mut rng);
            for (fi, r) in f.iter_mut().zip(x) {
                *fi += config.learning_rate * tree.predict_row(r);
            }
            loss_curve.push(mean_log_loss(&probs(&f), y));
            trees.push(tree);
        }
        Ok(Self { f0, learning_rate: config.learning_rate, trees, loss_curve })
    }

    pub fn raw_score(&self, r: &[f64]) -> f64 {
        self.f0 + self.learning_rate * self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>()
    }
}

impl Classifier for GradientBoosting {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| sigmoid(self.raw_score(r))).collect()
    }
}
