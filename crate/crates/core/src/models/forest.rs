use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training, Classifier, Criterion, ModelError, Result, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    /// Features tried per split; `None` means `⌊√d⌋`.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_estimators: 100, max_depth: 10, min_samples_split: 5, bootstrap: true, max_features: None }
    }
}

/// Bagged Gini trees averaged as class probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    /// Out-of-bag accuracy over rows left out by at least one tree.
    pub oob_accuracy: Option<f64>,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[u8], config: &ForestConfig, seed: u64) -> Result<Self> {
        if config.n_estimators == 0 || config.max_depth == 0 || config.min_samples_split < 2 {
            return Err(ModelError::InvalidConfig(format!("{config:?}")));
        }
        let d = check_training(x, y)?;
        let n = x.len();
        let targets: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let params = TreeParams {
            criterion: Criterion::Gini,
            max_depth: config.max_depth,
            min_samples_split: config.min_samples_split,
            max_features: Some(config.max_features.unwrap_or(((d as f64).sqrt() as usize).max(1))),
        };
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<u64> = (0..config.n_estimators).map(|_| master.random()).collect();
        let fitted: Vec<(Tree, Vec<bool>)> = seeds
            .par_iter()
            .map(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let rows: Vec<usize> =
                    if config.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
                let mut in_bag = vec![false; n];
                rows.iter().for_each(|&i| in_bag[i] = true);
                (Tree::fit(x, &targets, &rows, &params, &mut rng), in_bag)
            })
            .collect();

        let mut votes = vec![(0.0, 0usize); n];
        for (tree, in_bag) in &fitted {
            for i in (0..n).filter(|&i| !in_bag[i]) {
                votes[i].0 += tree.predict_row(&x[i]);
                votes[i].1 += 1;
            }
        }
        let scored: Vec<(f64, u8)> =
            votes.iter().zip(y).filter(|(v, _)| v.1 > 0).map(|(v, &t)| (v.0 / v.1 as f64, t)).collect();
        let oob_accuracy = (!scored.is_empty()).then(|| {
            scored.iter().filter(|(p, t)| ((*p >= 0.5) as u8) == *t).count() as f64 / scored.len() as f64
        });
        Ok(Self { trees: fitted.into_iter().map(|(t, _)| t).collect(), oob_accuracy })
    }
}

impl Classifier for RandomForest {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter()
            .map(|r| self.trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / self.trees.len() as f64)
            .collect()
    }
}
