use serde::{Deserialize, Serialize};

use super::{check_training, Classifier, ModelError, Result, Standardizer};
use crate::stats::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogitConfig {
    /// Inverse L2 strength.
    pub c: f64,
    pub max_iter: usize,
    /// Stop when the gradient norm falls below this.
    pub tol: f64,
}

impl Default for LogitConfig {
    fn default() -> Self {
        Self { c: 1.0, max_iter: 5000, tol: 1e-6 }
    }
}

/// L2-regularized logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub scaler: Standardizer,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    /// Objective value after every iteration.
    pub loss_curve: Vec<f64>,
}

/// `mean log-loss + ‖w‖²/(2Cn)` and its gradient `(∂w, ∂b)`.
pub fn objective(x: &[Vec<f64>], y: &[u8], w: &[f64], b: f64, c: f64) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (r, &t) in x.iter().zip(y) {
        let z = b + r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        let t = t as f64;
        // log(1+e^z) − t·z, stable in both tails
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - t * z;
        let e = sigmoid(z) - t;
        gb += e;
        for (g, v) in gw.iter_mut().zip(r) {
            *g += e * v;
        }
    }
    let reg = 1.0 / (c * n);
    let wn: f64 = w.iter().map(|v| v * v).sum();
    for (g, v) in gw.iter_mut().zip(w) {
        *g = *g / n + reg * v;
    }
    (loss / n + 0.5 * reg * wn, gw, gb / n)
}

impl LogisticRegression {
    pub fn fit(x: &[Vec<f64>], y: &[u8], config: &LogitConfig) -> Result<Self> {
        if !(config.c > 0.0) {
            return Err(ModelError::InvalidConfig(format!("C must be positive, got {}", config.c)));
        }
        let d = check_training(x, y)?;
        let scaler = Standardizer::fit(x);
        let xs = scaler.transform(x);
        let n = xs.len() as f64;
        // Lipschitz bound of the gradient: ¼·trace of the augmented second moment plus the ridge
        let trace: f64 = 1.0 + xs.iter().flatten().map(|v| v * v).sum::<f64>() / n;
        let step = 1.0 / (0.25 * trace + 1.0 / (config.c * n));
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut loss_curve = Vec::new();
        let mut iterations = 0;
        for _ in 0..config.max_iter {
            let (loss, gw, gb) = objective(&xs, y, &w, b, config.c);
            loss_curve.push(loss);
            let gnorm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
            if gnorm < config.tol {
                break;
            }
            for (wi, gi) in w.iter_mut().zip(&gw) {
                *wi -= step * gi;
            }
            b -= step * gb;
            iterations += 1;
        }
        Ok(Self { scaler, weights: w, intercept: b, iterations, loss_curve })
    }

    pub fn decision(&self, r: &[f64]) -> f64 {
        let z = self.scaler.transform_row(r);
        self.intercept + z.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl Classifier for LogisticRegression {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| sigmoid(self.decision(r))).collect()
    }
}
