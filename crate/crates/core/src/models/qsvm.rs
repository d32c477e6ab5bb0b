use serde::{Deserialize, Serialize};

use super::{check_training, Classifier, ModelError, Result};
use crate::qsim::{kernel_matrix, rbf_kernel_matrix, AngleScaler, KernelKind};
use crate::stats::{population_var, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QsvmConfig {
    pub c: f64,
    pub kernel: KernelKind,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QsvmConfig {
    fn default() -> Self {
        Self { c: 1.0, kernel: KernelKind::Fidelity, tol: 1e-9, max_iter: 1_000_000 }
    }
}

/// Solution of the soft-margin dual `max Σα − ½ΣΣ α_i α_j y_i y_j K_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Dual objective at `alpha` (the maximized value).
    pub objective: f64,
    pub iterations: usize,
}

const TAU: f64 = 1e-12;

/// SMO with second-order working-set selection. `y` holds ±1.
pub fn smo_solve(k: &[Vec<f64>], y: &[f64], c: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − eᵀα
    let mut g = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && -y[t] * g[t] > gmax {
                gmax = -y[t] * g[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * g[t];
            gmax2 = gmax2.max(v);
            let diff = gmax + v;
            if diff > 0.0 {
                let mut quad = k[i][i] + k[t][t] - 2.0 * k[i][t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -diff * diff / quad;
                if obj < best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < tol {
            break;
        }
        let Some(j) = j_sel else { break };
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let mut quad = k[i][i] + k[j][j] - 2.0 * k[i][j];
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (g[i] - g[j]) / quad;
            let sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            g[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * g[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 { free_sum / free_n as f64 } else { 0.5 * (ub + lb) };
    let objective = -0.5 * alpha.iter().zip(&g).map(|(a, gi)| a * (gi - 1.0)).sum::<f64>();
    DualSolution { alpha, bias: -rho, objective, iterations }
}

/// Fails when `K + 1e-8·I` has no Cholesky factor, i.e. an eigenvalue below −1e-8.
fn check_psd(k: &[Vec<f64>]) -> Result<()> {
    let n = k.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[i][j] + if i == j { 1e-8 } else { 0.0 };
            for m in 0..j {
                s -= l[i][m] * l[j][m];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(ModelError::NonPsdKernel(i));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Ok(())
}

/// Kernel support-vector classifier on angle-encoded features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qsvm {
    pub config: QsvmConfig,
    pub scaler: AngleScaler,
    /// RBF width; unused by the fidelity kernel.
    pub gamma: f64,
    pub support: Vec<Vec<f64>>,
    /// `α_i·y_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub dual: DualSolution,
}

impl Qsvm {
    pub fn fit(x: &[Vec<f64>], y: &[u8], config: &QsvmConfig) -> Result<Self> {
        if !(config.c > 0.0) {
            return Err(ModelError::InvalidConfig(format!("C must be positive, got {}", config.c)));
        }
        let d = check_training(x, y)?;
        let scaler = AngleScaler::fit(x);
        let angles: Vec<Vec<f64>> = x.iter().map(|r| scaler.transform(r)).collect();
        let all: Vec<f64> = angles.iter().flatten().copied().collect();
        let var = population_var(&all);
        let gamma = if var > 0.0 { 1.0 / (d as f64 * var) } else { 1.0 };
        let mut k = match config.kernel {
            KernelKind::Fidelity => kernel_matrix(&angles, &angles)?,
            KernelKind::Rbf => rbf_kernel_matrix(&angles, &angles, gamma),
        };
        for row in k.iter_mut() {
            for v in row.iter_mut() {
                *v = v.max(0.0);
            }
        }
        check_psd(&k)?;
        let ys: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
        let dual = smo_solve(&k, &ys, config.c, config.tol, config.max_iter);
        let (support, coef): (Vec<_>, Vec<_>) = dual
            .alpha
            .iter()
            .zip(&ys)
            .zip(&angles)
            .filter(|((a, _), _)| **a > 0.0)
            .map(|((a, yi), r)| (r.clone(), a * yi))
            .unzip();
        Ok(Self { config: *config, scaler, gamma, support, coef, bias: dual.bias, dual })
    }

    pub fn decision(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let angles: Vec<Vec<f64>> = x.iter().map(|r| self.scaler.transform(r)).collect();
        if self.support.is_empty() {
            return vec![self.bias; x.len()];
        }
        let k = match self.config.kernel {
            KernelKind::Fidelity => kernel_matrix(&angles, &self.support).expect("dimensions fixed at fit"),
            KernelKind::Rbf => rbf_kernel_matrix(&angles, &self.support, self.gamma),
        };
        k.iter().map(|row| self.bias + row.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()).collect()
    }
}

impl Classifier for Qsvm {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<f64> {
        self.decision(x).into_iter().map(sigmoid).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::toy;

    #[test]
    fn two_orthogonal_points() {
        // orthogonal encoded states give the identity Gram matrix
        let k = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let sol = smo_solve(&k, &[-1.0, 1.0], 1.0, 1e-12, 1000);
        assert_eq!(sol.alpha, vec![1.0, 1.0]);
        let f = |i: usize| sol.bias - sol.alpha[0] * k[i][0] + sol.alpha[1] * k[i][1];
        assert!(f(0) < 0.0 && f(1) > 0.0);
        assert!((sol.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_gram_has_unit_diagonal() {
        let (x, _) = toy::step(10, 4, 8);
        let sc = AngleScaler::fit(&x);
        let a: Vec<Vec<f64>> = x.iter().map(|r| sc.transform(r)).collect();
        let k = kernel_matrix(&a, &a).unwrap();
        assert!((0..10).all(|i| (k[i][i] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn dual_feasible() {
        let (x, y) = toy::step(40, 3, 2);
        for kernel in [KernelKind::Fidelity, KernelKind::Rbf] {
            let m = Qsvm::fit(&x, &y, &QsvmConfig { kernel, ..Default::default() }).unwrap();
            let ys: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
            assert!(m.dual.alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
            let s: f64 = m.dual.alpha.iter().zip(&ys).map(|(a, y)| a * y).sum();
            assert!(s.abs() < 1e-9);
        }
    }

    #[test]
    fn non_psd_rejected() {
        let k = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert_eq!(check_psd(&k), Err(ModelError::NonPsdKernel(1)));
    }
}
