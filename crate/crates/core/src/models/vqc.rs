use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training, Adam, Classifier, ModelError, Result};
use crate::qsim::{parameter_shift_jacobian, AngleScaler, Circuit, Template};
use crate::stats::sigmoid;

/// Qubits carrying the secondary RZ angles in 8-feature mode.
pub const EXTRA_RZ_QUBITS: [usize; 2] = [3, 5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqcConfig {
    pub layers: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a lower validation loss.
    pub patience: usize,
    pub learning_rate: f64,
    /// Initial circuit angles are drawn from `U(−init_scale, init_scale)`.
    pub init_scale: f64,
}

impl VqcConfig {
    pub fn vqe() -> Self {
        Self { layers: 2, epochs: 300, patience: 30, learning_rate: 0.01, init_scale: 0.1 }
    }

    pub fn qnn() -> Self {
        Self { layers: 3, ..Self::vqe() }
    }
}

impl Default for VqcConfig {
    fn default() -> Self {
        Self::vqe()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Family {
    Vqe,
    Qnn,
}

/// Width and extra inputs for `d` features: up to 6 features get one qubit each;
/// 8 features use 6 qubits with the last two as RZ angles on qubits 3 and 5.
fn layout(d: usize) -> Result<(usize, &'static [usize])> {
    match d {
        1..=6 => Ok((d, &[])),
        8 => Ok((6, &EXTRA_RZ_QUBITS)),
        _ => Err(ModelError::InvalidConfig(format!("quantum models take 1-6 or 8 features, got {d}"))),
    }
}

fn build_circuit(family: Family, d: usize, layers: usize) -> Result<Circuit> {
    let (n_qubits, extra) = layout(d)?;
    let t = match family {
        Family::Vqe => Template::Vqe { n_qubits, layers },
        Family::Qnn => Template::Qnn { n_qubits, layers },
    };
    Ok(t.build_with_extra_rz(extra)?)
}

/// Trainable state shared by the two variational classifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Core {
    family: Family,
    circuit: Circuit,
    scaler: AngleScaler,
    theta: Vec<f64>,
    /// Readout weights then bias (VQE only).
    readout: Vec<f64>,
}

impl Core {
    fn z(&self, angles: &[f64], theta: &[f64]) -> Vec<f64> {
        self.circuit.expectations(angles, theta).expect("arguments sized at fit")
    }

    fn prob_from_z(&self, z: &[f64], readout: &[f64]) -> f64 {
        match self.family {
            Family::Vqe => {
                let n = z.len();
                sigmoid(z.iter().zip(readout).map(|(a, b)| a * b).sum::<f64>() + readout[n])
            }
            Family::Qnn => (1.0 + z[0]) / 2.0,
        }
    }

    fn probs(&self, angles: &[Vec<f64>], theta: &[f64], readout: &[f64]) -> Vec<f64> {
        angles.par_iter().map(|a| self.prob_from_z(&self.z(a, theta), readout)).collect()
    }

    /// Mean cross-entropy and its gradient over `(theta, readout)`.
    fn loss_grad(&self, angles: &[Vec<f64>], y: &[u8], theta: &[f64], readout: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let n = angles.len() as f64;
        let per: Vec<(f64, Vec<f64>, Vec<f64>)> = angles
            .par_iter()
            .zip(y)
            .map(|(a, &t)| {
                let t = t as f64;
                let jac = parameter_shift_jacobian(&self.circuit, a, theta).expect("arguments sized at fit");
                let z = self.z(a, theta);
                match self.family {
                    Family::Vqe => {
                        let p = self.prob_from_z(&z, readout);
                        let e = (p - t) / n;
                        let gt = jac.iter().map(|row| e * row.iter().zip(readout).map(|(a, b)| a * b).sum::<f64>()).collect();
                        let mut gr: Vec<f64> = z.iter().map(|zi| e * zi).collect();
                        gr.push(e);
                        (crate::stats::log_loss(p, t), gt, gr)
                    }
                    Family::Qnn => {
                        let p = self.prob_from_z(&z, readout).clamp(QNN_EPS, 1.0 - QNN_EPS);
                        let loss = -(t * p.ln() + (1.0 - t) * (1.0 - p).ln());
                        let dp = -(t / p - (1.0 - t) / (1.0 - p)) / n;
                        let gt = jac.iter().map(|row| dp * 0.5 * row[0]).collect();
                        (loss, gt, Vec::new())
                    }
                }
            })
            .collect();
        let mut loss = 0.0;
        let mut gt = vec![0.0; theta.len()];
        let mut gr = vec![0.0; readout.len()];
        for (l, a, b) in per {
            loss += l;
            gt.iter_mut().zip(&a).for_each(|(g, v)| *g += v);
            gr.iter_mut().zip(&b).for_each(|(g, v)| *g += v);
        }
        (loss / n, gt, gr)
    }

    fn loss(&self, angles: &[Vec<f64>], y: &[u8], theta: &[f64], readout: &[f64]) -> f64 {
        let p = self.probs(angles, theta, readout);
        let eps = if self.family == Family::Qnn { QNN_EPS } else { 1e-15 };
        p.iter()
            .zip(y)
            .map(|(&p, &t)| {
                let p = p.clamp(eps, 1.0 - eps);
                let t = t as f64;
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / p.len() as f64
    }
}

/// QNN probabilities are clamped away from 0 and 1 by this margin in the loss.
const QNN_EPS: f64 = 1e-7;

/// Per-epoch record of a variational fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
}

fn train(
    family: Family,
    x: &[Vec<f64>],
    y: &[u8],
    val: Option<(&[Vec<f64>], &[u8])>,
    config: &VqcConfig,
    seed: u64,
) -> Result<(Core, TrainHistory)> {
    let d = check_training(x, y)?;
    let circuit = build_circuit(family, d, config.layers)?;
    let scaler = AngleScaler::fit(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: Vec<f64> =
        (0..circuit.n_params()).map(|_| rng.random_range(-config.init_scale..=config.init_scale)).collect();
    let readout = match family {
        Family::Vqe => vec![0.0; circuit.n_qubits() + 1],
        Family::Qnn => Vec::new(),
    };
    let mut core = Core { family, circuit, scaler, theta, readout };
    let angles: Vec<Vec<f64>> = x.iter().map(|r| core.scaler.transform(r)).collect();
    let val_angles: Option<(Vec<Vec<f64>>, &[u8])> =
        val.map(|(vx, vy)| (vx.iter().map(|r| core.scaler.transform(r)).collect(), vy));

    let n_theta = core.theta.len();
    let mut flat: Vec<f64> = core.theta.iter().chain(&core.readout).copied().collect();
    let mut opt = Adam::new(flat.len(), config.learning_rate);
    let mut hist = TrainHistory::default();
    let mut best = (f64::INFINITY, flat.clone(), 0usize);
    for epoch in 0..config.epochs {
        let (loss, gt, gr) = core.loss_grad(&angles, y, &flat[..n_theta], &flat[n_theta..]);
        hist.train_loss.push(loss);
        let monitor = match &val_angles {
            Some((va, vy)) => {
                let l = core.loss(va, vy, &flat[..n_theta], &flat[n_theta..]);
                hist.val_loss.push(l);
                l
            }
            None => loss,
        };
        if monitor < best.0 {
            best = (monitor, flat.clone(), epoch);
        } else if epoch - best.2 >= config.patience {
            break;
        }
        let grads: Vec<f64> = gt.into_iter().chain(gr).collect();
        opt.step(&mut flat, &grads);
    }
    // the final update is scored too, so the returned parameters are never worse than any seen
    let last = core.loss(&angles, y, &flat[..n_theta], &flat[n_theta..]);
    let last_monitor = match &val_angles {
        Some((va, vy)) => core.loss(va, vy, &flat[..n_theta], &flat[n_theta..]),
        None => last,
    };
    if last_monitor < best.0 {
        best = (last_monitor, flat.clone(), hist.train_loss.len());
    }
    hist.best_epoch = best.2;
    core.theta = best.1[..n_theta].to_vec();
    core.readout = best.1[n_theta..].to_vec();
    Ok((core, hist))
}

/// Variational classifier: `sign(Σ w_i⟨Z_i⟩ + b)`, probability `σ(margin)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeModel {
    core: Core,
    pub history: TrainHistory,
}

impl VqeModel {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[u8],
        val: Option<(&[Vec<f64>], &[u8])>,
        config: &VqcConfig,
        seed: u64,
    ) -> Result<Self> {
        let (core, history) = train(Family::Vqe, x, y, val, config, seed)?;
        Ok(Self { core, history })
    }

    pub fn params(&self) -> &[f64] {
        &self.core.theta
    }

    /// Readout weights followed by the bias.
    pub fn readout(&self) -> &[f64] {
        &self.core.readout
    }

    pub fn circuit(&self) -> &Circuit {
        &self.core.circuit
    }

    /// Training loss and its gradient at the given parameters, for audits.
    pub fn loss_and_grad(&self, x: &[Vec<f64>], y: &[u8], theta: &[f64], readout: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let a: Vec<Vec<f64>> = x.iter().map(|r| self.core.scaler.transform(r)).collect();
        self.core.loss_grad(&a, y, theta, readout)
    }
}

impl Classifier for VqeModel {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let a: Vec<Vec<f64>> = x.iter().map(|r| self.core.scaler.transform(r)).collect();
        self.core.probs(&a, &self.core.theta, &self.core.readout)
    }
}

/// Quantum neural network with `P(y = 1) = (1 + ⟨Z_0⟩)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QnnModel {
    core: Core,
    pub history: TrainHistory,
}

impl QnnModel {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[u8],
        val: Option<(&[Vec<f64>], &[u8])>,
        config: &VqcConfig,
        seed: u64,
    ) -> Result<Self> {
        let (core, history) = train(Family::Qnn, x, y, val, config, seed)?;
        Ok(Self { core, history })
    }

    pub fn params(&self) -> &[f64] {
        &self.core.theta
    }

    pub fn circuit(&self) -> &Circuit {
        &self.core.circuit
    }

    pub fn loss_and_grad(&self, x: &[Vec<f64>], y: &[u8], theta: &[f64]) -> (f64, Vec<f64>) {
        let a: Vec<Vec<f64>> = x.iter().map(|r| self.core.scaler.transform(r)).collect();
        let (l, g, _) = self.core.loss_grad(&a, y, theta, &[]);
        (l, g)
    }
}

impl Classifier for QnnModel {
    fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let a: Vec<Vec<f64>> = x.iter().map(|r| self.core.scaler.transform(r)).collect();
        self.core.probs(&a, &self.core.theta, &[])
    }
}
