use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{QsimError, Result, Statevector, MAX_QUBITS};

/// `θ = (clip(x) − min)/(max − min) · 2π` per feature.
pub fn angle_encode(x: &[f64], bounds: &[(f64, f64)]) -> Result<Vec<f64>> {
    if x.len() != bounds.len() {
        return Err(QsimError::DimensionMismatch { expected: bounds.len(), got: x.len() });
    }
    x.iter()
        .zip(bounds)
        .enumerate()
        .map(|(i, (&v, &(lo, hi)))| {
            if hi <= lo {
                return Err(QsimError::DegenerateBounds(i));
            }
            Ok(scale(v, lo, hi))
        })
        .collect()
}

fn scale(v: f64, lo: f64, hi: f64) -> f64 {
    (v.clamp(lo, hi) - lo) / (hi - lo) * TAU
}

/// Angle encoder fitted on training rows. Features constant in training map to π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleScaler {
    pub bounds: Vec<(f64, f64)>,
}

impl AngleScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let bounds = (0..d)
            .map(|j| {
                rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])))
            })
            .collect();
        Self { bounds }
    }

    /// Indices of features with `min == max` in the training data.
    pub fn degenerate(&self) -> Vec<usize> {
        self.bounds.iter().enumerate().filter(|(_, (lo, hi))| hi <= lo).map(|(i, _)| i).collect()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| if hi <= lo { std::f64::consts::PI } else { scale(v, lo, hi) })
            .collect()
    }
}

/// `x / ‖x‖`, zero-padded to `2^n_qubits` amplitudes.
pub fn amplitude_encode(x: &[f64], n_qubits: usize) -> Result<Statevector> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(QsimError::TooManyQubits(n_qubits));
    }
    let dim = 1usize << n_qubits;
    if x.len() > dim {
        return Err(QsimError::DimensionMismatch { expected: dim, got: x.len() });
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(QsimError::ZeroVector);
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for (a, v) in amps.iter_mut().zip(x) {
        *a = Complex64::new(v / norm, 0.0);
    }
    Ok(Statevector::from_raw(n_qubits, amps))
}
