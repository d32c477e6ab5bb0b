use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Circuit, Encoding, GateKind, QsimError, Result, Statevector};

/// Kernel used by the support-vector classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `|⟨φ(a)|φ(b)⟩|²` under [`FeatureMap`].
    #[default]
    Fidelity,
    /// `exp(−γ‖a−b‖²)` with `γ = 1/(d·Var(X))`.
    Rbf,
}

/// Angle feature map: `RY(x_i)` on every qubit, a CNOT chain, then `RZ(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    circuit: Circuit,
}

impl FeatureMap {
    pub fn new(n_features: usize) -> Result<Self> {
        let mut c = Circuit::new(n_features, Encoding::Angle)?;
        for i in 0..n_features {
            c.push_input(GateKind::Ry, i, i, 1.0)?;
        }
        c.cnot_chain()?;
        for i in 0..n_features {
            c.push_input(GateKind::Rz, i, i, 1.0)?;
        }
        Ok(Self { circuit: c })
    }

    pub fn state(&self, x: &[f64]) -> Result<Statevector> {
        if x.len() != self.circuit.n_qubits() {
            return Err(QsimError::DimensionMismatch { expected: self.circuit.n_qubits(), got: x.len() });
        }
        self.circuit.run(x, &[])
    }
}

/// `|⟨φ(x1)|φ(x2)⟩|²` for the standard angle feature map.
pub fn fidelity_kernel(x1: &[f64], x2: &[f64]) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(QsimError::DimensionMismatch { expected: x1.len(), got: x2.len() });
    }
    let map = FeatureMap::new(x1.len())?;
    Ok(map.state(x1)?.inner(&map.state(x2)?).norm_sqr())
}

/// Gram matrix `K[i][j] = k(a_i, b_j)`, simulating each sample's state once.
pub fn kernel_matrix(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = a.first().or(b.first()).map_or(0, Vec::len);
    let map = FeatureMap::new(d)?;
    let sa: Vec<Statevector> = a.par_iter().map(|x| map.state(x)).collect::<Result<_>>()?;
    let sb: Vec<Statevector> = b.par_iter().map(|x| map.state(x)).collect::<Result<_>>()?;
    Ok(sa.par_iter().map(|u| sb.iter().map(|v| u.inner(v).norm_sqr()).collect()).collect())
}

/// RBF Gram matrix with `γ = 1/(d·Var(X_train))` (population variance over all entries).
pub fn rbf_kernel_matrix(a: &[Vec<f64>], b: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    a.iter()
        .map(|u| {
            b.iter()
                .map(|v| {
                    let d2: f64 = u.iter().zip(v).map(|(x, y)| (x - y) * (x - y)).sum();
                    (-gamma * d2).exp()
                })
                .collect()
        })
        .collect()
}

