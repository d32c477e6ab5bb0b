//! Exact statevector simulator for the variational circuits used by the quantum
//! and hybrid models.
//!
//! Qubit ordering is little-endian: qubit `q` is bit `q` of a basis-state index,
//! so `|q1 q0⟩ = |10⟩` is index 2.

mod circuit;
mod encode;
mod grad;
mod kernel;
mod state;
mod templates;

pub use circuit::{AngleSource, Circuit, Encoding};
pub use encode::{amplitude_encode, angle_encode, AngleScaler};
pub use grad::{parameter_shift_grad, parameter_shift_jacobian, shift_vjp, vjp, VjpResult};
pub use kernel::{fidelity_kernel, kernel_matrix, rbf_kernel_matrix, FeatureMap, KernelKind};
pub use state::{rotation_matrix, Statevector};
pub use templates::{run_vqc, Template};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on circuit width.
pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum QsimError {
    #[error("qubit count {0} outside 1..=12")]
    TooManyQubits(usize),
    #[error("index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("control and target are both qubit {0}")]
    ControlEqualsTarget(usize),
    #[error("cannot amplitude-encode a zero vector")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature {0} has min == max in the training data")]
    DegenerateBounds(usize),
    #[error("template mismatch: {0}")]
    TemplateMismatch(String),
    #[error("unknown circuit template `{0}`")]
    UnknownTemplate(String),
    #[error("parameter {0} drives a gate that the shift rule does not cover")]
    NonShiftableGate(usize),
    #[error("state norm² is {0}, expected 1")]
    NotNormalized(f64),
}

pub type Result<T> = std::result::Result<T, QsimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cnot,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        !matches!(self, GateKind::Cnot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    /// Rotation angle in radians; ignored for CNOT.
    pub theta: f64,
}

impl Gate {
    pub fn rx(target: usize, theta: f64) -> Self {
        Self { kind: GateKind::Rx, target, control: None, theta }
    }

    pub fn ry(target: usize, theta: f64) -> Self {
        Self { kind: GateKind::Ry, target, control: None, theta }
    }

    pub fn rz(target: usize, theta: f64) -> Self {
        Self { kind: GateKind::Rz, target, control: None, theta }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cnot, target, control: Some(control), theta: 0.0 }
    }

    /// Same gate with the angle negated (the inverse for rotations; CNOT is self-inverse).
    pub fn inverse(&self) -> Self {
        Self { theta: -self.theta, ..*self }
    }
}
