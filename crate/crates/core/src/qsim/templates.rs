use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Circuit, Encoding, GateKind, QsimError, Result};

/// Named circuit families addressable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Template {
    /// `RY(x_i)RZ(x_i/2)` feature map, then `layers` of per-qubit `RY, RZ` and a CNOT chain.
    Qnn { n_qubits: usize, layers: usize },
    /// `RY(x_i)` feature map, then `layers` of per-qubit `RY` and a CNOT chain.
    Vqe { n_qubits: usize, layers: usize },
    /// Amplitude-encoded input, then `layers` of per-qubit `RY` and a CNOT chain.
    QasaRy { n_qubits: usize, layers: usize },
    /// `RX(x_i)`, `RX(θ)`, CNOT ring, `RX(θ)`, CNOT ring.
    QrwkvRx { n_qubits: usize },
    /// One `RY(θ)` on a single qubit.
    SingleRy,
}

impl Template {
    pub const QNN6X3: Template = Template::Qnn { n_qubits: 6, layers: 3 };
    pub const VQE6X2: Template = Template::Vqe { n_qubits: 6, layers: 2 };
    pub const QASA_RY: Template = Template::QasaRy { n_qubits: 4, layers: 2 };
    pub const QRWKV_RX4: Template = Template::QrwkvRx { n_qubits: 4 };

    pub fn id(&self) -> String {
        match *self {
            Template::Qnn { n_qubits, layers } => format!("qnn{n_qubits}x{layers}"),
            Template::Vqe { n_qubits, layers } => format!("vqe{n_qubits}x{layers}"),
            Template::QasaRy { n_qubits: 4, layers: 2 } => "qasa_ry".into(),
            Template::QasaRy { n_qubits, layers } => format!("qasa_ry{n_qubits}x{layers}"),
            Template::QrwkvRx { n_qubits } => format!("qrwkv_rx{n_qubits}"),
            Template::SingleRy => "single_ry".into(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        match *self {
            Template::Qnn { n_qubits, .. }
            | Template::Vqe { n_qubits, .. }
            | Template::QasaRy { n_qubits, .. }
            | Template::QrwkvRx { n_qubits } => n_qubits,
            Template::SingleRy => 1,
        }
    }

    pub fn build(&self) -> Result<Circuit> {
        self.build_with_extra_rz(&[])
    }

    /// Builds the circuit with additional `RZ(x)` input gates right after the
    /// feature map: input `n_qubits + k` drives an RZ on qubit `extra_rz[k]`.
    /// Only angle-encoded QNN and VQE templates accept extras.
    pub fn build_with_extra_rz(&self, extra_rz: &[usize]) -> Result<Circuit> {
        let n = self.n_qubits();
        if !extra_rz.is_empty() && !matches!(self, Template::Qnn { .. } | Template::Vqe { .. }) {
            return Err(QsimError::TemplateMismatch(format!("{} takes no extra inputs", self.id())));
        }
        let extras = |c: &mut Circuit| -> Result<()> {
            for (k, &q) in extra_rz.iter().enumerate() {
                c.push_input(GateKind::Rz, q, n + k, 1.0)?;
            }
            Ok(())
        };
        match *self {
            Template::Qnn { layers, .. } => {
                let mut c = Circuit::new(n, Encoding::Angle)?;
                for i in 0..n {
                    c.push_input(GateKind::Ry, i, i, 1.0)?;
                    c.push_input(GateKind::Rz, i, i, 0.5)?;
                }
                extras(&mut c)?;
                for l in 0..layers {
                    for i in 0..n {
                        c.push_param(GateKind::Ry, i, 2 * n * l + i)?;
                        c.push_param(GateKind::Rz, i, 2 * n * l + n + i)?;
                    }
                    c.cnot_chain()?;
                }
                Ok(c)
            }
            Template::Vqe { layers, .. } => {
                let mut c = Circuit::new(n, Encoding::Angle)?;
                for i in 0..n {
                    c.push_input(GateKind::Ry, i, i, 1.0)?;
                }
                extras(&mut c)?;
                for l in 0..layers {
                    for i in 0..n {
                        c.push_param(GateKind::Ry, i, n * l + i)?;
                    }
                    c.cnot_chain()?;
                }
                Ok(c)
            }
            Template::QasaRy { layers, .. } => {
                let mut c = Circuit::new(n, Encoding::Amplitude)?;
                for l in 0..layers {
                    for i in 0..n {
                        c.push_param(GateKind::Ry, i, n * l + i)?;
                    }
                    c.cnot_chain()?;
                }
                Ok(c)
            }
            Template::QrwkvRx { .. } => {
                let mut c = Circuit::new(n, Encoding::Angle)?;
                for i in 0..n {
                    c.push_input(GateKind::Rx, i, i, 1.0)?;
                }
                for i in 0..n {
                    c.push_param(GateKind::Rx, i, i)?;
                }
                c.cnot_ring()?;
                for i in 0..n {
                    c.push_param(GateKind::Rx, i, n + i)?;
                }
                c.cnot_ring()?;
                Ok(c)
            }
            Template::SingleRy => {
                let mut c = Circuit::new(1, Encoding::Angle)?;
                c.push_param(GateKind::Ry, 0, 0)?;
                Ok(c)
            }
        }
    }
}

fn parse_dims(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once('x')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

impl FromStr for Template {
    type Err = QsimError;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || QsimError::UnknownTemplate(s.to_string());
        let t = if s == "qasa_ry" {
            Template::QASA_RY
        } else if s == "single_ry" {
            Template::SingleRy
        } else if let Some(rest) = s.strip_prefix("qasa_ry") {
            let (n_qubits, layers) = parse_dims(rest).ok_or_else(unknown)?;
            Template::QasaRy { n_qubits, layers }
        } else if let Some(rest) = s.strip_prefix("qrwkv_rx") {
            Template::QrwkvRx { n_qubits: rest.parse().map_err(|_| unknown())? }
        } else if let Some(rest) = s.strip_prefix("qnn") {
            let (n_qubits, layers) = parse_dims(rest).ok_or_else(unknown)?;
            Template::Qnn { n_qubits, layers }
        } else if let Some(rest) = s.strip_prefix("vqe") {
            let (n_qubits, layers) = parse_dims(rest).ok_or_else(unknown)?;
            Template::Vqe { n_qubits, layers }
        } else {
            return Err(unknown());
        };
        if t.n_qubits() == 0 || t.n_qubits() > super::MAX_QUBITS {
            return Err(QsimError::TooManyQubits(t.n_qubits()));
        }
        Ok(t)
    }
}

/// Expectation vector `(⟨Z_0⟩, …, ⟨Z_{n−1}⟩)` of a template on `x` with `params`.
pub fn run_vqc(x: &[f64], params: &[f64], template: &Template) -> Result<Vec<f64>> {
    template.build()?.expectations(x, params)
}
