use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::encode::amplitude_encode;
use super::{Gate, GateKind, QsimError, Result, Statevector, MAX_QUBITS};

/// Where a rotation gate takes its angle from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AngleSource {
    /// The gate's own `theta`.
    Fixed,
    /// A trainable parameter.
    Param(usize),
    /// `scale · inputs[index]`.
    Input { index: usize, scale: f64 },
}

/// How classical input reaches the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    /// Inputs drive rotation angles; the circuit starts from `|0…0⟩`.
    Angle,
    /// Inputs become the (normalized, zero-padded) initial amplitudes.
    Amplitude,
}

/// Gate list with trainable and input-driven angle slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    sources: Vec<AngleSource>,
    n_params: usize,
    n_inputs: usize,
    encoding: Encoding,
}

impl Circuit {
    pub fn new(n_qubits: usize, encoding: Encoding) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QsimError::TooManyQubits(n_qubits));
        }
        let n_inputs = match encoding {
            Encoding::Angle => 0,
            Encoding::Amplitude => 1 << n_qubits,
        };
        Ok(Self { n_qubits, gates: Vec::new(), sources: Vec::new(), n_params: 0, n_inputs, encoding })
    }

    fn check_gate(&self, g: &Gate) -> Result<()> {
        let check = |q: usize| {
            if q >= self.n_qubits {
                Err(QsimError::IndexOutOfRange { index: q, n_qubits: self.n_qubits })
            } else {
                Ok(())
            }
        };
        check(g.target)?;
        match (g.kind, g.control) {
            (GateKind::Cnot, Some(c)) => {
                check(c)?;
                if c == g.target {
                    return Err(QsimError::ControlEqualsTarget(c));
                }
            }
            (GateKind::Cnot, None) => return Err(QsimError::TemplateMismatch("CNOT without control".into())),
            (_, Some(_)) => return Err(QsimError::TemplateMismatch("controlled rotations unsupported".into())),
            _ => {}
        }
        Ok(())
    }

    /// Appends a gate with a fixed angle (or a CNOT).
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        self.check_gate(&gate)?;
        self.gates.push(gate);
        self.sources.push(AngleSource::Fixed);
        Ok(())
    }

    /// Appends a rotation driven by trainable parameter `param`.
    pub fn push_param(&mut self, kind: GateKind, target: usize, param: usize) -> Result<()> {
        if !kind.is_rotation() {
            return Err(QsimError::NonShiftableGate(param));
        }
        let g = Gate { kind, target, control: None, theta: 0.0 };
        self.check_gate(&g)?;
        self.gates.push(g);
        self.sources.push(AngleSource::Param(param));
        self.n_params = self.n_params.max(param + 1);
        Ok(())
    }

    /// Appends a rotation by `scale · inputs[index]`.
    pub fn push_input(&mut self, kind: GateKind, target: usize, index: usize, scale: f64) -> Result<()> {
        if self.encoding != Encoding::Angle || !kind.is_rotation() {
            return Err(QsimError::TemplateMismatch("input angles need an angle-encoded rotation".into()));
        }
        let g = Gate { kind, target, control: None, theta: 0.0 };
        self.check_gate(&g)?;
        self.gates.push(g);
        self.sources.push(AngleSource::Input { index, scale });
        self.n_inputs = self.n_inputs.max(index + 1);
        Ok(())
    }

    pub fn cnot_chain(&mut self) -> Result<()> {
        for i in 0..self.n_qubits.saturating_sub(1) {
            self.push(Gate::cnot(i, i + 1))?;
        }
        Ok(())
    }

    /// Chain plus the wrap-around CNOT from the last qubit to qubit 0.
    pub fn cnot_ring(&mut self) -> Result<()> {
        self.cnot_chain()?;
        if self.n_qubits > 2 {
            self.push(Gate::cnot(self.n_qubits - 1, 0))?;
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Angle inputs expected, or the maximum amplitude-vector length.
    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn sources(&self) -> &[AngleSource] {
        &self.sources
    }

    /// Gate position → trainable parameter index.
    pub fn param_slots(&self) -> BTreeMap<usize, usize> {
        self.sources
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                AngleSource::Param(p) => Some((i, *p)),
                _ => None,
            })
            .collect()
    }

    pub(crate) fn check_args(&self, inputs: &[f64], params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(QsimError::TemplateMismatch(format!(
                "{} parameters given, circuit has {}",
                params.len(),
                self.n_params
            )));
        }
        let ok = match self.encoding {
            Encoding::Angle => inputs.len() == self.n_inputs,
            Encoding::Amplitude => !inputs.is_empty() && inputs.len() <= self.n_inputs,
        };
        if !ok {
            return Err(QsimError::TemplateMismatch(format!(
                "{} inputs given for a {:?}-encoded circuit taking {}",
                inputs.len(),
                self.encoding,
                self.n_inputs
            )));
        }
        Ok(())
    }

    /// Gates with every angle resolved.
    pub fn bind(&self, inputs: &[f64], params: &[f64]) -> Result<Vec<Gate>> {
        self.check_args(inputs, params)?;
        Ok(self.bind_unchecked(inputs, params))
    }

    pub(crate) fn bind_unchecked(&self, inputs: &[f64], params: &[f64]) -> Vec<Gate> {
        self.gates
            .iter()
            .zip(&self.sources)
            .map(|(g, s)| match *s {
                AngleSource::Fixed => *g,
                AngleSource::Param(p) => Gate { theta: params[p], ..*g },
                AngleSource::Input { index, scale } => Gate { theta: scale * inputs[index], ..*g },
            })
            .collect()
    }

    pub fn initial_state(&self, inputs: &[f64]) -> Result<Statevector> {
        match self.encoding {
            Encoding::Angle => Statevector::zero(self.n_qubits),
            Encoding::Amplitude => amplitude_encode(inputs, self.n_qubits),
        }
    }

    /// Final state for the given inputs and parameters.
    pub fn run(&self, inputs: &[f64], params: &[f64]) -> Result<Statevector> {
        let gates = self.bind(inputs, params)?;
        let mut s = self.initial_state(inputs)?;
        for g in &gates {
            s.apply_unchecked(g);
        }
        Ok(s)
    }

    /// `(⟨Z_0⟩, …, ⟨Z_{n−1}⟩)` of the final state.
    pub fn expectations(&self, inputs: &[f64], params: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(inputs, params)?.expect_all_z())
    }
}
