use num_complex::Complex64;

use super::{Gate, GateKind, QsimError, Result, MAX_QUBITS};

/// Dense statevector over `n_qubits`, little-endian: qubit `q` is bit `q` of the
/// basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_width(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(QsimError::TooManyQubits(n_qubits));
    }
    Ok(())
}

impl Statevector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_width(n_qubits)?;
        let dim = 1 << n_qubits;
        if index >= dim {
            return Err(QsimError::IndexOutOfRange { index, n_qubits });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps amplitudes that must already have unit norm (within 1e-10).
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_width(n_qubits)?;
        if amps.len() != 1 << n_qubits {
            return Err(QsimError::DimensionMismatch { expected: 1 << n_qubits, got: amps.len() });
        }
        let s = Self { n_qubits, amps };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(QsimError::NotNormalized(norm));
        }
        Ok(s)
    }

    pub(crate) fn from_raw(n_qubits: usize, amps: Vec<Complex64>) -> Self {
        Self { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(QsimError::IndexOutOfRange { index: q, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        self.check_qubit(gate.target)?;
        if let Some(c) = gate.control {
            self.check_qubit(c)?;
            if c == gate.target {
                return Err(QsimError::ControlEqualsTarget(c));
            }
        }
        self.apply_unchecked(gate);
        Ok(())
    }

    /// Functional form of [`Statevector::apply`].
    pub fn applied(&self, gate: &Gate) -> Result<Statevector> {
        let mut s = self.clone();
        s.apply(gate)?;
        Ok(s)
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        match gate.kind {
            GateKind::Cnot => {
                let c = 1usize << gate.control.expect("CNOT has a control");
                let t = 1usize << gate.target;
                for i in 0..self.amps.len() {
                    if i & c != 0 && i & t == 0 {
                        self.amps.swap(i, i | t);
                    }
                }
            }
            kind => {
                let m = rotation_matrix(kind, gate.theta);
                self.apply_single(gate.target, &m);
            }
        }
    }

    /// Applies a 2×2 matrix `[[m00, m01], [m10, m11]]` to one qubit.
    pub(crate) fn apply_single(&mut self, q: usize, m: &[Complex64; 4]) {
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | bit];
                self.amps[i] = m[0] * a0 + m[1] * a1;
                self.amps[i | bit] = m[2] * a0 + m[3] * a1;
            }
        }
    }

    /// `⟨ψ|Z_q|ψ⟩`.
    pub fn expect_z(&self, q: usize) -> Result<f64> {
        self.check_qubit(q)?;
        Ok(self.expect_z_unchecked(q))
    }

    fn expect_z_unchecked(&self, q: usize) -> f64 {
        let bit = 1usize << q;
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    /// `(⟨Z_0⟩, …, ⟨Z_{n−1}⟩)`.
    pub fn expect_all_z(&self) -> Vec<f64> {
        (0..self.n_qubits).map(|q| self.expect_z_unchecked(q)).collect()
    }
}

/// Unitary of a rotation gate: `exp(−iθP/2)`.
pub fn rotation_matrix(kind: GateKind, theta: f64) -> [Complex64; 4] {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    let z = Complex64::new(0.0, 0.0);
    match kind {
        GateKind::Rx => [Complex64::new(c, 0.0), Complex64::new(0.0, -s), Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        GateKind::Ry => [Complex64::new(c, 0.0), Complex64::new(-s, 0.0), Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        GateKind::Rz => [Complex64::new(c, -s), z, z, Complex64::new(c, s)],
        GateKind::Cnot => panic!("CNOT is not a rotation"),
    }
}
