//! Dense-matrix reference for small circuits: each gate becomes a full
//! 2^n × 2^n unitary built from Kronecker products, applied by plain
//! matrix-vector multiplication.

use num_complex::Complex64 as C;
use qdefi_core::qsim::{Gate, GateKind};

pub type Mat = Vec<Vec<C>>;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn eye(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| c((i == j) as u8 as f64, 0.0)).collect()).collect()
}

fn single(kind: GateKind, theta: f64) -> Mat {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    match kind {
        GateKind::Rx => vec![vec![c(co, 0.0), c(0.0, -si)], vec![c(0.0, -si), c(co, 0.0)]],
        GateKind::Ry => vec![vec![c(co, 0.0), c(-si, 0.0)], vec![c(si, 0.0), c(co, 0.0)]],
        GateKind::Rz => vec![vec![c(co, -si), c(0.0, 0.0)], vec![c(0.0, 0.0), c(co, si)]],
        GateKind::Cnot => unreachable!(),
    }
}

/// Full unitary of one gate. Qubit q is bit q of the index, so in the Kronecker
/// product the highest qubit is the leftmost factor.
pub fn gate_matrix(g: &Gate, n: usize) -> Mat {
    match g.kind {
        GateKind::Cnot => {
            let dim = 1 << n;
            let (cb, tb) = (1 << g.control.unwrap(), 1 << g.target);
            let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
            for col in 0..dim {
                let row = if col & cb != 0 { col ^ tb } else { col };
                m[row][col] = c(1.0, 0.0);
            }
            m
        }
        kind => {
            let mut m = eye(1);
            for q in (0..n).rev() {
                let f = if q == g.target { single(kind, g.theta) } else { eye(2) };
                m = kron(&m, &f);
            }
            m
        }
    }
}

pub fn matvec(m: &Mat, v: &[C]) -> Vec<C> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

/// Product `U_m ⋯ U_1` of the whole gate list.
pub fn circuit_unitary(gates: &[Gate], n: usize) -> Mat {
    gates.iter().fold(eye(1 << n), |acc, g| matmul(&gate_matrix(g, n), &acc))
}

pub fn z_expectations(state: &[C], n: usize) -> Vec<f64> {
    (0..n)
        .map(|q| {
            state
                .iter()
                .enumerate()
                .map(|(i, a)| if (i >> q) & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
                .sum()
        })
        .collect()
}
