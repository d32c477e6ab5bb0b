use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::{AngleSource, Circuit, Encoding, GateKind, Result, Statevector};

/// `∂⟨Z_output⟩/∂θ_j` for every trainable parameter by the two-term shift rule.
///
/// A parameter feeding several gates gets the sum of its per-gate shift terms.
pub fn parameter_shift_grad(circuit: &Circuit, inputs: &[f64], params: &[f64], output: usize) -> Result<Vec<f64>> {
    let jac = parameter_shift_jacobian(circuit, inputs, params)?;
    if output >= circuit.n_qubits() {
        return Err(super::QsimError::IndexOutOfRange { index: output, n_qubits: circuit.n_qubits() });
    }
    Ok(jac.into_iter().map(|row| row[output]).collect())
}

/// `jac[j][i] = ∂⟨Z_i⟩/∂θ_j`, by parameter shift.
pub fn parameter_shift_jacobian(circuit: &Circuit, inputs: &[f64], params: &[f64]) -> Result<Vec<Vec<f64>>> {
    circuit.check_args(inputs, params)?;
    let base = circuit.bind_unchecked(inputs, params);
    let start = circuit.initial_state(inputs)?;
    let n = circuit.n_qubits();
    let mut jac = vec![vec![0.0; n]; circuit.n_params()];
    for (pos, src) in circuit.sources().iter().enumerate() {
        let AngleSource::Param(p) = *src else { continue };
        let eval = |shift: f64| {
            let mut s = start.clone();
            for (k, g) in base.iter().enumerate() {
                if k == pos {
                    s.apply_unchecked(&super::Gate { theta: g.theta + shift, ..*g });
                } else {
                    s.apply_unchecked(g);
                }
            }
            s.expect_all_z()
        };
        let plus = eval(FRAC_PI_2);
        let minus = eval(-FRAC_PI_2);
        for i in 0..n {
            jac[p][i] += 0.5 * (plus[i] - minus[i]);
        }
    }
    Ok(jac)
}

/// Gradients of `Σ_i w_i ⟨Z_i⟩` with respect to inputs and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VjpResult {
    pub outputs: Vec<f64>,
    pub grad_inputs: Vec<f64>,
    pub grad_params: Vec<f64>,
}

fn apply_pauli(s: &mut Statevector, kind: GateKind, q: usize) {
    let bit = 1usize << q;
    let amps = s.amplitudes_mut();
    let i_unit = Complex64::new(0.0, 1.0);
    for i in 0..amps.len() {
        if i & bit != 0 {
            continue;
        }
        let (a0, a1) = (amps[i], amps[i | bit]);
        match kind {
            GateKind::Rx => {
                amps[i] = a1;
                amps[i | bit] = a0;
            }
            GateKind::Ry => {
                amps[i] = -i_unit * a1;
                amps[i | bit] = i_unit * a0;
            }
            GateKind::Rz => amps[i | bit] = -a1,
            GateKind::Cnot => unreachable!("CNOT has no generator"),
        }
    }
}

/// Adjoint-mode gradient of `Σ_i weights[i]·⟨Z_i⟩` in one forward and one backward sweep.
///
/// Input gradients cover angle inputs (through their scale factors) and, for
/// amplitude encoding, the raw vector before normalization.
pub fn vjp(circuit: &Circuit, inputs: &[f64], params: &[f64], weights: &[f64]) -> Result<VjpResult> {
    circuit.check_args(inputs, params)?;
    let n = circuit.n_qubits();
    if weights.len() != n {
        return Err(super::QsimError::DimensionMismatch { expected: n, got: weights.len() });
    }
    let gates = circuit.bind_unchecked(inputs, params);
    let mut psi = circuit.initial_state(inputs)?;
    for g in &gates {
        psi.apply_unchecked(g);
    }
    let outputs = psi.expect_all_z();

    // λ = O ψ with O = Σ w_i Z_i (diagonal)
    let mut lam = psi.clone();
    for (idx, a) in lam.amplitudes_mut().iter_mut().enumerate() {
        let d: f64 = (0..n).map(|q| if idx >> q & 1 == 0 { weights[q] } else { -weights[q] }).sum();
        *a *= d;
    }

    let mut grad_inputs = vec![0.0; inputs.len()];
    let mut grad_params = vec![0.0; circuit.n_params()];
    for (g, src) in gates.iter().zip(circuit.sources()).rev() {
        if !matches!(src, AngleSource::Fixed) {
            // d/dθ ⟨ψ|U†OU|ψ⟩ = Im⟨λ|P|ψ⟩ for U = exp(−iθP/2), evaluated after the gate
            let mut p_psi = psi.clone();
            apply_pauli(&mut p_psi, g.kind, g.target);
            let d = lam.inner(&p_psi).im;
            match *src {
                AngleSource::Param(p) => grad_params[p] += d,
                AngleSource::Input { index, scale } => grad_inputs[index] += scale * d,
                AngleSource::Fixed => unreachable!(),
            }
        }
        let inv = g.inverse();
        psi.apply_unchecked(&inv);
        lam.apply_unchecked(&inv);
    }

    if circuit.encoding() == Encoding::Amplitude {
        // ψ0 = x/‖x‖ is real: ∂f/∂ψ0 = 2 Re(λ0), then project through the normalization
        let norm = inputs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let amps0 = psi.amplitudes();
        let v: Vec<f64> = lam.amplitudes()[..inputs.len()].iter().map(|a| 2.0 * a.re).collect();
        let dot: f64 = v.iter().zip(amps0).map(|(vi, a)| vi * a.re).sum();
        for (k, gk) in grad_inputs.iter_mut().enumerate() {
            *gk = (v[k] - amps0[k].re * dot) / norm;
        }
    }
    Ok(VjpResult { outputs, grad_inputs, grad_params })
}

/// Same quantity as [`vjp`], with parameter and angle-input gradients taken by the
/// two-term shift rule. Amplitude inputs have no shift rule; their gradient
/// comes from the adjoint sweep.
pub fn shift_vjp(circuit: &Circuit, inputs: &[f64], params: &[f64], weights: &[f64]) -> Result<VjpResult> {
    circuit.check_args(inputs, params)?;
    let n = circuit.n_qubits();
    if weights.len() != n {
        return Err(super::QsimError::DimensionMismatch { expected: n, got: weights.len() });
    }
    let base = circuit.bind_unchecked(inputs, params);
    let start = circuit.initial_state(inputs)?;
    let weighted = |shift_at: Option<(usize, f64)>| -> f64 {
        let mut s = start.clone();
        for (k, g) in base.iter().enumerate() {
            match shift_at {
                Some((pos, d)) if pos == k => s.apply_unchecked(&super::Gate { theta: g.theta + d, ..*g }),
                _ => s.apply_unchecked(g),
            }
        }
        s.expect_all_z().iter().zip(weights).map(|(z, w)| z * w).sum()
    };
    let mut outputs_state = start.clone();
    for g in &base {
        outputs_state.apply_unchecked(g);
    }
    let outputs = outputs_state.expect_all_z();
    let mut grad_params = vec![0.0; circuit.n_params()];
    let mut grad_inputs = vec![0.0; inputs.len()];
    for (pos, src) in circuit.sources().iter().enumerate() {
        let d = match src {
            AngleSource::Fixed => continue,
            _ => 0.5 * (weighted(Some((pos, FRAC_PI_2))) - weighted(Some((pos, -FRAC_PI_2)))),
        };
        match *src {
            AngleSource::Param(p) => grad_params[p] += d,
            AngleSource::Input { index, scale } => grad_inputs[index] += scale * d,
            AngleSource::Fixed => {}
        }
    }
    if circuit.encoding() == Encoding::Amplitude {
        grad_inputs = vjp(circuit, inputs, params, weights)?.grad_inputs;
    }
    Ok(VjpResult { outputs, grad_inputs, grad_params })
}
