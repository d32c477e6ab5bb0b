mod common;

use common::dense::{circuit_unitary, gate_matrix, matvec, z_expectations};
use num_complex::Complex64;
use proptest::prelude::*;
use qdefi_core::qsim::{
    amplitude_encode, angle_encode, fidelity_kernel, parameter_shift_grad, run_vqc, vjp, Circuit, Encoding,
    Gate, Statevector, Template,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn single_gates_match_dense_three_qubit_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..300 {
        let s = common::random_state(&mut rng, 3);
        let g = common::random_gates(&mut rng, 3, 1)[0];
        let got = s.applied(&g).unwrap();
        let want = matvec(&gate_matrix(&g, 3), s.amplitudes());
        assert!(max_diff(got.amplitudes(), &want) < 1e-12, "{g:?}");
    }
}

#[test]
fn gate_chains_match_matrix_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let len = rng.random_range(1..=50);
        let gates = common::random_gates(&mut rng, n, len);
        let s0 = common::random_state(&mut rng, n);
        let mut s = s0.clone();
        for g in &gates {
            s.apply(g).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
        let want = matvec(&circuit_unitary(&gates, n), s0.amplitudes());
        assert!(max_diff(s.amplitudes(), &want) < 1e-10);
    }
}

#[test]
fn qrwkv_template_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = Template::QRWKV_RX4.build().unwrap();
    for _ in 0..20 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p: Vec<f64> = (0..8).map(|_| rng.random_range(-3.0..3.0)).collect();
        let got = run_vqc(&x, &p, &Template::QRWKV_RX4).unwrap();
        let gates = c.bind(&x, &p).unwrap();
        let zero = Statevector::zero(4).unwrap();
        let want = z_expectations(&matvec(&circuit_unitary(&gates, 4), zero.amplitudes()), 4);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

fn fd_params(c: &Circuit, x: &[f64], p: &[f64], out: usize, h: f64) -> Vec<f64> {
    (0..p.len())
        .map(|j| {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[j] += h;
            b[j] -= h;
            (c.expectations(x, &a).unwrap()[out] - c.expectations(x, &b).unwrap()[out]) / (2.0 * h)
        })
        .collect()
}

fn fd_inputs(c: &Circuit, x: &[f64], p: &[f64], w: &[f64], h: f64) -> Vec<f64> {
    let f = |x: &[f64]| -> f64 { c.expectations(x, p).unwrap().iter().zip(w).map(|(a, b)| a * b).sum() };
    (0..x.len())
        .map(|k| {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] += h;
            b[k] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-3)
}

#[test]
fn shift_rule_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..60 {
        let n = rng.random_range(1..=4);
        let len = rng.random_range(2..25);
        let c = common::random_param_circuit(&mut rng, n, len, Encoding::Angle);
        let x: Vec<f64> = (0..c.n_inputs()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p: Vec<f64> = (0..c.n_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let out = rng.random_range(0..n);
        let shift = parameter_shift_grad(&c, &x, &p, out).unwrap();
        let fd = fd_params(&c, &x, &p, out, 1e-4);
        for (a, b) in shift.iter().zip(&fd) {
            assert!(rel(*a, *b) < 1e-5, "shift {a} fd {b}");
        }
    }
}

#[test]
fn adjoint_input_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for enc in [Encoding::Angle, Encoding::Amplitude] {
        for _ in 0..40 {
            let n = rng.random_range(1..=4);
            let len = rng.random_range(2..25);
            let c = common::random_param_circuit(&mut rng, n, len, enc);
            let d = match enc {
                Encoding::Angle => c.n_inputs(),
                Encoding::Amplitude => rng.random_range(1..=c.n_inputs()),
            };
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p: Vec<f64> = (0..c.n_params()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = vjp(&c, &x, &p, &w).unwrap();
            let fd = fd_inputs(&c, &x, &p, &w, 1e-5);
            for (a, b) in r.grad_inputs.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{enc:?}: adjoint {a} fd {b}");
            }
        }
    }
}

proptest! {
    #[test]
    fn norm_preserved(seed in any::<u64>(), n in 1usize..6, len in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = common::random_state(&mut rng, n);
        for g in common::random_gates(&mut rng, n, len) {
            s.apply(&g).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn basis_expectations_are_signs(n in 1usize..7, idx in 0usize..64) {
        let idx = idx % (1 << n);
        let s = Statevector::basis(n, idx).unwrap();
        for (q, z) in s.expect_all_z().iter().enumerate() {
            prop_assert_eq!(*z, if idx >> q & 1 == 0 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn kernel_symmetric_and_bounded(a in prop::collection::vec(-4.0f64..4.0, 3), b in prop::collection::vec(-4.0f64..4.0, 3)) {
        let kab = fidelity_kernel(&a, &b).unwrap();
        let kba = fidelity_kernel(&b, &a).unwrap();
        prop_assert!((kab - kba).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&kab));
    }

    #[test]
    fn angle_encoding_monotone(lo in -10.0f64..0.0, span in 0.1f64..10.0, u in -20.0f64..20.0, v in -20.0f64..20.0) {
        let b = [(lo, lo + span)];
        let (x, y) = if u <= v { (u, v) } else { (v, u) };
        let tx = angle_encode(&[x], &b).unwrap()[0];
        let ty = angle_encode(&[y], &b).unwrap()[0];
        prop_assert!(tx <= ty);
        prop_assert!((0.0..=std::f64::consts::TAU).contains(&tx));
    }

    #[test]
    fn amplitude_encoding_normalized(x in prop::collection::vec(-5.0f64..5.0, 1..16)) {
        prop_assume!(x.iter().any(|v| *v != 0.0));
        let s = amplitude_encode(&x, 4).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn cnot_is_self_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = common::random_state(&mut rng, 3);
    let g = Gate::cnot(2, 0);
    assert_eq!(s.applied(&g).unwrap().applied(&g).unwrap(), s);
}
