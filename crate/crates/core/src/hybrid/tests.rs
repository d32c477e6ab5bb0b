use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::train::{gradient_audit, mean_loss};
use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_window(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut r = rng(seed);
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.5..1.5)).collect())
}

fn mini_qasa(mode: QasaMode, causal: bool) -> Qasa {
    let base = match mode {
        QasaMode::Hybrid => QasaConfig::hybrid(),
        QasaMode::Sequence => QasaConfig::sequence(),
    };
    let cfg = QasaConfig { n_features: 3, embed_dim: 4, lstm_units: 5, ffn_hidden: 6, causal_mask: causal, ..base };
    Qasa::new(cfg, &mut rng(3)).unwrap()
}

fn mini_qrwkv(window: usize) -> Qrwkv {
    let cfg = QrwkvConfig { n_features: 3, window, layers: 2, hidden: 6, n_qubits: 3, mlp_hidden: 5 };
    Qrwkv::new(cfg, &mut rng(4)).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn single_token_attention_returns_value() {
    let m = Qasa::new(QasaConfig::hybrid(), &mut rng(1)).unwrap();
    let p = &m.store().tensors;
    let mut tape = Tape::new(p);
    let tr = m.trace(&mut tape, &random_window(1, 12, 9), None).unwrap();
    assert_eq!(tape.value(tr.weights).data, vec![1.0]);
    assert_eq!(tape.value(tr.context).data, tape.value(tr.v).data);
}

#[test]
fn identical_tokens_attend_uniformly() {
    for causal in [false, true] {
        let m = mini_qasa(QasaMode::Sequence, causal);
        let mut tape = Tape::new(&m.store().tensors);
        let tok = Tensor::from_vec(10, 4, [0.3, -0.1, 0.7, 0.2].repeat(10));
        let tok = tape.constant(tok);
        let a = m.attend(&mut tape, tok).unwrap();
        let w = tape.value(a.weights);
        if causal {
            assert!(w.row(9).iter().all(|&v| (v - 0.1).abs() < 1e-12));
        } else {
            assert!(w.data.iter().all(|&v| (v - 0.1).abs() < 1e-12));
        }
        for i in 0..10 {
            assert!((w.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn encoded_tokens_have_unit_norm() {
    let m = mini_qasa(QasaMode::Sequence, true);
    let mut tape = Tape::new(&m.store().tensors);
    let tr = m.trace(&mut tape, &random_window(10, 3, 2), None).unwrap();
    let tokens = tape.value(tr.tokens);
    for i in 0..10 {
        let s = m.circuit().initial_state(tokens.row(i)).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn decay_free_memory_is_running_sum() {
    let mut m = mini_qrwkv(3);
    for l in 0..2 {
        let i = m.store().index_of(&format!("layer{l}.log_tau")).unwrap();
        m.store_mut().tensors[i].data.fill(50.0);
    }
    let mut tape = Tape::new(&m.store().tensors);
    let tr = m.trace(&mut tape, &random_window(3, 3, 5)).unwrap();
    for layer in &tr.layers {
        assert!(tape.value(layer.decay).data.iter().all(|&l| l == 1.0));
        let v = tape.value(layer.value);
        let mut sum = vec![0.0; 6];
        for t in 0..3 {
            sum.iter_mut().zip(v.row(t)).for_each(|(s, x)| *s += x);
            assert!(close(&tape.value(layer.memory[t]).data, &sum, 1e-12));
        }
    }
}

#[test]
fn decay_starts_near_inverse_e() {
    let m = mini_qrwkv(2);
    let mut tape = Tape::new(&m.store().tensors);
    let tr = m.trace(&mut tape, &random_window(2, 3, 5)).unwrap();
    let l = tape.value(tr.layers[0].decay).data[0];
    assert!((l - (-1f64).exp()).abs() < 1e-15);
    for g in &tr.layers[0].gate {
        assert!(tape.value(*g).data.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn single_step_attention_is_value() {
    let m = mini_qrwkv(1);
    let mut tape = Tape::new(&m.store().tensors);
    let tr = m.trace(&mut tape, &random_window(1, 3, 6)).unwrap();
    for layer in &tr.layers {
        assert_eq!(tape.value(layer.attn).data, tape.value(layer.attn_value).data);
    }
}

#[test]
fn qrwkv_is_causal() {
    let m = mini_qrwkv(5);
    let x = random_window(5, 3, 7);
    let mut y = x.clone();
    for c in 0..3 {
        y.data[4 * 3 + c] += 0.9;
    }
    let p = &m.store().tensors;
    let (mut ta, mut tb) = (Tape::new(p), Tape::new(p));
    let (a, b) = (m.trace(&mut ta, &x).unwrap(), m.trace(&mut tb, &y).unwrap());
    for (la, lb) in a.layers.iter().zip(&b.layers) {
        for t in 0..4 {
            assert_eq!(ta.value(la.memory[t]).data, tb.value(lb.memory[t]).data);
            assert_eq!(ta.value(la.gate[t]).data, tb.value(lb.gate[t]).data);
            assert_eq!(ta.value(la.output).row(t), tb.value(lb.output).row(t));
            assert_eq!(ta.value(la.attn).row(t), tb.value(lb.attn).row(t));
        }
        assert_ne!(ta.value(la.output).row(4), tb.value(lb.output).row(4));
    }
}

#[test]
fn causal_qasa_ignores_future_tokens() {
    let m = mini_qasa(QasaMode::Sequence, true);
    let x = random_window(10, 3, 8);
    let mut y = x.clone();
    y.data[27] += 1.0;
    let p = &m.store().tensors;
    let (mut ta, mut tb) = (Tape::new(p), Tape::new(p));
    let (a, b) = (m.trace(&mut ta, &x, None).unwrap(), m.trace(&mut tb, &y, None).unwrap());
    for t in 0..9 {
        assert_eq!(ta.value(a.context).row(t), tb.value(b.context).row(t));
    }
}

#[test]
fn transformer_single_token_context_is_value() {
    let cfg = TransformerConfig { n_features: 5, window: 1, layers: 1, heads: 1, model_dim: 8, ffn_dim: 8 };
    let m = Transformer::new(cfg, &mut rng(2)).unwrap();
    let mut tape = Tape::new(&m.store().tensors);
    let tr = m.trace(&mut tape, &random_window(1, 5, 1)).unwrap();
    assert_eq!(tape.value(tr.first_context).data, tape.value(tr.first_values[0]).data);
    assert_eq!(tape.value(tr.weights[0][0]).data, vec![1.0]);
}

#[test]
fn transformer_rejects_indivisible_heads() {
    let cfg = TransformerConfig { model_dim: 30, heads: 4, ..Default::default() };
    assert!(matches!(Transformer::new(cfg, &mut rng(0)), Err(HybridError::InvalidConfig(_))));
}

#[test]
fn inference_is_bit_exact() {
    let m = mini_qasa(QasaMode::Sequence, true);
    let x = random_window(10, 3, 4);
    assert_eq!(m.predict_one(&x).unwrap().to_bits(), m.predict_one(&x).unwrap().to_bits());
}

fn balanced(n: usize, w: usize, d: usize, seed: u64) -> Windows {
    let mut out = Windows::default();
    for i in 0..n {
        out.x.push(random_window(w, d, seed + i as u64));
        out.y.push((i % 2) as u8);
        out.rows.push(i);
    }
    out
}

#[test]
fn untrained_loss_is_near_ln2() {
    let cfg = TrainConfig { epochs: 0, audit: false, ..Default::default() };
    let mut nets: Vec<(Box<dyn Network>, usize, usize)> = vec![
        (Box::new(Qasa::new(QasaConfig { n_features: 12, ..QasaConfig::hybrid() }, &mut rng(1)).unwrap()), 1, 12),
        (Box::new(Qasa::new(QasaConfig::sequence(), &mut rng(1)).unwrap()), 10, 12),
        (Box::new(Qrwkv::new(QrwkvConfig { layers: 1, ..Default::default() }, &mut rng(1)).unwrap()), 10, 12),
        (Box::new(Transformer::new(TransformerConfig::default(), &mut rng(1)).unwrap()), 10, 122),
    ];
    for (net, w, d) in &mut nets {
        let data = balanced(20, *w, *d, 100);
        let h = train(net.as_mut(), &data, None, &cfg, 1).unwrap();
        assert_eq!(h.train_loss.len(), 1);
        assert!((h.train_loss[0] - std::f64::consts::LN_2).abs() < 0.1, "{}", h.train_loss[0]);
    }
}

#[test]
fn miniature_full_gradient_matches_differences() {
    let m = mini_qasa(QasaMode::Sequence, true);
    assert_eq!(m.config.n_qubits(), 2);
    let data = balanced(4, 10, 3, 40);
    let idx: Vec<usize> = (0..4).collect();
    let rep = gradient_audit(&m, &data, &idx, None, 1e-4, &mut rng(0)).unwrap();
    assert_eq!(rep.checked, m.store().n_scalars());
}

#[test]
fn training_reduces_loss() {
    let mut m = mini_qrwkv(4);
    let mut data = balanced(24, 4, 3, 10);
    for (x, &y) in data.x.iter_mut().zip(&data.y) {
        x.data[9] = if y == 1 { 1.0 } else { -1.0 };
    }
    let cfg = TrainConfig { epochs: 30, batch_size: 8, lr_classical: 1e-2, ..Default::default() };
    let h = train(&mut m, &data, None, &cfg, 5).unwrap();
    assert!(h.audit.is_some());
    let idx: Vec<usize> = (0..24).collect();
    let end = mean_loss(&m, &m.store().tensors, &data, &idx).unwrap();
    assert!(end < h.train_loss[0] - 0.1, "{} -> {end}", h.train_loss[0]);
    assert_eq!(end, h.train_loss[h.best_epoch]);
}
