use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::autodiff::{Tape, Tensor};
use super::{HybridError, Network, Result};
use crate::models::{Adam, Standardizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    /// Smallest loss decrease that counts as an improvement.
    pub min_delta: f64,
    pub lr_classical: f64,
    pub lr_quantum: f64,
    pub clip_norm: f64,
    /// Finite-difference audit on the first batch.
    pub audit: bool,
    /// Coordinates checked per parameter class (classical, quantum).
    pub audit_coords: usize,
    pub audit_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            patience: 15,
            min_delta: 1e-4,
            lr_classical: 1e-3,
            lr_quantum: 1e-2,
            clip_norm: 5.0,
            audit: true,
            audit_coords: 8,
            audit_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss with dropout off; entry 0 is before the first update.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch whose parameters were kept (0 = initial).
    pub best_epoch: usize,
    pub audit: Option<AuditReport>,
}

/// Standardized input windows with their targets.
#[derive(Debug, Clone, Default)]
pub struct Windows {
    pub x: Vec<Tensor>,
    pub y: Vec<u8>,
    /// Matrix row each window ends at.
    pub rows: Vec<usize>,
}

/// Rows `t−w+1..=t`, standardized; `None` when the window starts before row 0 or
/// touches a non-finite value.
pub fn window_at(rows: &[Vec<f64>], t: usize, w: usize, scaler: &Standardizer) -> Option<Tensor> {
    if t + 1 < w {
        return None;
    }
    let block: Vec<Vec<f64>> = rows[t + 1 - w..=t].iter().map(|r| scaler.transform_row(r)).collect();
    block.iter().flatten().all(|v| v.is_finite()).then(|| Tensor::from_rows(&block))
}

impl Windows {
    pub fn build(rows: &[Vec<f64>], labels: &[u8], range: Range<usize>, w: usize, scaler: &Standardizer) -> Self {
        let mut out = Windows::default();
        for t in range {
            if let Some(x) = window_at(rows, t, w, scaler) {
                out.x.push(x);
                out.y.push(labels[t]);
                out.rows.push(t);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Loss and flat gradient for one window.
fn sample_grad<N: Network + ?Sized>(
    net: &N,
    params: &[Tensor],
    x: &Tensor,
    y: u8,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new(params);
    let z = net.logit(&mut tape, x, rng)?;
    if !tape.value(z).data[0].is_finite() {
        return Err(HybridError::NonFiniteActivation);
    }
    let loss = tape.bce_logit(z, y as f64);
    let l = tape.value(loss).data[0];
    let g = tape.backward(loss);
    Ok((l, g.into_iter().flat_map(|t| t.data).collect()))
}

fn sample_loss<N: Network + ?Sized>(net: &N, params: &[Tensor], x: &Tensor, y: u8) -> Result<f64> {
    let mut tape = Tape::new(params);
    let z = net.logit(&mut tape, x, None)?;
    if !tape.value(z).data[0].is_finite() {
        return Err(HybridError::NonFiniteActivation);
    }
    let loss = tape.bce_logit(z, y as f64);
    Ok(tape.value(loss).data[0])
}

/// Mean cross-entropy over `data`, dropout off.
pub fn mean_loss<N: Network + ?Sized>(net: &N, params: &[Tensor], data: &Windows, idx: &[usize]) -> Result<f64> {
    let losses: Vec<f64> = idx.par_iter().map(|&i| sample_loss(net, params, &data.x[i], data.y[i])).collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / idx.len() as f64)
}

/// Mean loss and gradient over the windows `idx`. With `dropout_seed`, sample `k`
/// draws its dropout mask from stream `k` of that seed.
pub fn batch_grad<N: Network + ?Sized>(
    net: &N,
    params: &[Tensor],
    data: &Windows,
    idx: &[usize],
    dropout_seed: Option<(u64, u64)>,
) -> Result<(f64, Vec<f64>)> {
    let parts: Vec<(f64, Vec<f64>)> = idx
        .par_iter()
        .enumerate()
        .map(|(k, &i)| {
            let mut rng = dropout_seed.map(|(seed, stream)| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(stream.wrapping_add(k as u64));
                r
            });
            sample_grad(net, params, &data.x[i], data.y[i], rng.as_mut())
        })
        .collect::<Result<_>>()?;
    let n = parts.len() as f64;
    let mut grad = vec![0.0; parts.first().map_or(0, |p| p.1.len())];
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    grad.iter_mut().for_each(|v| *v /= n);
    Ok((loss / n, grad))
}

/// `|a − b| / max(|a|, |b|, 1e-6)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compares the analytic gradient on `idx` with central differences (step 1e-5) at
/// up to `per_class` classical and `per_class` quantum coordinates (all when `None`).
pub fn gradient_audit<N: Network + ?Sized>(
    net: &N,
    data: &Windows,
    idx: &[usize],
    per_class: Option<usize>,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<AuditReport> {
    let store = net.store();
    let (_, grad) = batch_grad(net, &store.tensors, data, idx, None)?;
    let quantum = store.flat_quantum();
    let mut coords = Vec::new();
    for class in [false, true] {
        let mut c: Vec<usize> = (0..quantum.len()).filter(|&i| quantum[i] == class).collect();
        if let Some(k) = per_class {
            c.shuffle(rng);
            c.truncate(k);
        }
        coords.extend(c);
    }
    coords.sort_unstable();
    let flat = store.flat();
    let h = 1e-5;
    let mut shifted = store.clone();
    let mut max_rel: f64 = 0.0;
    for &c in &coords {
        let mut eval = |d: f64| -> Result<f64> {
            let mut v = flat.clone();
            v[c] += d;
            shifted.set_flat(&v);
            mean_loss(net, &shifted.tensors, data, idx)
        };
        let fd = (eval(h)? - eval(-h)?) / (2.0 * h);
        let e = rel_err(grad[c], fd);
        if e > tol {
            return Err(HybridError::GradientCheckFailure { param: coordinate_name(store, c), rel_err: e });
        }
        max_rel = max_rel.max(e);
    }
    Ok(AuditReport { checked: coords.len(), max_rel_err: max_rel })
}

fn coordinate_name(store: &super::ParamStore, mut c: usize) -> String {
    for (name, t) in store.names.iter().zip(&store.tensors) {
        if c < t.len() {
            return format!("{name}[{c}]");
        }
        c -= t.len();
    }
    format!("#{c}")
}

/// Mini-batch Adam with separate classical and quantum learning rates, global-norm
/// clipping and early stopping on the validation loss (training loss without
/// validation windows). The best parameters are restored at the end.
pub fn train<N: Network + ?Sized>(
    net: &mut N,
    data: &Windows,
    val: Option<&Windows>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainHistory> {
    if data.is_empty() {
        return Err(HybridError::NoTrainingWindows);
    }
    if data.y.iter().all(|&y| y == data.y[0]) {
        return Err(HybridError::SingleClassTraining);
    }
    if cfg.batch_size == 0 {
        return Err(HybridError::InvalidConfig("batch_size must be positive".into()));
    }
    let val = val.filter(|v| !v.is_empty());
    let all: Vec<usize> = (0..data.len()).collect();
    let val_idx: Vec<usize> = val.map_or(Vec::new(), |v| (0..v.len()).collect());
    let evaluate = |net: &N| -> Result<(f64, f64)> {
        let tl = mean_loss(net, &net.store().tensors, data, &all)?;
        let vl = match val {
            Some(v) => mean_loss(net, &net.store().tensors, v, &val_idx)?,
            None => f64::NAN,
        };
        Ok((tl, vl))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7261_696e);
    let lrs: Vec<f64> = net
        .store()
        .flat_quantum()
        .iter()
        .map(|&q| if q { cfg.lr_quantum } else { cfg.lr_classical })
        .collect();
    let mut adam = Adam::new(lrs.len(), cfg.lr_classical);
    let mut hist = TrainHistory::default();
    let (tl, vl) = evaluate(net)?;
    hist.train_loss.push(tl);
    hist.val_loss.push(vl);
    let score = |tl: f64, vl: f64| if val.is_some() { vl } else { tl };
    let mut best = (score(tl, vl), net.store().flat());
    let mut order = all.clone();
    let mut since_best = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            if epoch == 1 && b == 0 && cfg.audit {
                hist.audit = Some(gradient_audit(&*net, data, batch, Some(cfg.audit_coords), cfg.audit_tol, &mut rng)?);
            }
            let stream = ((epoch as u64) << 32) | ((b * cfg.batch_size) as u64);
            let (_, mut g) = batch_grad(&*net, &net.store().tensors, data, batch, Some((seed, stream)))?;
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > cfg.clip_norm {
                let s = cfg.clip_norm / norm;
                g.iter_mut().for_each(|v| *v *= s);
            }
            let mut flat = net.store().flat();
            adam.step_with(&mut flat, &g, |i| lrs[i]);
            net.store_mut().set_flat(&flat);
        }
        let (tl, vl) = evaluate(net)?;
        hist.train_loss.push(tl);
        hist.val_loss.push(vl);
        if score(tl, vl) < best.0 - cfg.min_delta {
            best = (score(tl, vl), net.store().flat());
            hist.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    net.store_mut().set_flat(&best.1);
    Ok(hist)
}
