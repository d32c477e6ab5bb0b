use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Split quality measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// Binary Gini impurity on 0/1 targets.
    Gini,
    /// Squared error on real targets.
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Binary tree; `x[feature] <= threshold` goes left. Leaves hold the mean target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

struct Builder<'a, R> {
    x: &'a [Vec<f64>],
    t: &'a [f64],
    p: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

/// Total impurity `n·impurity` of a node from its target sums.
fn node_cost(c: Criterion, n: f64, sum: f64, sum_sq: f64) -> f64 {
    match c {
        Criterion::Gini => {
            let p = sum / n;
            n * 2.0 * p * (1.0 - p)
        }
        Criterion::Mse => sum_sq - sum * sum / n,
    }
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len() as f64;
        let sum: f64 = idx.iter().map(|&i| self.t[i]).sum();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: sum / n });
        let pure = idx.iter().all(|&i| self.t[i] == self.t[idx[0]]);
        if depth >= self.p.max_depth || idx.len() < self.p.min_samples_split || pure {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(idx) else { return id };
        let mut k = 0;
        for j in 0..idx.len() {
            if self.x[idx[j]][feature] <= threshold {
                idx.swap(j, k);
                k += 1;
            }
        }
        let (l, r) = idx.split_at_mut(k);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x[0].len();
        match self.p.max_features {
            Some(k) if k < d => {
                let mut f = sample(self.rng, d, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    /// Lowest-cost split; ties keep the lowest feature index, then the lowest threshold.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let c = self.p.criterion;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        let total: f64 = idx.iter().map(|&i| self.t[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.t[i] * self.t[i]).sum();
        let n = idx.len();
        for f in self.candidate_features() {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let (mut ls, mut lsq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let i = order[k];
                ls += self.t[i];
                lsq += self.t[i] * self.t[i];
                let (v, next) = (self.x[i][f], self.x[order[k + 1]][f]);
                if v == next {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = (n - k - 1) as f64;
                let cost = node_cost(c, nl, ls, lsq) + node_cost(c, nr, total - ls, total_sq - lsq);
                if best.is_none_or(|(b, _, _)| cost < b) {
                    let mut thr = 0.5 * (v + next);
                    if thr >= next {
                        thr = v;
                    }
                    best = Some((cost, f, thr));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl Tree {
    /// Grows a tree on `rows` (indices into `x`, repeats allowed) against `targets`.
    pub fn fit<R: Rng>(x: &[Vec<f64>], targets: &[f64], rows: &[usize], params: &TreeParams, rng: &mut R) -> Tree {
        let mut b = Builder { x, t: targets, p: *params, rng, nodes: Vec::new() };
        let mut idx = rows.to_vec();
        b.grow(&mut idx, 0);
        Tree { nodes: b.nodes }
    }

    pub fn predict_row(&self, r: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if r[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}
