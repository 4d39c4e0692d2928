//! Random forest regression.
//!
//! Each tree is a CART regression tree grown on a random subsample (drawn
//! without replacement) of `r * rows` training rows. At every split a fresh
//! subset of `ceil(m * inputs)` features is drawn and the split minimizing
//! the summed squared error of the two children is taken.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomForestParams {
    pub trees: usize,
    /// Fraction of training rows given to each tree.
    pub r: f64,
    /// Fraction of inputs considered at each split.
    pub m: f64,
    pub min_leaf: usize,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            r: 0.5,
            m: 0.2,
            min_leaf: 1,
        }
    }
}

impl RandomForestParams {
    fn validate(&self) -> Result<()> {
        if self.trees < 1 {
            return Err(Error::InvalidArgument("forest needs at least one tree".into()));
        }
        if !(self.r > 0.0 && self.r <= 1.0) || !(self.m > 0.0 && self.m <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "forest ratios must be in (0, 1], got r={} m={}",
                self.r, self.m
            )));
        }
        if self.min_leaf < 1 {
            return Err(Error::InvalidArgument("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tree node. Split nodes send rows with `x[feature] <= value` to `left`
/// and the rest to `left + 1`. A leaf points `left` at itself and carries
/// the prediction in `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: u32,
    pub left: u32,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

const BLOCK: usize = 8;

impl Tree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.nodes[i].left as usize == i
    }

    /// Prediction for one row given as a contiguous feature slice.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        while !self.is_leaf(i) {
            let n = &self.nodes[i];
            i = n.left as usize + usize::from(row[n.feature as usize] > n.value);
        }
        self.nodes[i].value
    }

    /// Adds predictions for a block of rows of a row-major matrix with `p`
    /// columns. Rows advance in lockstep, which keeps several lookups in
    /// flight at once.
    fn accumulate_block(&self, matrix: &[f64], p: usize, out: &mut [f64]) {
        let mut idx = [0u32; BLOCK];
        loop {
            let mut moved = false;
            for (k, i) in idx.iter_mut().enumerate().take(out.len()) {
                let n = &self.nodes[*i as usize];
                let right = matrix[k * p + n.feature as usize] > n.value && n.left != *i;
                let next = n.left + u32::from(right);
                moved |= next != *i;
                *i = next;
            }
            if !moved {
                break;
            }
        }
        for (o, i) in out.iter_mut().zip(idx) {
            *o += self.nodes[i as usize].value;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn predict(&self, x: &[&[f64]], rows: usize) -> Vec<f64> {
        let p = x.len();
        let mut matrix = vec![0.0; rows * p];
        for (j, col) in x.iter().enumerate() {
            for r in 0..rows {
                matrix[r * p + j] = col[r];
            }
        }
        let mut out = vec![0.0; rows];
        for t in &self.trees {
            for (block, o) in matrix.chunks(BLOCK * p).zip(out.chunks_mut(BLOCK)) {
                t.accumulate_block(block, p, o);
            }
        }
        let k = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
        out
    }
}

pub fn fit(x: &[&[f64]], y: &[f64], params: &RandomForestParams, seed: u64) -> Result<Forest> {
    params.validate()?;
    let n = y.len();
    let sub = ((params.r * n as f64).round() as usize).clamp(1, n);
    let per_split = ((params.m * x.len() as f64).ceil() as usize).clamp(1, x.len());
    let trees = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(derive_seed(seed, t as u64));
            let rows: Vec<usize> = if sub == n {
                (0..n).collect()
            } else {
                sample(&mut rng, n, sub).into_vec()
            };
            let mut builder = Builder {
                x,
                y,
                per_split,
                min_leaf: params.min_leaf,
                rng,
                nodes: vec![leaf(0, 0.0)],
            };
            builder.grow(rows, 0);
            Tree {
                nodes: builder.nodes,
            }
        })
        .collect();
    Ok(Forest { trees })
}

fn leaf(index: usize, value: f64) -> Node {
    Node {
        feature: 0,
        left: index as u32,
        value,
    }
}

struct Builder<'a> {
    x: &'a [&'a [f64]],
    y: &'a [f64],
    per_split: usize,
    min_leaf: usize,
    rng: Rng,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, slot: usize) {
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&r| self.y[r]).sum();
        self.nodes[slot] = leaf(slot, sum / n);
        let pure = rows.iter().all(|&r| self.y[r] == self.y[rows[0]]);
        if pure || rows.len() < 2 * self.min_leaf {
            return;
        }
        let Some(split) = self.best_split(&rows, sum) else {
            return;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x[split.feature][i] <= split.threshold);
        let left = self.nodes.len();
        self.nodes.push(leaf(left, 0.0));
        self.nodes.push(leaf(left + 1, 0.0));
        self.nodes[slot] = Node {
            feature: split.feature as u32,
            left: left as u32,
            value: split.threshold,
        };
        self.grow(l, left);
        self.grow(r, left + 1);
    }

    fn best_split(&mut self, rows: &[usize], total: f64) -> Option<Split> {
        let p = self.x.len();
        let features = sample(&mut self.rng, p, self.per_split);
        let n = rows.len();
        // SSE = sum(y^2) - sum_l^2/n_l - sum_r^2/n_r, so maximize the last two terms
        let parent_score = total * total / n as f64;
        let mut best: Option<Split> = None;
        let mut order = rows.to_vec();
        for f in features.iter() {
            let col = self.x[f];
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += self.y[order[k - 1]];
                if k < self.min_leaf || n - k < self.min_leaf {
                    continue;
                }
                let (lo, hi) = (col[order[k - 1]], col[order[k]]);
                if lo >= hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let score =
                    left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
                if score <= parent_score * (1.0 + 1e-12) + 1e-12 {
                    continue;
                }
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        best
    }
}
