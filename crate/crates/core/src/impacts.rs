//! Permutation impacts: how much a model's NMSE grows when one input column
//! is shuffled, averaged over several shuffles and max-normalized to [0, 1].

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::regression::{input_columns, quality, RegressionModel};
use crate::rng::{derive_seed, seeded};

pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactEntry {
    pub input: String,
    /// Normalized impact in [0, 1].
    pub impact: f64,
    /// Mean NMSE increase, floored at 0.
    pub raw_increase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactVector {
    pub target: String,
    /// One entry per model input, in the model's input order.
    pub entries: Vec<ImpactEntry>,
}

impl ImpactVector {
    /// Builds a vector from raw increases, normalizing by their maximum.
    pub fn from_raw(target: impl Into<String>, raw: Vec<(String, f64)>) -> Self {
        let values: Vec<f64> = raw.iter().map(|(_, r)| *r).collect();
        let norm = normalize(&values);
        Self {
            target: target.into(),
            entries: raw
                .into_iter()
                .zip(norm)
                .map(|((input, raw_increase), impact)| ImpactEntry {
                    input,
                    impact,
                    raw_increase,
                })
                .collect(),
        }
    }

    pub fn impact(&self, input: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.input == input).map(|e| e.impact)
    }
}

/// Divides by the largest value; all zeros if the largest is not positive.
pub fn normalize(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        raw.iter().map(|r| (r / max).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

/// Mean NMSE increase over `repeats` shuffles of `var`, floored at 0.
pub fn raw_impact(
    model: &RegressionModel,
    ds: &Dataset,
    var: &str,
    repeats: usize,
    seed: u64,
) -> Result<f64> {
    let Some(pos) = model.inputs().iter().position(|i| i == var) else {
        return Err(Error::InvalidArgument(format!(
            "`{var}` is not an input of the model for `{}`",
            model.target()
        )));
    };
    if repeats < 1 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let cols = Columns::new(model, ds)?;
    cols.raw_increase(model, pos, repeats, seed)
}

/// Input and target columns of a dataset with the unshuffled NMSE.
struct Columns<'a> {
    x: Vec<&'a [f64]>,
    y: &'a [f64],
    rows: usize,
    base: f64,
}

impl<'a> Columns<'a> {
    fn new(model: &RegressionModel, ds: &'a Dataset) -> Result<Self> {
        let rows = ds.row_count();
        if rows < 2 {
            return Err(Error::InvalidDataset("impacts need at least 2 rows".into()));
        }
        let y = ds.column(model.target())?;
        let x = input_columns(&model.spec, ds)?;
        let base = quality(&model.predict_columns(&x, rows), y, model.target())?.nmse;
        Ok(Self { x, y, rows, base })
    }

    fn raw_increase(&self, model: &RegressionModel, pos: usize, repeats: usize, seed: u64) -> Result<f64> {
        let mut total = 0.0;
        for r in 0..repeats {
            let mut shuffled = self.x[pos].to_vec();
            shuffled.shuffle(&mut seeded(derive_seed(seed, r as u64)));
            let mut xs = self.x.clone();
            xs[pos] = &shuffled;
            let nmse = quality(&model.predict_columns(&xs, self.rows), self.y, model.target())?.nmse;
            total += nmse - self.base;
        }
        Ok((total / repeats as f64).max(0.0))
    }
}

/// Impacts of every model input on `ds`. Input `i` is shuffled with the seed
/// `derive_seed(seed, i)`.
pub fn impact_vector(
    model: &RegressionModel,
    ds: &Dataset,
    repeats: usize,
    seed: u64,
) -> Result<ImpactVector> {
    if repeats < 1 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let cols = Columns::new(model, ds)?;
    let raw: Vec<(String, f64)> = model
        .inputs()
        .par_iter()
        .enumerate()
        .map(|(i, var)| {
            cols.raw_increase(model, i, repeats, derive_seed(seed, i as u64))
                .map(|r| (var.clone(), r))
        })
        .collect::<Result<_>>()?;
    Ok(ImpactVector::from_raw(model.target(), raw))
}

/// CSV with columns `target,input,impact,raw_increase`.
pub fn to_csv(vectors: &[ImpactVector]) -> String {
    let mut s = String::from("target,input,impact,raw_increase\n");
    for v in vectors {
        for e in &v.entries {
            writeln!(s, "{},{},{},{}", v.target, e.input, e.impact, e.raw_increase).unwrap();
        }
    }
    s
}
