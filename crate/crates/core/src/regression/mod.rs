//! Per-target regression models.
//!
//! Three backends share one interface: ordinary least squares, a random
//! forest of CART regression trees, and symbolic regression evolved by an
//! offspring selection genetic algorithm (OSGA). Fitted models serialize to a
//! versioned JSON document.

pub mod forest;
pub mod linear;
pub mod symbolic;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::stats;

pub use forest::{Forest, RandomForestParams};
pub use linear::LinearModel;
pub use symbolic::{BinaryOp, Expr, OsgaParams, UnaryOp};

/// Version tag of the serialized model document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Linear,
    RandomForest(RandomForestParams),
    Symbolic(OsgaParams),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Linear => "linear",
            Backend::RandomForest(_) => "random_forest",
            Backend::Symbolic(_) => "symbolic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub target: String,
    pub inputs: Vec<String>,
    pub backend: Backend,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(target: impl Into<String>, inputs: Vec<String>, backend: Backend, seed: u64) -> Self {
        Self {
            target: target.into(),
            inputs,
            backend,
            seed,
        }
    }

    /// Spec for `target` using every other visible column of `ds` as input.
    pub fn all_visible(ds: &Dataset, target: &str, backend: Backend, seed: u64) -> Self {
        let inputs = ds
            .visible_names()
            .into_iter()
            .filter(|n| *n != target)
            .map(str::to_string)
            .collect();
        Self::new(target, inputs, backend, seed)
    }

    fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "model for `{}` has no inputs",
                self.target
            )));
        }
        if self.inputs.iter().any(|i| *i == self.target) {
            return Err(Error::InvalidArgument(format!(
                "target `{}` listed among its own inputs",
                self.target
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in std::iter::once(&self.target).chain(&self.inputs) {
            if !ds.has_column(v) {
                return Err(Error::UnknownVariable(v.clone()));
            }
            if ds.is_hidden(v) {
                return Err(Error::InvalidArgument(format!(
                    "hidden variable `{v}` cannot be used by a model"
                )));
            }
            if !seen.insert(v.as_str()) {
                return Err(Error::InvalidArgument(format!("variable `{v}` listed twice")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    Linear(LinearModel),
    RandomForest(Forest),
    Symbolic(Expr),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub spec: ModelSpec,
    pub fitted: Fitted,
}

/// Estimation quality on one partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// Squared Pearson correlation between predictions and targets.
    pub r2: f64,
    /// Mean squared error divided by the target variance.
    pub nmse: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    model: RegressionModel,
}

/// Input columns in spec order.
pub(crate) fn input_columns<'a>(spec: &ModelSpec, ds: &'a Dataset) -> Result<Vec<&'a [f64]>> {
    spec.inputs.iter().map(|n| ds.column(n)).collect()
}

pub fn fit(spec: &ModelSpec, train: &Dataset) -> Result<RegressionModel> {
    spec.validate(train)?;
    if train.row_count() < 2 * spec.inputs.len() {
        return Err(Error::InvalidDataset(format!(
            "{} rows are too few to fit {} inputs",
            train.row_count(),
            spec.inputs.len()
        )));
    }
    let y = train.column(&spec.target)?;
    if stats::variance(y) <= 0.0 {
        return Err(Error::ZeroVariance(spec.target.clone()));
    }
    let x = input_columns(spec, train)?;
    let fitted = match &spec.backend {
        Backend::Linear => Fitted::Linear(linear::fit(&x, y, &spec.target)?),
        Backend::RandomForest(p) => Fitted::RandomForest(forest::fit(&x, y, p, spec.seed)?),
        Backend::Symbolic(p) => Fitted::Symbolic(symbolic::fit(&x, y, p, spec.seed)?.best),
    };
    Ok(RegressionModel {
        spec: spec.clone(),
        fitted,
    })
}

impl RegressionModel {
    pub fn target(&self) -> &str {
        &self.spec.target
    }

    pub fn inputs(&self) -> &[String] {
        &self.spec.inputs
    }

    /// One prediction per row of `ds`.
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let x = input_columns(&self.spec, ds)?;
        Ok(self.predict_columns(&x, ds.row_count()))
    }

    pub(crate) fn predict_columns(&self, x: &[&[f64]], rows: usize) -> Vec<f64> {
        match &self.fitted {
            Fitted::Linear(m) => m.predict(x, rows),
            Fitted::RandomForest(f) => f.predict(x, rows),
            Fitted::Symbolic(e) => e.predict(x, rows),
        }
    }

    pub fn evaluate(&self, ds: &Dataset) -> Result<QualityReport> {
        let y = ds.column(&self.spec.target)?;
        let pred = self.predict(ds)?;
        quality(&pred, y, &self.spec.target)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&ModelDocument {
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported model format version {}",
                doc.version
            )));
        }
        Ok(doc.model)
    }
}

/// R² and NMSE of `pred` against `y`.
pub fn quality(pred: &[f64], y: &[f64], target: &str) -> Result<QualityReport> {
    let var = stats::variance(y);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance(target.to_string()));
    }
    let nmse = stats::mse(pred, y) / var;
    let r2 = stats::pearson(pred, y).map_or(0.0, |r| r * r);
    Ok(QualityReport { r2, nmse })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_data() -> Dataset {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let z: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        Dataset::new(vec![("x", x), ("z", z), ("y", y)]).unwrap()
    }

    #[test]
    fn quality_identities() {
        let y = [1.0, 2.0, 4.0, 8.0];
        let q = quality(&y, &y, "y").unwrap();
        assert!((q.r2 - 1.0).abs() < 1e-15);
        assert_eq!(q.nmse, 0.0);
        let mean = stats::mean(&y);
        let q = quality(&[mean; 4], &y, "y").unwrap();
        assert!((q.nmse - 1.0).abs() < 1e-15);
        assert_eq!(q.r2, 0.0);
        assert!(matches!(
            quality(&[1.0, 2.0], &[3.0, 3.0], "y"),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn spec_validation() {
        let ds = line_data().with_hidden(&["z"]).unwrap();
        let bad = [
            ModelSpec::new("y", vec![], Backend::Linear, 0),
            ModelSpec::new("y", vec!["y".into()], Backend::Linear, 0),
            ModelSpec::new("y", vec!["q".into()], Backend::Linear, 0),
            ModelSpec::new("y", vec!["z".into()], Backend::Linear, 0),
            ModelSpec::new("y", vec!["x".into(), "x".into()], Backend::Linear, 0),
        ];
        for spec in &bad {
            assert!(fit(spec, &ds).is_err(), "{spec:?}");
        }
        let spec = ModelSpec::all_visible(&ds, "y", Backend::Linear, 0);
        assert_eq!(spec.inputs, vec!["x".to_string()]);
    }

    #[test]
    fn rejects_constant_target_and_short_data() {
        let ds = Dataset::new(vec![("x", vec![1.0, 2.0, 3.0]), ("y", vec![1.0; 3])]).unwrap();
        let spec = ModelSpec::new("y", vec!["x".into()], Backend::Linear, 0);
        assert!(matches!(fit(&spec, &ds), Err(Error::ZeroVariance(_))));
        let ds = Dataset::new(vec![("x", vec![1.0]), ("y", vec![1.0])]).unwrap();
        assert!(matches!(fit(&spec, &ds), Err(Error::InvalidDataset(_))));
    }

    #[test]
    fn predict_examples() {
        let ds = line_data();
        let spec = ModelSpec::new("y", vec!["x".into()], Backend::Linear, 0);
        let m = fit(&spec, &ds).unwrap();
        let probe = Dataset::new(vec![("x", vec![0.0, 1.0, 2.0])]).unwrap();
        let p = m.predict(&probe).unwrap();
        for (a, b) in p.iter().zip([1.0, 3.0, 5.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        let empty = Dataset::new(vec![("x", Vec::<f64>::new())]).unwrap();
        assert!(m.predict(&empty).unwrap().is_empty());
        let missing = Dataset::new(vec![("w", vec![1.0])]).unwrap();
        assert!(matches!(m.predict(&missing), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ds = line_data();
        let backends = [
            Backend::Linear,
            Backend::RandomForest(RandomForestParams {
                trees: 3,
                ..Default::default()
            }),
            Backend::Symbolic(OsgaParams {
                population: 10,
                max_generations: 3,
                ..Default::default()
            }),
        ];
        for b in backends {
            let m = fit(&ModelSpec::all_visible(&ds, "y", b, 9), &ds).unwrap();
            let back = RegressionModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.predict(&ds).unwrap(), m.predict(&ds).unwrap());
        }
    }

    #[test]
    fn rejects_unknown_format_version() {
        let ds = line_data();
        let m = fit(&ModelSpec::all_visible(&ds, "y", Backend::Linear, 0), &ds).unwrap();
        let text = m.to_json().unwrap().replacen("\"version\": 1", "\"version\": 99", 1);
        assert!(RegressionModel::from_json(&text).is_err());
    }
}
