//! Sliding-window drift detection against a frozen reference network.
//!
//! Models are fitted once on stable data and never refitted here. For each
//! window of the evaluation stream the impacts of every admitted model are
//! recomputed on the window, a network is rebuilt with the same settings as
//! the reference, and the two networks are compared.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{window_starts, Dataset, WindowSpec};
use crate::error::{Error, Result};
use crate::impacts::{impact_vector, ImpactVector, DEFAULT_REPEATS};
use crate::network::{self, Network, NetworkConfig};
use crate::regression::{QualityReport, RegressionModel};
use crate::rng::{derive_seed, name_stream};
use crate::similarity::{network_similarity, Measure};
use crate::stats;

/// Smallest window on which models are evaluated.
pub const MIN_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    pub window: WindowSpec,
    /// Shuffles per input when computing impacts.
    pub repeats: usize,
    pub net_cfg: NetworkConfig,
    pub measure: Measure,
    /// Windows scoring below this are flagged as drifting.
    pub drift_threshold: f64,
    pub seed: u64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec { size: 150, step: 10 },
            repeats: DEFAULT_REPEATS,
            net_cfg: NetworkConfig::default(),
            measure: Measure::Spearman,
            drift_threshold: 0.5,
            seed: 42,
        }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.window.size < MIN_WINDOW {
            return Err(Error::InvalidArgument(format!(
                "window of {} rows is too small to evaluate models (minimum {MIN_WINDOW})",
                self.window.size
            )));
        }
        if self.repeats < 1 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.drift_threshold) {
            return Err(Error::InvalidArgument(format!(
                "drift_threshold {} outside [0, 1]",
                self.drift_threshold
            )));
        }
        self.net_cfg.validate()
    }
}

/// Test-partition qualities keyed by target.
pub fn qualities_of<'a>(
    reports: impl IntoIterator<Item = (&'a RegressionModel, QualityReport)>,
) -> BTreeMap<String, QualityReport> {
    reports
        .into_iter()
        .map(|(m, q)| (m.target().to_string(), q))
        .collect()
}

/// Impact vectors of the admitted models on `ds`. Each model's shuffles are
/// seeded from `seed` and its target name only, so equal data gives equal
/// impacts regardless of window position or model order.
pub fn admitted_impacts(
    models: &[RegressionModel],
    qualities: &BTreeMap<String, QualityReport>,
    ds: &Dataset,
    cfg: &DriftConfig,
) -> Result<Vec<ImpactVector>> {
    models
        .iter()
        .filter(|m| qualities.get(m.target()).is_some_and(|q| cfg.net_cfg.admits(q)))
        .map(|m| {
            impact_vector(
                m,
                ds,
                cfg.repeats,
                derive_seed(cfg.seed, name_stream(m.target())),
            )
        })
        .collect()
}

fn check_targets(models: &[RegressionModel]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for m in models {
        if !seen.insert(m.target()) {
            return Err(Error::DuplicateTarget(m.target().to_string()));
        }
    }
    Ok(())
}

/// Reference network from impacts on the stable training data.
pub fn build_reference(
    models: &[RegressionModel],
    qualities: &BTreeMap<String, QualityReport>,
    train: &Dataset,
    cfg: &DriftConfig,
) -> Result<Network> {
    cfg.validate()?;
    check_targets(models)?;
    let impacts = admitted_impacts(models, qualities, train, cfg)?;
    if impacts.is_empty() {
        return Err(Error::EmptyReference);
    }
    let net = network::build(&impacts, qualities, &cfg.net_cfg)?;
    if net.edge_count() == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub window_start: usize,
    pub similarity: f64,
    pub drifting: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySeries {
    pub points: Vec<SeriesPoint>,
    pub window: WindowSpec,
    /// Rows in the evaluated stream.
    pub stream_rows: usize,
    pub drift_threshold: f64,
    pub reference: Network,
}

impl SimilaritySeries {
    pub fn similarities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.similarity).collect()
    }

    pub fn centers(&self) -> Vec<usize> {
        self.points
            .iter()
            .map(|p| self.window.center(p.window_start))
            .collect()
    }

    /// CSV `window_start,similarity,drifting[,indicator_at_center]`.
    pub fn to_csv(&self, indicator: Option<&[f64]>) -> Result<String> {
        let mut s = String::from("window_start,similarity,drifting");
        let samples = match indicator {
            Some(ind) => {
                s.push_str(",indicator_at_center");
                Some(self.indicator_samples(ind)?)
            }
            None => None,
        };
        s.push('\n');
        for (i, p) in self.points.iter().enumerate() {
            write!(s, "{},{},{}", p.window_start, p.similarity, p.drifting).unwrap();
            if let Some(v) = &samples {
                write!(s, ",{}", v[i]).unwrap();
            }
            s.push('\n');
        }
        Ok(s)
    }

    /// Indicator values at each window's center row.
    pub fn indicator_samples(&self, indicator: &[f64]) -> Result<Vec<f64>> {
        if indicator.len() != self.stream_rows {
            return Err(Error::InvalidArgument(format!(
                "indicator has {} values for a stream of {} rows",
                indicator.len(),
                self.stream_rows
            )));
        }
        Ok(self.centers().into_iter().map(|c| indicator[c]).collect())
    }

    /// Standard deviation of successive similarity differences.
    pub fn roughness(&self) -> f64 {
        let diffs: Vec<f64> = self
            .points
            .windows(2)
            .map(|w| w[1].similarity - w[0].similarity)
            .collect();
        if diffs.is_empty() {
            0.0
        } else {
            stats::std_dev(&diffs)
        }
    }
}

/// Impacts of the admitted models on one window of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowImpacts {
    pub start: usize,
    pub impacts: Vec<ImpactVector>,
}

/// Impacts for every window of `stream`. Only `cfg.window`, `cfg.repeats`,
/// `cfg.seed` and the NMSE threshold matter here, so one pass can be scored
/// against several references and measures.
pub fn window_impacts(
    models: &[RegressionModel],
    qualities: &BTreeMap<String, QualityReport>,
    stream: &Dataset,
    cfg: &DriftConfig,
) -> Result<Vec<WindowImpacts>> {
    cfg.validate()?;
    check_targets(models)?;
    for m in models {
        for v in std::iter::once(m.target()).chain(m.inputs().iter().map(String::as_str)) {
            if !stream.has_column(v) {
                return Err(Error::UnknownVariable(v.to_string()));
            }
        }
    }
    window_starts(stream.row_count(), cfg.window)?
        .into_par_iter()
        .map(|start| {
            let window = stream.slice_rows(start..start + cfg.window.size);
            let impacts = admitted_impacts(models, qualities, &window, cfg)?;
            Ok(WindowImpacts { start, impacts })
        })
        .collect()
}

/// Builds a network per window with `cfg.net_cfg` and scores it against
/// `reference` with `cfg.measure`.
pub fn score_windows(
    windows: &[WindowImpacts],
    qualities: &BTreeMap<String, QualityReport>,
    reference: &Network,
    stream_rows: usize,
    cfg: &DriftConfig,
) -> Result<SimilaritySeries> {
    cfg.validate()?;
    let universe = reference.node_names();
    let points = windows
        .par_iter()
        .map(|w| {
            let net = network::build(&w.impacts, qualities, &cfg.net_cfg)?;
            let similarity = network_similarity(reference, &net, &universe, cfg.measure)?;
            Ok(SeriesPoint {
                window_start: w.start,
                similarity,
                drifting: similarity < cfg.drift_threshold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilaritySeries {
        points,
        window: cfg.window,
        stream_rows,
        drift_threshold: cfg.drift_threshold,
        reference: reference.clone(),
    })
}

/// Scores every window of `stream` against `reference`.
pub fn detect(
    models: &[RegressionModel],
    qualities: &BTreeMap<String, QualityReport>,
    reference: &Network,
    stream: &Dataset,
    cfg: &DriftConfig,
) -> Result<SimilaritySeries> {
    let windows = window_impacts(models, qualities, stream, cfg)?;
    score_windows(&windows, qualities, reference, stream.row_count(), cfg)
}

/// Pearson correlation between window similarities and the indicator at
/// each window's center row.
pub fn drift_correlation(series: &SimilaritySeries, indicator: &[f64]) -> Result<f64> {
    if series.points.is_empty() {
        return Err(Error::UndefinedCorrelation("empty similarity series".into()));
    }
    let samples = series.indicator_samples(indicator)?;
    stats::pearson(&series.similarities(), &samples).ok_or_else(|| {
        Error::UndefinedCorrelation("similarity or indicator is constant across windows".into())
    })
}
