use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use vindrift::regression::{OsgaParams, RandomForestParams};
use vindrift::{Backend, Measure, VesselConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Linear,
    Rf,
    Symbolic,
    All,
}

impl BackendChoice {
    /// Concrete backends selected, in a fixed order.
    pub fn expand(self) -> Vec<BackendChoice> {
        match self {
            BackendChoice::All => vec![BackendChoice::Linear, BackendChoice::Rf, BackendChoice::Symbolic],
            b => vec![b],
        }
    }
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendChoice::Linear => "linear",
            BackendChoice::Rf => "rf",
            BackendChoice::Symbolic => "symbolic",
            BackendChoice::All => "all",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Cyclic,
    Acyclic,
}

impl NetworkKind {
    pub fn is_acyclic(self) -> bool {
        self == NetworkKind::Acyclic
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetworkKind::Cyclic => "cyclic",
            NetworkKind::Acyclic => "acyclic",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmseThresholds {
    pub linear: f64,
    pub rf: f64,
    pub symbolic: f64,
}

impl Default for NmseThresholds {
    fn default() -> Self {
        Self {
            linear: 0.2,
            rf: 0.5,
            symbolic: 0.2,
        }
    }
}

impl NmseThresholds {
    pub fn get(&self, backend: BackendChoice) -> f64 {
        match backend {
            BackendChoice::Rf => self.rf,
            BackendChoice::Symbolic => self.symbolic,
            _ => self.linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub backend: BackendChoice,
    /// Leading fraction of each stable instance used for fitting.
    pub split: f64,
    pub random_forest: RandomForestParams,
    pub symbolic: OsgaParams,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            backend: BackendChoice::Linear,
            split: 0.66,
            random_forest: RandomForestParams::default(),
            symbolic: OsgaParams::default(),
        }
    }
}

impl TrainSection {
    pub fn backend_params(&self, b: BackendChoice) -> Backend {
        match b {
            BackendChoice::Rf => Backend::RandomForest(self.random_forest.clone()),
            BackendChoice::Symbolic => Backend::Symbolic(self.symbolic.clone()),
            _ => Backend::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectSection {
    pub backend: BackendChoice,
    pub window: usize,
    pub step: usize,
    pub measure: Measure,
    pub acyclic: bool,
    pub repeats: usize,
    pub drift_threshold: f64,
    pub impact_threshold: f64,
    pub nmse_threshold: NmseThresholds,
    /// Also write DOT files of the reference and every window.
    pub dot: bool,
}

impl Default for DetectSection {
    fn default() -> Self {
        Self {
            backend: BackendChoice::Linear,
            window: 150,
            step: 10,
            measure: Measure::Spearman,
            acyclic: false,
            repeats: vindrift::impacts::DEFAULT_REPEATS,
            drift_threshold: 0.5,
            impact_threshold: 0.1,
            nmse_threshold: NmseThresholds::default(),
            dot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub windows: Vec<usize>,
    pub measures: Vec<Measure>,
    pub kinds: Vec<NetworkKind>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            windows: vec![50, 100, 150, 200, 400],
            measures: Measure::ALL.to_vec(),
            kinds: vec![NetworkKind::Cyclic, NetworkKind::Acyclic],
        }
    }
}

/// Everything a run needs. The top-level seed drives simulation, model
/// fitting and impact shuffles; `[simulate].seed` is replaced by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Benchmark directory, `<out>/data` when unset.
    pub data: Option<PathBuf>,
    pub simulate: VesselConfig,
    pub train: TrainSection,
    pub detect: DetectSection,
    pub evaluate: EvaluateSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out: PathBuf::from("out"),
            data: None,
            simulate: VesselConfig::default(),
            train: TrainSection::default(),
            detect: DetectSection::default(),
            evaluate: EvaluateSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data.clone().unwrap_or_else(|| self.out.join("data"))
    }

    pub fn vessel(&self) -> VesselConfig {
        VesselConfig {
            seed: self.seed,
            ..self.simulate.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        let cfg: ExperimentConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn sections_override_fields() {
        let cfg: ExperimentConfig = toml::from_str(
            "seed = 7\n[train]\nbackend = \"rf\"\n[train.random_forest]\ntrees = 10\n\
             [detect]\nmeasure = \"ndcg\"\n[evaluate]\nwindows = [100, 200]\nkinds = [\"acyclic\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.backend, BackendChoice::Rf);
        assert_eq!(cfg.train.random_forest.trees, 10);
        assert_eq!(cfg.train.random_forest.r, 0.5);
        assert_eq!(cfg.detect.measure, Measure::Ndcg);
        assert_eq!(cfg.evaluate.windows, vec![100, 200]);
        assert_eq!(cfg.vessel().seed, 7);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("sed = 1").is_err());
        assert!(toml::from_str::<ExperimentConfig>("[detect]\nwindw = 3").is_err());
    }

    #[test]
    fn readme_example_parses() {
        let readme = include_str!("../../../README.md");
        let start = readme.find("```toml\n").unwrap() + 8;
        let len = readme[start..].find("```").unwrap();
        let cfg: ExperimentConfig = toml::from_str(&readme[start..start + len]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }
}
