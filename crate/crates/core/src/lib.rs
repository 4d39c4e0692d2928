//! Concept drift detection with variable interaction networks.
//!
//! The pipeline has two phases. In the modeling phase a regression model is
//! fitted for every variable of interest from the remaining variables, the
//! permutation impact of each input is measured, and the impacts form a
//! weighted directed network ([`network`]). In the evaluation phase a window
//! slides over new data, impacts of the frozen models are recomputed per
//! window, and the similarity of each window's network to the reference
//! network is tracked ([`drift`]). A falling similarity signals drift.
//!
//! [`vessels`] generates the communicating-vessels benchmark used to
//! validate the approach.

pub mod data;
pub mod drift;
pub mod error;
pub mod impacts;
pub mod io;
pub mod network;
pub mod regression;
pub mod rng;
pub mod similarity;
pub mod stats;
pub mod vessels;

pub use data::{Dataset, WindowSpec};
pub use drift::{DriftConfig, SimilaritySeries};
pub use error::{Error, Result};
pub use impacts::ImpactVector;
pub use network::{Network, NetworkConfig};
pub use regression::{Backend, ModelSpec, QualityReport, RegressionModel};
pub use similarity::Measure;
pub use vessels::VesselConfig;
