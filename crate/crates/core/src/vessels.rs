//! Communicating-vessels benchmark generator.
//!
//! Two vessels with fill states `y1`, `y2` are fed by inlets `u1`, `u2`,
//! drain at half their fill state, and exchange fluid through a channel with
//! flow `y3`:
//!
//! ```text
//! y1' = u1 + y3 - y1 / 2
//! y2' = u2 - y3 - y2 / 2
//! y3' = -(y1 - y2) - h * y3
//! ```
//!
//! The inlets follow independent AR(1) processes advanced once per emitted
//! row and held constant while the state is integrated across the row
//! interval. The channel coefficient `h` can decay linearly to simulate a
//! clogging channel. `y3` and `h` are emitted as hidden columns.

use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::rng::{derive_seed, seeded};

/// Emitted column order.
pub const COLUMNS: [&str; 10] = [
    "u1", "u2", "y1", "y2", "d1_y1", "d2_y1", "d1_y2", "d2_y2", "y3", "h",
];
/// Columns that are never offered to a model.
pub const HIDDEN: [&str; 2] = ["y3", "h"];
/// Variables used as both model inputs and targets.
pub const TARGETS: [&str; 4] = ["u1", "u2", "y1", "y2"];

pub const INSTANCES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VesselConfig {
    /// Rows to emit.
    pub steps: usize,
    /// Time between emitted rows.
    pub dt: f64,
    /// Euler substeps per emitted row.
    pub substeps: usize,
    pub ar_mean: f64,
    pub ar_phi: f64,
    pub ar_sigma: f64,
    pub h0: f64,
    pub h_final: f64,
    /// First row of the linear decay of `h`.
    pub drift_start: usize,
    /// Row at which `h` reaches `h_final`.
    pub drift_end: usize,
    /// Rows simulated (at `h0`) and discarded before emitting.
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for VesselConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            dt: 0.1,
            substeps: 40,
            ar_mean: 2.0,
            ar_phi: 0.8,
            ar_sigma: 0.2,
            h0: 1.0,
            h_final: 0.0,
            drift_start: 0,
            drift_end: 1000,
            burn_in: 200,
            seed: 42,
        }
    }
}

impl VesselConfig {
    /// Same configuration with `h` held at `h0`.
    pub fn stable(&self) -> Self {
        Self {
            h_final: self.h0,
            drift_start: 0,
            drift_end: 0,
            ..self.clone()
        }
    }

    pub fn is_stable(&self) -> bool {
        self.h_final == self.h0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.steps < 1 {
            return bad("steps must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.substeps < 1 {
            return bad("substeps must be at least 1".into());
        }
        if !(self.ar_phi > -1.0 && self.ar_phi < 1.0) {
            return bad(format!("ar_phi must be in (-1, 1), got {}", self.ar_phi));
        }
        if !(self.ar_sigma >= 0.0) || !self.ar_mean.is_finite() {
            return bad("ar_sigma must be non-negative and ar_mean finite".into());
        }
        if !(self.h0 > 0.0) || !(self.h_final >= 0.0) || self.h_final > self.h0 {
            return bad(format!(
                "need h0 > 0 and 0 <= h_final <= h0, got h0={} h_final={}",
                self.h0, self.h_final
            ));
        }
        if self.drift_start > self.drift_end || self.drift_end > self.steps {
            return bad(format!(
                "need 0 <= drift_start <= drift_end <= steps, got {}..{} of {}",
                self.drift_start, self.drift_end, self.steps
            ));
        }
        Ok(())
    }

    /// Channel coefficient at an emitted row.
    pub fn h_at(&self, row: usize) -> f64 {
        if self.is_stable() || row < self.drift_start {
            self.h0
        } else if row >= self.drift_end {
            self.h_final
        } else {
            let frac = (row - self.drift_start) as f64 / (self.drift_end - self.drift_start) as f64;
            self.h0 + (self.h_final - self.h0) * frac
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VesselState {
    pub y1: f64,
    pub y2: f64,
    pub y3: f64,
    pub u1: f64,
    pub u2: f64,
}

impl VesselState {
    /// Steady state for constant inlets and channel coefficient `h`.
    pub fn equilibrium(u1: f64, u2: f64, h: f64) -> Self {
        let y3 = -(u1 - u2) / (2.0 + h / 2.0);
        let diff = -h * y3;
        let sum = 2.0 * (u1 + u2);
        Self {
            y1: (sum + diff) / 2.0,
            y2: (sum - diff) / 2.0,
            y3,
            u1,
            u2,
        }
    }

    fn is_finite(&self) -> bool {
        [self.y1, self.y2, self.y3, self.u1, self.u2]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Explicit Euler over `dt` in `substeps` steps with inlets held.
    pub fn integrate(&mut self, h: f64, dt: f64, substeps: usize) {
        let step = dt / substeps as f64;
        for _ in 0..substeps {
            let dy1 = self.u1 + self.y3 - self.y1 / 2.0;
            let dy2 = self.u2 - self.y3 - self.y2 / 2.0;
            let dy3 = -(self.y1 - self.y2) - h * self.y3;
            self.y1 += step * dy1;
            self.y2 += step * dy2;
            self.y3 += step * dy3;
        }
    }
}

/// One AR(1) update: `mean + phi * (prev - mean) + sigma * noise`.
pub fn ar1_step(prev: f64, cfg: &VesselConfig, noise: f64) -> f64 {
    cfg.ar_mean + cfg.ar_phi * (prev - cfg.ar_mean) + cfg.ar_sigma * noise
}

/// Simulates one instance. Hidden columns `y3` and `h` are flagged on the
/// returned dataset.
pub fn simulate(cfg: &VesselConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed);
    let mut state = VesselState::equilibrium(cfg.ar_mean, cfg.ar_mean, cfg.h0);
    let mut advance_inlets = |s: &mut VesselState| {
        let n1: f64 = StandardNormal.sample(&mut rng);
        let n2: f64 = StandardNormal.sample(&mut rng);
        s.u1 = ar1_step(s.u1, cfg, n1);
        s.u2 = ar1_step(s.u2, cfg, n2);
    };

    // The last burn-in sample and one sample past the end pad the trajectory
    // so every emitted row gets central differences.
    let mut pre = None;
    for _ in 0..cfg.burn_in {
        pre = Some((state, cfg.h0));
        state.integrate(cfg.h0, cfg.dt, cfg.substeps);
        advance_inlets(&mut state);
    }
    if !state.is_finite() {
        return Err(Error::NonFiniteState { row: 0 });
    }

    let n = cfg.steps;
    let mut cols: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::with_capacity(n + 2));
    let mut push = |s: &VesselState, h: f64| {
        for (c, v) in cols.iter_mut().zip([s.u1, s.u2, s.y1, s.y2, s.y3, h]) {
            c.push(v);
        }
    };
    if let Some((s, h)) = pre {
        push(&s, h);
    }
    for row in 0..n {
        if !state.is_finite() {
            return Err(Error::NonFiniteState { row });
        }
        let h = cfg.h_at(row);
        push(&state, h);
        state.integrate(h, cfg.dt, cfg.substeps);
        advance_inlets(&mut state);
    }
    if !state.is_finite() {
        return Err(Error::NonFiniteState { row: n });
    }
    push(&state, cfg.h_at(n));

    let offset = usize::from(pre.is_some());
    let [u1, u2, y1, y2, y3, h] = cols;
    let base = Dataset::new(vec![
        ("u1", u1),
        ("u2", u2),
        ("y1", y1),
        ("y2", y2),
        ("y3", y3),
        ("h", h),
    ])?;
    let base = if base.row_count() >= 3 {
        base.add_derivatives(&["y1", "y2"], cfg.dt)?
            .reorder_columns(&COLUMNS)?
    } else {
        base
    };
    let base = base.slice_rows(offset..offset + n);
    base.with_hidden(&HIDDEN)
}

/// Sidecar metadata written next to the benchmark files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMeta {
    pub version: u32,
    pub base: VesselConfig,
    pub hidden: Vec<String>,
    pub stable: Vec<String>,
    pub drift: Vec<String>,
}

pub const META_FILE: &str = "benchmark.json";

pub fn stable_name(i: usize) -> String {
    format!("stable_{:02}.csv", i + 1)
}

pub fn drift_name(i: usize) -> String {
    format!("drift_{:02}.csv", i + 1)
}

/// Configurations of the stable and drifting instances derived from `base`.
pub fn benchmark_configs(base: &VesselConfig) -> (Vec<VesselConfig>, Vec<VesselConfig>) {
    let stable = (0..INSTANCES)
        .map(|i| VesselConfig {
            seed: derive_seed(base.seed, i as u64),
            ..base.stable()
        })
        .collect();
    let drift = (0..INSTANCES)
        .map(|i| VesselConfig {
            seed: derive_seed(base.seed, (INSTANCES + i) as u64),
            ..base.clone()
        })
        .collect();
    (stable, drift)
}

/// Writes `stable_01..10.csv`, `drift_01..10.csv` and the metadata file.
/// All instances are simulated before anything touches the disk.
pub fn generate_benchmark(base: &VesselConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    base.validate()?;
    if base.is_stable() {
        return Err(Error::InvalidArgument(
            "benchmark base config must have h_final < h0".into(),
        ));
    }
    let (stable, drift) = benchmark_configs(base);
    let mut files: Vec<(String, String)> = Vec::new();
    for (i, cfg) in stable.iter().enumerate() {
        files.push((stable_name(i), simulate(cfg)?.to_csv_string()));
    }
    for (i, cfg) in drift.iter().enumerate() {
        files.push((drift_name(i), simulate(cfg)?.to_csv_string()));
    }
    let meta = BenchmarkMeta {
        version: 1,
        base: base.clone(),
        hidden: HIDDEN.iter().map(|s| s.to_string()).collect(),
        stable: (0..INSTANCES).map(stable_name).collect(),
        drift: (0..INSTANCES).map(drift_name).collect(),
    };
    let meta_text = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Serialization(e.to_string()))?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut paths = Vec::with_capacity(files.len() + 1);
    for (name, text) in files {
        let p = out_dir.join(name);
        write_atomic(&p, text.as_bytes())?;
        paths.push(p);
    }
    let p = out_dir.join(META_FILE);
    write_atomic(&p, meta_text.as_bytes())?;
    paths.push(p);
    Ok(paths)
}

/// Loads a benchmark CSV and flags the hidden columns that are present.
pub fn load_instance(path: &Path) -> Result<Dataset> {
    let ds = Dataset::load_csv(path)?;
    let hidden: Vec<&str> = HIDDEN.iter().copied().filter(|h| ds.has_column(h)).collect();
    ds.with_hidden(&hidden)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> VesselConfig {
        VesselConfig {
            ar_sigma: 0.0,
            ..VesselConfig::default().stable()
        }
    }

    #[test]
    fn ar1_examples() {
        let cfg = VesselConfig {
            ar_sigma: 0.0,
            ..Default::default()
        };
        assert_eq!(ar1_step(cfg.ar_mean, &cfg, 1.3), cfg.ar_mean);
        let cfg = VesselConfig {
            ar_sigma: 0.0,
            ar_phi: 0.5,
            ar_mean: 1.0,
            ..Default::default()
        };
        assert_eq!(ar1_step(3.0, &cfg, 0.7), 2.0);
    }

    #[test]
    fn ar1_stationary_moments() {
        let cfg = VesselConfig::default();
        let mut rng = seeded(5);
        let mut x = cfg.ar_mean;
        let n = 400_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            x = ar1_step(x, &cfg, z);
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let want_var = cfg.ar_sigma.powi(2) / (1.0 - cfg.ar_phi.powi(2));
        // effective sample size is reduced by the autocorrelation (1+phi)/(1-phi) = 9
        assert!((mean - cfg.ar_mean).abs() < 0.005, "mean {mean}");
        assert!((var / want_var - 1.0).abs() < 0.03, "var {var} vs {want_var}");
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        for &(u1, u2, h) in &[(2.0, 2.0, 1.0), (1.0, 3.0, 0.5), (2.5, 1.0, 0.0)] {
            let s = VesselState::equilibrium(u1, u2, h);
            let dy1 = u1 + s.y3 - s.y1 / 2.0;
            let dy2 = u2 - s.y3 - s.y2 / 2.0;
            let dy3 = -(s.y1 - s.y2) - h * s.y3;
            for d in [dy1, dy2, dy3] {
                assert!(d.abs() < 1e-12, "{u1} {u2} {h}: {d}");
            }
        }
        let s = VesselState::equilibrium(2.0, 2.0, 1.0);
        assert_eq!((s.y1, s.y2, s.y3), (4.0, 4.0, 0.0));
    }

    #[test]
    fn noise_free_run_stays_at_equilibrium() {
        let ds = simulate(&quiet()).unwrap();
        for name in ["y1", "y2"] {
            assert!(ds.column(name).unwrap().iter().all(|&v| (v - 4.0).abs() < 1e-12));
        }
        assert!(ds.column("y3").unwrap().iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn channel_flows_toward_lower_vessel() {
        let mut s = VesselState {
            y1: 5.0,
            y2: 3.0,
            y3: 0.0,
            u1: 2.0,
            u2: 2.0,
        };
        s.integrate(1.0, 0.1, 10);
        assert!(s.y3 < 0.0);
    }

    #[test]
    fn empty_inlets_drain() {
        let mut s = VesselState {
            y1: 5.0,
            y2: 3.0,
            y3: 0.0,
            u1: 0.0,
            u2: 0.0,
        };
        let mut prev = s.y1 + s.y2;
        for _ in 0..500 {
            s.integrate(1.0, 0.1, 10);
            let total = s.y1 + s.y2;
            assert!(total < prev);
            prev = total;
        }
        assert!(prev < 1e-8);
    }

    #[test]
    fn columns_and_hidden_flags() {
        let ds = simulate(&VesselConfig::default()).unwrap();
        assert_eq!(ds.names(), COLUMNS.to_vec());
        assert_eq!(ds.row_count(), 1000);
        assert_eq!(ds.hidden_names(), vec!["h", "y3"]);
        assert!(!ds.visible_names().contains(&"y3"));
    }

    #[test]
    fn h_schedules() {
        let stable = simulate(&VesselConfig::default().stable()).unwrap();
        assert!(stable.column("h").unwrap().iter().all(|&h| h == 1.0));
        let drift = simulate(&VesselConfig::default()).unwrap();
        let h = drift.column("h").unwrap();
        assert_eq!(h[0], 1.0);
        assert!(h.windows(2).all(|w| w[1] <= w[0]));
        assert!(h[999] < 0.01);
        let cfg = VesselConfig {
            drift_start: 100,
            drift_end: 300,
            h_final: 0.2,
            ..Default::default()
        };
        assert_eq!(cfg.h_at(50), 1.0);
        assert!((cfg.h_at(200) - 0.6).abs() < 1e-12);
        assert_eq!(cfg.h_at(300), 0.2);
        assert_eq!(cfg.h_at(999), 0.2);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = VesselConfig::default();
        for cfg in [
            VesselConfig { ar_phi: 1.0, ..base.clone() },
            VesselConfig { dt: 0.0, ..base.clone() },
            VesselConfig { h_final: 2.0, ..base.clone() },
            VesselConfig { drift_end: 2000, ..base.clone() },
            VesselConfig { substeps: 0, ..base.clone() },
        ] {
            assert!(simulate(&cfg).is_err());
        }
    }

    #[test]
    fn blow_up_reports_row() {
        // dt far beyond the Euler stability limit
        let cfg = VesselConfig {
            dt: 400.0,
            substeps: 1,
            burn_in: 0,
            ..Default::default()
        };
        match simulate(&cfg) {
            Err(Error::NonFiniteState { row }) => assert!(row > 0 && row < 1000),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
