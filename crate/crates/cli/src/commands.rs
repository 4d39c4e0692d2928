use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vindrift::drift::{self, admitted_impacts, score_windows, window_impacts, DriftConfig};
use vindrift::io::write_atomic;
use vindrift::network;
use vindrift::regression::{self, ModelSpec, QualityReport, RegressionModel};
use vindrift::rng::{derive_seed, name_stream};
use vindrift::vessels::{self, BenchmarkMeta, INSTANCES, META_FILE, TARGETS};
use vindrift::{stats, Dataset, Error, Measure, Network, NetworkConfig, Result, WindowSpec};

use crate::config::{BackendChoice, ExperimentConfig, NetworkKind};

const RECORD_VERSION: u32 = 1;

/// A fitted model with the qualities measured right after training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub version: u32,
    pub instance: String,
    pub train: QualityReport,
    pub test: QualityReport,
    pub model: RegressionModel,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    write_atomic(path, text.as_bytes())
}

fn stem(file: &str) -> &str {
    file.strip_suffix(".csv").unwrap_or(file)
}

/// Stable and drift file names, paired by position.
fn instances(data: &Path) -> Result<Vec<(String, String)>> {
    let meta_path = data.join(META_FILE);
    if !meta_path.exists() {
        return Ok((0..INSTANCES)
            .map(|i| (vessels::stable_name(i), vessels::drift_name(i)))
            .collect());
    }
    let text = std::fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let meta: BenchmarkMeta =
        serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))?;
    if meta.stable.len() != meta.drift.len() {
        return Err(Error::InvalidDataset(format!(
            "{} lists {} stable and {} drift instances",
            meta_path.display(),
            meta.stable.len(),
            meta.drift.len()
        )));
    }
    Ok(meta.stable.into_iter().zip(meta.drift).collect())
}

pub fn model_dir(out: &Path, backend: BackendChoice) -> PathBuf {
    out.join("models").join(backend.to_string())
}

pub fn model_path(out: &Path, backend: BackendChoice, instance: &str, target: &str) -> PathBuf {
    model_dir(out, backend).join(format!("{instance}_{target}.json"))
}

pub fn detect_dir(out: &Path, backend: BackendChoice, kind: NetworkKind, window: WindowSpec, measure: Measure) -> PathBuf {
    out.join("detect")
        .join(backend.to_string())
        .join(kind.to_string())
        .join(format!("w{}_s{}_{measure}", window.size, window.step))
}

fn model_seed(seed: u64, backend: BackendChoice, instance: &str, target: &str) -> u64 {
    derive_seed(seed, name_stream(&format!("{backend}/{instance}/{target}")))
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let dir = cfg.data_dir();
    let files = vessels::generate_benchmark(&cfg.vessel(), &dir)?;
    eprintln!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}

pub fn train(cfg: &ExperimentConfig) -> Result<()> {
    let data = cfg.data_dir();
    let pairs = instances(&data)?;
    for b in cfg.train.backend.expand() {
        let backend = cfg.train.backend_params(b);
        let mut outputs = Vec::new();
        for (file, _) in &pairs {
            let name = stem(file);
            let ds = vessels::load_instance(&data.join(file))?;
            let (train, test) = ds.split(cfg.train.split)?;
            for target in TARGETS {
                let seed = model_seed(cfg.seed, b, name, target);
                let spec = ModelSpec::all_visible(&train, target, backend.clone(), seed);
                let model = regression::fit(&spec, &train)?;
                let record = ModelRecord {
                    version: RECORD_VERSION,
                    instance: name.to_string(),
                    train: model.evaluate(&train)?,
                    test: model.evaluate(&test)?,
                    model,
                };
                eprintln!(
                    "{b} {name} {target}: train r2 {:.3}, test r2 {:.3}",
                    record.train.r2, record.test.r2
                );
                let text = serde_json::to_string_pretty(&record)
                    .map_err(|e| Error::Serialization(e.to_string()))?;
                outputs.push((model_path(&cfg.out, b, name, target), text));
            }
        }
        for (path, text) in outputs {
            write_file(&path, &text)?;
        }
    }
    write_quality(&cfg.out)
}

fn read_record(path: &Path) -> Result<ModelRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let rec: ModelRecord = serde_json::from_str(&text)
        .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
    if rec.version != RECORD_VERSION {
        return Err(Error::Serialization(format!(
            "{}: unsupported record version {}",
            path.display(),
            rec.version
        )));
    }
    Ok(rec)
}

/// Shortest round-trip text, in exponent form for tiny magnitudes.
fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-4 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn push_stats(s: &mut String, x: &[f64]) {
    write!(s, ",{},{}", num(stats::mean(x)), num(stats::std_dev(x))).unwrap();
}

/// Rebuilds `quality.csv` from every model record under `out`.
pub fn write_quality(out: &Path) -> Result<()> {
    let mut s = String::from("backend,target,partition,instances,r2_mean,r2_std,nmse_mean,nmse_std\n");
    for b in BackendChoice::All.expand() {
        let dir = model_dir(out, b);
        if !dir.is_dir() {
            continue;
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| io_err(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut by_target: BTreeMap<String, Vec<ModelRecord>> = BTreeMap::new();
        for f in &files {
            let rec = read_record(f)?;
            by_target.entry(rec.model.target().to_string()).or_default().push(rec);
        }
        for target in TARGETS {
            let Some(recs) = by_target.get(target) else { continue };
            for (partition, pick) in [
                ("train", (|r: &ModelRecord| r.train) as fn(&ModelRecord) -> QualityReport),
                ("test", |r: &ModelRecord| r.test),
            ] {
                let q: Vec<QualityReport> = recs.iter().map(pick).collect();
                write!(s, "{b},{target},{partition},{}", q.len()).unwrap();
                push_stats(&mut s, &q.iter().map(|q| q.r2).collect::<Vec<_>>());
                push_stats(&mut s, &q.iter().map(|q| q.nmse).collect::<Vec<_>>());
                s.push('\n');
            }
        }
    }
    write_file(&out.join("quality.csv"), &s)
}

/// Models, test qualities and training partition of one stable instance.
struct Phase1 {
    models: Vec<RegressionModel>,
    qualities: BTreeMap<String, QualityReport>,
    train: Dataset,
}

fn load_phase1(cfg: &ExperimentConfig, backend: BackendChoice, file: &str) -> Result<Phase1> {
    let name = stem(file);
    let mut models = Vec::new();
    let mut qualities = BTreeMap::new();
    for target in TARGETS {
        let rec = read_record(&model_path(&cfg.out, backend, name, target))?;
        qualities.insert(rec.model.target().to_string(), rec.test);
        models.push(rec.model);
    }
    let ds = vessels::load_instance(&cfg.data_dir().join(file))?;
    let (train, _) = ds.split(cfg.train.split)?;
    Ok(Phase1 {
        models,
        qualities,
        train,
    })
}

fn drift_config(cfg: &ExperimentConfig, backend: BackendChoice, window: usize, kind: NetworkKind, measure: Measure) -> DriftConfig {
    let d = &cfg.detect;
    DriftConfig {
        window: WindowSpec {
            size: window,
            step: d.step,
        },
        repeats: d.repeats,
        net_cfg: NetworkConfig {
            nmse_threshold: d.nmse_threshold.get(backend),
            impact_threshold: d.impact_threshold,
            acyclic: kind.is_acyclic(),
        },
        measure,
        drift_threshold: d.drift_threshold,
        seed: cfg.seed,
    }
}

fn reference_network(p: &Phase1, cfg: &DriftConfig) -> Result<Network> {
    drift::build_reference(&p.models, &p.qualities, &p.train, cfg)
}

pub fn detect(cfg: &ExperimentConfig) -> Result<()> {
    let d = &cfg.detect;
    let kind = if d.acyclic {
        NetworkKind::Acyclic
    } else {
        NetworkKind::Cyclic
    };
    let data = cfg.data_dir();
    let pairs = instances(&data)?;
    for b in d.backend.expand() {
        let dcfg = drift_config(cfg, b, d.window, kind, d.measure);
        dcfg.validate()?;
        let dir = detect_dir(&cfg.out, b, kind, dcfg.window, d.measure);
        let mut outputs = Vec::new();
        for (stable, drifting) in &pairs {
            let p = load_phase1(cfg, b, stable)?;
            let reference = reference_network(&p, &dcfg)?;
            let stream = vessels::load_instance(&data.join(drifting))?;
            let windows = window_impacts(&p.models, &p.qualities, &stream, &dcfg)?;
            let series = score_windows(&windows, &p.qualities, &reference, stream.row_count(), &dcfg)?;
            let name = stem(drifting);
            let h = stream.column("h").ok();
            outputs.push((dir.join(format!("{name}.csv")), series.to_csv(h)?));
            if d.dot {
                let sub = dir.join(name);
                outputs.push((sub.join("reference.dot"), reference.to_dot()));
                for w in &windows {
                    let net = network::build(&w.impacts, &p.qualities, &dcfg.net_cfg)?;
                    outputs.push((sub.join(format!("window_{:05}.dot", w.start)), net.to_dot()));
                }
            }
            let flagged = series.points.iter().filter(|p| p.drifting).count();
            eprintln!(
                "{b} {name}: {} windows, {flagged} flagged, mean similarity {:.3}",
                series.points.len(),
                stats::mean(&series.similarities())
            );
        }
        for (path, text) in outputs {
            write_file(&path, &text)?;
        }
    }
    Ok(())
}

struct InstanceScore {
    backend: BackendChoice,
    kind: NetworkKind,
    window: usize,
    measure: Measure,
    instance: String,
    correlation: Option<f64>,
    roughness: f64,
}

pub fn evaluate(cfg: &ExperimentConfig) -> Result<()> {
    let e = &cfg.evaluate;
    if e.windows.is_empty() || e.measures.is_empty() || e.kinds.is_empty() {
        return Err(Error::InvalidArgument(
            "evaluate needs at least one window size, measure and network kind".into(),
        ));
    }
    let data = cfg.data_dir();
    let pairs = instances(&data)?;
    let step = cfg.detect.step;
    let mut scores = Vec::new();
    for b in cfg.detect.backend.expand() {
        for (stable, drifting) in &pairs {
            let p = load_phase1(cfg, b, stable)?;
            let stream = vessels::load_instance(&data.join(drifting))?;
            let name = stem(drifting).to_string();
            let h = stream.column("h").map_err(|_| {
                Error::InvalidDataset(format!("{drifting} has no `h` column to correlate with"))
            })?;

            let base = drift_config(cfg, b, e.windows[0], NetworkKind::Cyclic, e.measures[0]);
            base.validate()?;
            let train_impacts = admitted_impacts(&p.models, &p.qualities, &p.train, &base)?;
            let mut references = Vec::new();
            for &kind in &e.kinds {
                let net_cfg = NetworkConfig {
                    acyclic: kind.is_acyclic(),
                    ..base.net_cfg
                };
                let net = network::build(&train_impacts, &p.qualities, &net_cfg)?;
                if net.edge_count() == 0 {
                    eprintln!("warning: {b} {name} {kind}: empty reference network, instance excluded");
                    continue;
                }
                references.push((kind, net));
            }

            for &window in &e.windows {
                let wcfg = drift_config(cfg, b, window, NetworkKind::Cyclic, e.measures[0]);
                let windows = window_impacts(&p.models, &p.qualities, &stream, &wcfg)?;
                for (kind, reference) in &references {
                    for &measure in &e.measures {
                        let mcfg = drift_config(cfg, b, window, *kind, measure);
                        let series = score_windows(&windows, &p.qualities, reference, stream.row_count(), &mcfg)?;
                        let correlation = match drift::drift_correlation(&series, h) {
                            Ok(c) => Some(c),
                            Err(err @ Error::UndefinedCorrelation(_)) => {
                                eprintln!("warning: {b} {name} {kind} w{window} {measure}: {err}, excluded");
                                None
                            }
                            Err(err) => return Err(err),
                        };
                        scores.push(InstanceScore {
                            backend: b,
                            kind: *kind,
                            window,
                            measure,
                            instance: name.clone(),
                            correlation,
                            roughness: series.roughness(),
                        });
                    }
                }
            }
            eprintln!("{b} {name}: evaluated");
        }
    }
    scores.sort_by(|a, b| {
        (a.backend, a.kind, a.window, a.measure.to_string(), &a.instance)
            .cmp(&(b.backend, b.kind, b.window, b.measure.to_string(), &b.instance))
    });

    let mut per = String::from("backend,kind,window,step,measure,instance,correlation,roughness\n");
    for s in &scores {
        let c = s.correlation.map(num).unwrap_or_default();
        writeln!(
            per,
            "{},{},{},{step},{},{},{c},{}",
            s.backend,
            s.kind,
            s.window,
            s.measure,
            s.instance,
            num(s.roughness)
        )
        .unwrap();
    }

    let mut agg = String::from(
        "backend,kind,window,step,measure,instances,excluded,correlation_mean,correlation_std,roughness_mean\n",
    );
    for group in scores.chunk_by(|a, b| {
        (a.backend, a.kind, a.window, a.measure) == (b.backend, b.kind, b.window, b.measure)
    }) {
        let g = &group[0];
        let corr: Vec<f64> = group.iter().filter_map(|s| s.correlation).collect();
        let rough: Vec<f64> = group.iter().map(|s| s.roughness).collect();
        write!(
            agg,
            "{},{},{},{step},{},{},{}",
            g.backend,
            g.kind,
            g.window,
            g.measure,
            corr.len(),
            group.len() - corr.len()
        )
        .unwrap();
        if corr.is_empty() {
            agg.push_str(",,");
        } else {
            push_stats(&mut agg, &corr);
        }
        writeln!(agg, ",{}", num(stats::mean(&rough))).unwrap();
        eprintln!(
            "{} {} w{} {}: mean correlation {:.3} over {} instances",
            g.backend,
            g.kind,
            g.window,
            g.measure,
            stats::mean(&corr),
            corr.len()
        );
    }
    write_file(&cfg.out.join("evaluation_instances.csv"), &per)?;
    write_file(&cfg.out.join("evaluation.csv"), &agg)
}
