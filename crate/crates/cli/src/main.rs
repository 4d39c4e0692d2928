//! `vindrift` command line: simulate the benchmark, train models, run
//! sliding-window detection and evaluate drift correlations.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vindrift::{Error, Measure};

use config::{BackendChoice, ExperimentConfig, NetworkKind};

#[derive(Parser, Debug)]
#[command(name = "vindrift", version, about = "Concept drift detection with variable interaction networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Benchmark directory (default `<out>/data`).
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DriftArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    #[arg(long)]
    step: Option<usize>,
    #[arg(long, value_parser = parse_measure)]
    measure: Option<Measure>,
    #[arg(long)]
    acyclic: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the stable and drifting benchmark instances.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit one model per target on every stable instance.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        backend: Option<BackendChoice>,
    },
    /// Slide a window over every drift instance and score similarity.
    Detect {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        drift: DriftArgs,
        #[arg(long)]
        window: Option<usize>,
        /// Write DOT files of the reference and every window network.
        #[arg(long)]
        dot: bool,
    },
    /// Correlate similarity with the hidden drift indicator over a window sweep.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        drift: DriftArgs,
        /// Window size; repeat to sweep several.
        #[arg(long)]
        window: Vec<usize>,
    },
}

fn parse_measure(s: &str) -> Result<Measure, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Run(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Run(e) if e.is_numerical() => 3,
            Failure::Run(Error::InvalidArgument(_)) => 1,
            Failure::Run(_) => 2,
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p).map_err(Failure::Usage)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(d) = &common.data {
        cfg.data = Some(d.clone());
    }
    Ok(cfg)
}

fn apply_drift(cfg: &mut ExperimentConfig, args: &DriftArgs) {
    if let Some(b) = args.backend {
        cfg.detect.backend = b;
    }
    if let Some(s) = args.step {
        cfg.detect.step = s;
    }
    if let Some(m) = args.measure {
        cfg.detect.measure = m;
        cfg.evaluate.measures = vec![m];
    }
    if args.acyclic {
        cfg.detect.acyclic = true;
        cfg.evaluate.kinds = vec![NetworkKind::Acyclic];
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = load(&common)?;
            commands::simulate(&cfg).map_err(Failure::Run)
        }
        Command::Train { common, backend } => {
            let mut cfg = load(&common)?;
            if let Some(b) = backend {
                cfg.train.backend = b;
            }
            commands::train(&cfg).map_err(Failure::Run)
        }
        Command::Detect {
            common,
            drift,
            window,
            dot,
        } => {
            let mut cfg = load(&common)?;
            apply_drift(&mut cfg, &drift);
            if let Some(w) = window {
                cfg.detect.window = w;
            }
            cfg.detect.dot |= dot;
            commands::detect(&cfg).map_err(Failure::Run)
        }
        Command::Evaluate {
            common,
            drift,
            window,
        } => {
            let mut cfg = load(&common)?;
            apply_drift(&mut cfg, &drift);
            if !window.is_empty() {
                cfg.evaluate.windows = window;
            }
            commands::evaluate(&cfg).map_err(Failure::Run)
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
fn execute<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Run(e) => eprintln!("error: {e}"),
            }
            f.code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(execute(std::env::args_os()))
}
