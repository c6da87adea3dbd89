//! Command-line front end: `synth`, `augment`, `train`, `eval`, `compare`.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 leakage guard,
//! 4 numeric failure, 5 every comparison cell failed.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{augment, load_csv, save_csv, split, synth_generate, Dataset, DatasetError, Target};
use crate::experiment::{
    evaluate_pipeline, fit_pipeline, run_compare, write_compare_outputs, ExperimentConfig, ExperimentError, ModelKind,
};
use crate::featurize::AtomScalar;
use crate::fsutil::atomic_write;
use crate::metrics::CSV_HEADER;
use crate::neuralnet::NetError;
use crate::persist::{load_pipeline, save_pipeline, PersistError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_LEAKAGE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_ALL_FAILED: i32 = 5;

/// Overrides the output directory of `compare`.
pub const OUT_DIR_ENV: &str = "VIBAUG_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "vibaug", version, about = "Vibrational-mode data augmentation for membrane property regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the seeded synthetic benchmark.
    Synth {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output directory; writes raw.csv plus geometry assets.
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a raw dataset and augment the training part only.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        factor: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train_fraction: Option<f64>,
        /// Jitter monomers that have no mode file instead of failing.
        #[arg(long)]
        allow_isotropic: bool,
    },
    /// Fit one model on a training CSV.
    Train {
        #[arg(long)]
        model: String,
        #[arg(long)]
        target: String,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Score a saved model on a raw test CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Metrics CSV; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the models × factors × targets comparison.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Raw dataset CSV instead of the synthetic benchmark.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        synth_n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        factors: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        gnuplot: bool,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML experiment config; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub atom_scalar: Option<String>,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::Leakage(_) => EXIT_LEAKAGE,
            ExperimentError::Net(NetError::NonFiniteLoss { .. }) => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        Failure::input(e)
    }
}

impl From<PersistError> for Failure {
    fn from(e: PersistError) -> Self {
        Failure::input(e)
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(a) = &common.atom_scalar {
        cfg.atom_scalar = match a.as_str() {
            "atomic_mass" | "mass" => AtomScalar::AtomicMass,
            "atomic_number" | "number" => AtomScalar::AtomicNumber,
            other => return Err(Failure::input(format!("unknown atom scalar {other:?}"))),
        };
    }
    Ok(cfg)
}

fn parse_model(s: &str) -> Result<ModelKind, Failure> {
    ModelKind::parse(s).ok_or_else(|| Failure::input(format!("unknown model {s:?}; expected dnn, rf, gbr or svr")))
}

fn parse_target(s: &str) -> Result<Target, Failure> {
    Target::parse(s).ok_or_else(|| Failure::input(format!("unknown target {s:?}; expected rejection or flux")))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    atomic_write(path, text.as_bytes()).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth { n, seed, out } => {
            let ds = synth_generate(n, seed)?;
            let path = out.join("raw.csv");
            save_csv(&ds, &path)?;
            println!("wrote {} records to {}", ds.len(), path.display());
        }
        Command::Augment {
            input,
            factor,
            out,
            common,
            train_fraction,
            allow_isotropic,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(f) = train_fraction {
                cfg.split.train_fraction = f;
            }
            let raw = load_csv(&input)?;
            if !allow_isotropic {
                if let Some(r) = raw.records.iter().find(|r| !r.has_modes()) {
                    return Err(DatasetError::MissingModes { id: r.id.clone() }.into());
                }
            }
            let (train, test) = split(&raw, &cfg.split_spec())?;
            let aug = augment(&train, factor, &cfg.vibration, cfg.augment_seed())?;
            save_csv(&aug, &out.join("train.csv"))?;
            save_csv(&test, &out.join("test.csv"))?;
            println!("train {} / test {}", aug.len(), test.len());
        }
        Command::Train {
            model,
            target,
            train,
            out,
            common,
            epochs,
            max_steps,
        } => {
            let kind = parse_model(&model)?;
            let target = parse_target(&target)?;
            let mut cfg = load_config(&common)?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if max_steps.is_some() {
                cfg.train.max_steps = max_steps;
            }
            let ds = load_csv(&train)?;
            let x = ds.features(cfg.atom_scalar)?;
            let p = fit_pipeline(kind, target, cfg.atom_scalar, x.view(), &ds.labels(target), &cfg.seeded_models())?;
            save_pipeline(&p, &out)?;
            println!("trained {kind} on {} records for {target}; saved {}", ds.len(), out.display());
        }
        Command::Eval { model, test, out } => {
            let p = load_pipeline(&model)?;
            let ds: Dataset = load_csv(&test)?;
            let report = evaluate_pipeline(&p, &ds)?;
            let text = format!("{CSV_HEADER}\n{}\n", report.csv_row(p.target.as_str(), p.kind.as_str(), p.train_size));
            match out {
                Some(path) => write_file(&path, &text)?,
                None => print!("{text}"),
            }
        }
        Command::Compare {
            common,
            out,
            data,
            synth_n,
            factors,
            targets,
            models,
            max_steps,
            gnuplot,
        } => {
            let mut cfg = load_config(&common)?;
            if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
                cfg.output_dir = dir.into();
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(d) = data {
                cfg.data.path = Some(d);
            }
            if let Some(n) = synth_n {
                cfg.data.synth_n = n;
            }
            if let Some(f) = factors {
                cfg.factors = f;
            }
            if let Some(t) = targets {
                cfg.targets = t.iter().map(|s| parse_target(s)).collect::<Result<_, _>>()?;
            }
            if let Some(m) = models {
                cfg.models = m.iter().map(|s| parse_model(s)).collect::<Result<_, _>>()?;
            }
            if max_steps.is_some() {
                cfg.train.max_steps = max_steps;
            }
            cfg.gnuplot |= gnuplot;
            let outcome = run_compare(&cfg)?;
            write_compare_outputs(&outcome, &cfg, &cfg.output_dir)?;
            println!(
                "{} of {} cells succeeded; results in {}",
                outcome.succeeded(),
                outcome.cells.len(),
                cfg.output_dir.join("results.csv").display()
            );
            if outcome.succeeded() == 0 {
                return Err(Failure {
                    code: EXIT_ALL_FAILED,
                    message: "every comparison cell failed".into(),
                });
            }
        }
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
