//! Command-line front end. Settings come from a TOML run config; flags
//! override individual keys.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::model::Representation;
use crate::synthetic::SyntheticSpec;

pub use commands::Layout;
pub use config::RunConfig;
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_SCHEMA: i32 = 4;
pub const EXIT_PARSE: i32 = 5;
pub const EXIT_INSUFFICIENT_DATA: i32 = 6;
pub const EXIT_NO_SHARED_FEATURES: i32 = 7;
pub const EXIT_NUMERIC: i32 = 8;
pub const EXIT_OTHER: i32 = 9;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        Error::SchemaMismatch(_) | Error::UnknownClass(_) => EXIT_SCHEMA,
        Error::Parse { .. } | Error::Format { .. } => EXIT_PARSE,
        Error::InsufficientData(_) | Error::EmptyDataset | Error::MissingLabel(_) | Error::EmptyEvaluation => {
            EXIT_INSUFFICIENT_DATA
        }
        Error::NoSharedFeatures => EXIT_NO_SHARED_FEATURES,
        Error::NonFiniteGradient(_) | Error::DegenerateVector => EXIT_NUMERIC,
        Error::InvalidShape(_) | Error::InvalidLabel { .. } | Error::InvalidPair(..) | Error::InvalidBatch(_) => {
            EXIT_OTHER
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "flowcl",
    version,
    about = "Contrastive pretraining and evaluation for flow-record encoders"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true)]
    pub workdir: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the encoder on the encoder set and encode both CSVs.
    Preprocess(PreprocessArgs),
    /// Contrastive pretraining of the encoder and projection head.
    Pretrain(PretrainArgs),
    /// Train a classifier on the frozen encoder.
    TrainHead(HeadArgs),
    /// Score a trained head on the held-out test split.
    Evaluate(EvaluateArgs),
    /// Train and score a head on a foreign dataset through the frozen encoder.
    TransferEval(TransferArgs),
    /// Write a two-blob synthetic dataset.
    GenerateSynthetic(SyntheticArgs),
    /// Print the resolved configuration.
    ShowConfig,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long)]
    pub encoder_csv: Option<PathBuf>,
    #[arg(long)]
    pub head_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub mask_ratio: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HeadOptions {
    /// binary, six-class, all, or a comma-separated class list.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub label_fraction: Option<f64>,
    #[arg(long)]
    pub representation: Option<Representation>,
    #[arg(long)]
    pub head_epochs: Option<u32>,
}

#[derive(Debug, Args)]
pub struct HeadArgs {
    #[command(flatten)]
    pub options: HeadOptions,
    /// Output checkpoint (default: <workdir>/head.ckpt).
    #[arg(long)]
    pub head: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub head: Option<PathBuf>,
    /// Output report (default: <workdir>/report.json).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[command(flatten)]
    pub options: HeadOptions,
    #[arg(long)]
    pub target_schema: Option<String>,
    #[arg(long)]
    pub target_csv: Option<PathBuf>,
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    /// Output report (default: <workdir>/transfer-report.json).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 16)]
    pub features: usize,
    #[arg(long, default_value_t = 0.5)]
    pub encoder_fraction: f64,
    /// Features removed in the reduced target copy.
    #[arg(long, default_value_t = 0)]
    pub drop: usize,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl HeadOptions {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.head.task, self.task.clone());
        set(&mut cfg.head.label_fraction, self.label_fraction);
        set(&mut cfg.head.representation, self.representation);
        set(&mut cfg.head.epochs, self.head_epochs);
    }
}

impl Cli {
    /// Config file (or defaults) with every flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.workdir, self.workdir.clone());
        set(&mut cfg.seed, self.seed);
        match &self.command {
            Command::Preprocess(a) => {
                set(&mut cfg.preprocess.schema, a.schema.clone());
                if a.encoder_csv.is_some() {
                    cfg.preprocess.encoder_csv = a.encoder_csv.clone();
                }
                if a.head_csv.is_some() {
                    cfg.preprocess.head_csv = a.head_csv.clone();
                }
            }
            Command::Pretrain(a) => {
                set(&mut cfg.pretrain.preset, a.preset.clone());
                set(&mut cfg.pretrain.epochs, a.epochs);
                set(&mut cfg.pretrain.batch_size, a.batch_size);
                set(&mut cfg.pretrain.temperature, a.temperature);
                set(&mut cfg.pretrain.mask_ratio, a.mask_ratio);
                set(&mut cfg.pretrain.learning_rate, a.learning_rate);
            }
            Command::TrainHead(a) => a.options.apply(&mut cfg),
            Command::TransferEval(a) => {
                a.options.apply(&mut cfg);
                if a.target_schema.is_some() {
                    cfg.transfer.target_schema = a.target_schema.clone();
                }
                if a.target_csv.is_some() {
                    cfg.transfer.target_csv = a.target_csv.clone();
                }
                if a.aliases.is_some() {
                    cfg.transfer.aliases = a.aliases.clone();
                }
            }
            Command::Evaluate(_) | Command::GenerateSynthetic(_) | Command::ShowConfig => {}
        }
        Ok(cfg)
    }
}

/// Write to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

/// Execute one parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.resolve()?;
    let layout = Layout::new(&cfg);
    match &cli.command {
        Command::Preprocess(_) => {
            let manifest = commands::preprocess(&cfg)?;
            log::info!("wrote {}", manifest.display());
        }
        Command::Pretrain(_) => {
            let history = commands::pretrain(&cfg)?;
            if let Some(last) = history.epochs.last() {
                log::info!("final training loss {:.6}", last.train_loss);
            }
        }
        Command::TrainHead(a) => {
            let path = a.head.clone().unwrap_or_else(|| layout.head());
            commands::train_head(&cfg, &path)?;
            log::info!("wrote {}", path.display());
        }
        Command::Evaluate(a) => {
            let head = a.head.clone().unwrap_or_else(|| layout.head());
            let report = a.report.clone().unwrap_or_else(|| layout.report());
            emit(&(commands::evaluate(&cfg, &head, &report)?.to_json() + "\n"));
        }
        Command::TransferEval(a) => {
            let report = a.report.clone().unwrap_or_else(|| layout.transfer_report());
            emit(&(commands::transfer_eval(&cfg, &report)?.to_json() + "\n"));
        }
        Command::GenerateSynthetic(a) => {
            let req = commands::SyntheticRequest {
                out_dir: a.out_dir.clone(),
                spec: SyntheticSpec {
                    samples: a.samples,
                    features: a.features,
                    seed: cfg.seed,
                    ..SyntheticSpec::default()
                },
                encoder_fraction: a.encoder_fraction,
                drop: a.drop,
            };
            for p in commands::generate_synthetic(&req)? {
                emit(&format!("{}\n", p.display()));
            }
        }
        Command::ShowConfig => emit(&cfg.to_toml()),
    }
    Ok(())
}
