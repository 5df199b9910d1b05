//! `advtext`: trains a small text classifier, attacks it with universal
//! embedding-space perturbations, measures efficacy and neighborhood
//! preservation, and renders adversarial text samples.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "advtext",
    version,
    about = "Token-agnostic adversarial perturbations in a text classifier's embedding space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CkptArg {
    /// Classifier checkpoint (defaults to `<out>/classifier.ckpt`).
    #[arg(long)]
    ckpt: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the classifier and write checkpoint, vocabulary, and label map.
    TrainClassifier {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep all attack methods over the ε grid and write perturbations and
    /// the efficacy report.
    Attack {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ckpt: CkptArg,
    },
    /// Score neighborhood preservation of a saved perturbation.
    Ni {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ckpt: CkptArg,
        /// Perturbation file to score.
        #[arg(long)]
        pert: PathBuf,
        /// Neighbors per token (defaults to the config's ni_k).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Train the single perturbation on shrinking fractions of the training
    /// data and report accuracy under attack per fraction.
    DataRatio {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ckpt: CkptArg,
        /// Comma-separated fractions in (0, 1]; default 0.1 through 0.9.
        #[arg(long)]
        ratios: Option<String>,
    },
    /// Render adversarial text samples via nearest-neighbor replacement.
    GenerateSamples {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        ckpt: CkptArg,
        /// Perturbation file to build the substitution table from.
        #[arg(long)]
        pert: PathBuf,
    },
}

fn load_config(common: &Common) -> advtext_core::Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    config.apply_overrides(common.seed, common.out.clone());
    Ok(config)
}

fn parse_ratios(spec: Option<&str>) -> advtext_core::Result<Vec<f64>> {
    match spec {
        None => Ok((1..=9).map(|i| i as f64 / 10.0).collect()),
        Some(spec) => spec
            .split(',')
            .map(|item| {
                item.trim()
                    .parse::<f64>()
                    .map_err(|_| advtext_core::Error::InvalidInput(format!("bad ratio {item:?}")))
            })
            .collect(),
    }
}

impl CkptArg {
    fn resolve(self, config: &RunConfig) -> PathBuf {
        self.ckpt.unwrap_or_else(|| commands::default_ckpt(config))
    }
}

fn run(cli: Cli) -> advtext_core::Result<()> {
    match cli.command {
        Command::TrainClassifier { common } => {
            let config = load_config(&common)?;
            commands::cmd_train_classifier(&config)
        }
        Command::Attack { common, ckpt } => {
            let config = load_config(&common)?;
            commands::cmd_attack(&config, &ckpt.resolve(&config))
        }
        Command::Ni {
            common,
            ckpt,
            pert,
            k,
        } => {
            let config = load_config(&common)?;
            let k = k.unwrap_or(config.ni_k);
            commands::cmd_ni(&config, &ckpt.resolve(&config), &pert, k)
        }
        Command::DataRatio {
            common,
            ckpt,
            ratios,
        } => {
            let config = load_config(&common)?;
            let ratios = parse_ratios(ratios.as_deref())?;
            commands::cmd_data_ratio(&config, &ckpt.resolve(&config), &ratios)
        }
        Command::GenerateSamples { common, ckpt, pert } => {
            let config = load_config(&common)?;
            commands::cmd_generate_samples(&config, &ckpt.resolve(&config), &pert)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
