//! Command-line front end. Each subcommand maps onto one pipeline stage;
//! state moves between stages through files under the configured output
//! directory, so stages can be rerun and inspected independently.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use memefuse::classify::ClassifierSpec;
use memefuse::data::{classifier_label, generate_synthetic, RunConfig};
use memefuse::models::{Arch, FeatureTap};
use memefuse::{pipeline, Error, Result};

#[derive(Parser)]
#[command(
    name = "memefuse",
    version,
    about = "Multimodal meme sentiment pipeline: preprocess, train extractors, extract features, classify, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Config-driven stages share these flags. `--seed` and `--out` override
/// the values in the config file for this invocation only.
#[derive(Args)]
struct RunArgs {
    /// Run configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.override_seed(seed);
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled synthetic dataset with a ready-to-run config
    SynthData {
        /// Directory to create the dataset in
        #[arg(long)]
        out: PathBuf,
        /// Samples per sentiment class
        #[arg(long, default_value_t = 60)]
        n_per_class: usize,
        /// 1 = fully class-separable, 0 = pure noise
        #[arg(long, default_value_t = 0.9)]
        separability: f64,
        /// Seed for all generated randomness
        #[arg(long)]
        seed: u64,
    },
    /// Tokenize text, encode and pad, resize and scale images, load
    /// embedding tables, and store the prepared dataset
    Preprocess(RunArgs),
    /// Train one feature extractor with early stopping and checkpoint it
    TrainExtractor {
        #[command(flatten)]
        run: RunArgs,
        /// Architecture: me, biae, or mrn
        #[arg(long)]
        arch: String,
    },
    /// Run the dataset through a trained extractor and store the features
    Extract {
        #[command(flatten)]
        run: RunArgs,
        /// Feature tap: me_avg, biae_latent, rb1, or rb2
        #[arg(long)]
        tap: String,
    },
    /// Fit configured classifiers on a tap's train+validation features
    TrainClassifier {
        #[command(flatten)]
        run: RunArgs,
        /// Feature tap to train on
        #[arg(long)]
        tap: String,
        /// Restrict to one configured classifier, by family (e.g. knn)
        /// or exact label (e.g. knn3)
        #[arg(long)]
        family: Option<String>,
    },
    /// Cross-validate every configured classifier on every extracted tap
    EvaluateCv(RunArgs),
    /// Score every stored classifier on the held-out test rows
    EvaluateTest(RunArgs),
    /// Print the stored evaluation tables
    Report(RunArgs),
}

/// Configured classifiers matching a `--family` filter; family names
/// select all of a family, labels select exactly one entry.
fn select_classifiers<'a>(
    cfg: &'a RunConfig,
    family: Option<&str>,
) -> Result<Vec<&'a ClassifierSpec>> {
    let Some(wanted) = family else {
        return Ok(cfg.classifiers.iter().collect());
    };
    let picked: Vec<&ClassifierSpec> = cfg
        .classifiers
        .iter()
        .filter(|s| s.family.as_str() == wanted || classifier_label(s) == wanted)
        .collect();
    if picked.is_empty() {
        let known: Vec<String> = cfg.classifiers.iter().map(classifier_label).collect();
        return Err(Error::config(format!(
            "no configured classifier matches \"{wanted}\"; configured: {}",
            known.join(", ")
        )));
    }
    Ok(picked)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::SynthData { out, n_per_class, separability, seed } => {
            let made = generate_synthetic(&out, n_per_class, separability, seed)?;
            println!(
                "wrote {} samples to {}",
                3 * n_per_class,
                made.manifest.parent().expect("dataset dir").display()
            );
            println!("run config: {}", made.config.display());
        }
        Cmd::Preprocess(run) => {
            let cfg = run.load()?;
            let summary = pipeline::preprocess(&cfg)?;
            println!(
                "prepared {} samples, vocabulary of {} -> {}",
                summary.n_samples,
                summary.vocab_size,
                summary.prepared.display()
            );
            for (i, (dim, missing)) in summary.tables.iter().enumerate() {
                println!("embedding table {i}: dim {dim}, {missing} tokens without vectors");
            }
        }
        Cmd::TrainExtractor { run, arch } => {
            let cfg = run.load()?;
            let arch = Arch::parse(&arch)?;
            let summary = pipeline::train_extractor(&cfg, arch)?;
            println!(
                "trained {} for {} epochs (best epoch {}, val loss {:.6}) -> {}",
                arch.as_str(),
                summary.log.stopped_epoch,
                summary.log.best_epoch,
                summary.log.val_loss[summary.log.best_epoch - 1],
                summary.checkpoint.display()
            );
        }
        Cmd::Extract { run, tap } => {
            let cfg = run.load()?;
            let tap = FeatureTap::parse(&tap)?;
            let path = pipeline::extract_features(&cfg, tap)?;
            println!("wrote {} features -> {}", tap.as_str(), path.display());
        }
        Cmd::TrainClassifier { run, tap, family } => {
            let cfg = run.load()?;
            let tap = FeatureTap::parse(&tap)?;
            for spec in select_classifiers(&cfg, family.as_deref())? {
                let path = pipeline::train_classifier(&cfg, tap, spec)?;
                println!(
                    "trained {} on {} -> {}",
                    classifier_label(spec),
                    tap.as_str(),
                    path.display()
                );
            }
        }
        Cmd::EvaluateCv(run) => {
            let cfg = run.load()?;
            let path = pipeline::evaluate_cv(&cfg)?;
            println!("wrote {}", path.display());
        }
        Cmd::EvaluateTest(run) => {
            let cfg = run.load()?;
            let path = pipeline::evaluate_test(&cfg)?;
            println!("wrote {}", path.display());
        }
        Cmd::Report(run) => {
            let cfg = run.load()?;
            print!("{}", pipeline::report(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
