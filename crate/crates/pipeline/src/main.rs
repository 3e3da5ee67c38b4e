use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oocyte_pipeline::commands::{self, EvaluateInputs};
use oocyte_pipeline::{PipelineError, Result, RunConfig};

/// Oocyte localization, feature extraction, viability classification and
/// evaluation.
#[derive(Debug, Parser)]
#[command(name = "oocyte", version)]
struct Cli {
    /// Run configuration (JSON). Missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic scenes and a manifest.
    Synth {
        /// Overrides the configured scene count.
        #[arg(long)]
        scenes: Option<usize>,
    },
    /// Detect oocytes in the manifest's masks and cut ROIs.
    Localize {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Compute features for every ROI.
    Extract {
        /// ROI index written by `localize`.
        #[arg(long)]
        rois: PathBuf,
    },
    /// Grid-search, fit and save a model.
    Train {
        #[arg(long)]
        features: PathBuf,
    },
    /// Label oocytes with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Compute the evaluation report.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        rois: PathBuf,
        /// Restrict classification metrics to this report's test split.
        #[arg(long)]
        train_report: Option<PathBuf>,
        /// Manifest of predicted masks, for per-class IoU.
        #[arg(long)]
        predicted_masks: Option<PathBuf>,
    },
    /// LOO accuracy of the four feature subsets.
    Ablate {
        #[arg(long)]
        features: PathBuf,
    },
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    let out = cfg.out.clone();
    match cli.command {
        Command::Synth { scenes } => {
            if let Some(n) = scenes {
                cfg.synth.scenes = n;
            }
            cfg.validate()?;
            let m = commands::synth(&cfg, &out)?;
            println!("scenes: {}", m.entries.len());
        }
        Command::Localize { manifest } => {
            let s = commands::localize(&cfg, &manifest, &out)?;
            println!(
                "images: {}  count match: {}/{}  within {} px: {}/{}",
                s.images, s.count_matches, s.images, s.radius, s.within_radius, s.ground_truth
            );
        }
        Command::Extract { rois } => {
            let s = commands::extract(&cfg, &rois, &out)?;
            println!("rows: {}  skipped: {}", s.rows, s.skipped.len());
        }
        Command::Train { features } => {
            let r = commands::train(&cfg, &features, &out)?;
            println!(
                "C={} gamma={}  cv accuracy: {:.4}  loo accuracy: {:.4}",
                r.hyperparams.c, r.hyperparams.gamma, r.validation_accuracy, r.loo_accuracy
            );
        }
        Command::Predict { model, features } => {
            let p = commands::predict(&model, &features, &out)?;
            println!("predictions: {}", p.len());
        }
        Command::Evaluate { predictions, features, manifest, rois, train_report, predicted_masks } => {
            let inputs = EvaluateInputs { predictions, features, manifest, rois, train_report, predicted_masks };
            let r = commands::evaluate(&cfg, &inputs, &out)?;
            let m = &r.metrics;
            println!(
                "n={}  accuracy {}  sensitivity {}  specificity {}  precision {}  auc {}",
                r.evaluated,
                fmt_opt(m.accuracy),
                fmt_opt(m.sensitivity),
                fmt_opt(m.specificity),
                fmt_opt(m.precision),
                fmt_opt(r.roc.as_ref().map(|c| c.auc))
            );
            if let Some(c) = &r.counts {
                println!("count MAE model {:.4}  expert {:.4}  KS {:.4}", c.model.mae, c.expert.mae, c.ks);
            }
        }
        Command::Ablate { features } => {
            let table = commands::ablate(&cfg, &features, &out)?;
            println!("{:<16} {:>8} {:>10}", "subset", "features", "accuracy");
            for row in &table {
                println!("{:<16} {:>8} {:>10.4}", row.subset, row.columns.len(), row.loo_accuracy);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(PipelineError::exit_code(&e) as u8)
        }
    }
}
