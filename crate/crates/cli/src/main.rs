use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use clusterlens_cli::gradcheck::{self, GradcheckOptions};
use clusterlens_cli::{exit_code, run_explain, run_pipeline, run_synth, run_train, PipelineConfig, RunManifest};

#[derive(Parser)]
#[command(name = "clusterlens", version, about = "Explain time-series clusterings with attention classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML pipeline configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config and CLUSTERLENS_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted-signal dataset from the config's [synth] table.
    Synth(RunArgs),
    /// Train and evaluate every configured variant.
    Train(RunArgs),
    /// Explain previously trained checkpoints.
    Explain {
        #[command(flatten)]
        run: RunArgs,
        /// Directory holding `models/` from an earlier run (defaults to the output directory).
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Full pipeline: ingest, train, evaluate, explain, plot.
    Run(RunArgs),
    /// Finite-difference check of all model variants on random instances.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 12)]
        features: usize,
        #[arg(long, value_delimiter = ',', default_value = "20,50")]
        lengths: Vec<usize>,
        /// Finite-difference step; by default chosen per variant.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(args: &RunArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    cfg.apply_env();
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn summarize(m: &RunManifest, cfg: &PipelineConfig) {
    println!("wrote {} files to {}", m.files.len() + 1, cfg.output_dir.display());
    for t in &m.timings {
        println!("  {:<28} {:>8.2}s", t.stage, t.seconds);
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let cfg = load(&a)?;
            summarize(&run_synth(&cfg)?, &cfg);
        }
        Command::Train(a) => {
            let cfg = load(&a)?;
            let m = run_train(&cfg)?;
            print!("{}", std::fs::read_to_string(cfg.output_dir.join("report.txt"))?);
            summarize(&m, &cfg);
        }
        Command::Explain { run, models } => {
            let cfg = load(&run)?;
            let dir = models.unwrap_or_else(|| cfg.output_dir.clone());
            summarize(&run_explain(&cfg, &dir)?, &cfg);
        }
        Command::Run(a) => {
            let cfg = load(&a)?;
            let m = run_pipeline(&cfg)?;
            print!("{}", std::fs::read_to_string(cfg.output_dir.join("report.txt"))?);
            summarize(&m, &cfg);
        }
        Command::Gradcheck {
            instances,
            features,
            lengths,
            eps,
            seed,
        } => {
            let opts = GradcheckOptions {
                instances,
                n_features: features,
                lengths,
                eps,
                seed,
                ..Default::default()
            };
            let mut worst = 0.0f64;
            for r in gradcheck::run_all(&opts)? {
                println!(
                    "{:<20} {} instances  step {:.0e}  max relative error {:.3e}",
                    r.variant, r.instances, r.eps, r.max_rel_err
                );
                worst = worst.max(r.max_rel_err);
            }
            if worst >= 1e-4 {
                return Err(gradcheck::GradientMismatch(worst).into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
