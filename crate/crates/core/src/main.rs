use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mctangent::integrators::Scheme;
use mctangent::io::commands;
use mctangent::io::ExperimentConfig;
use mctangent::{Error, Result};

#[derive(Parser)]
#[command(name = "mctangent", version, about = "Tangent-slope surrogates for method-of-lines PDEs")]
struct Cli {
    /// Experiment configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. --set train.alpha=1e5.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the reference problem and write downsampled trajectories.
    GenData,
    /// Train a tangent network on the generated data.
    Train,
    /// Roll a checkpoint forward from an initial state.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Array file; a rank-2 file contributes its first row.
        #[arg(long)]
        initial: PathBuf,
        #[arg(long)]
        scheme: Option<String>,
        /// Step size; defaults to the training step times predict.dt_factor.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Per-step MSE between a prediction and a reference trajectory.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Lemma check, randomization terms or error-bound series.
    Diagnose {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| Error::Config { field: "threads".into(), msg: e.to_string() })?;
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides, std::env::var("MCTANGENT_OUT").ok())?;
    match cli.command {
        Command::GenData => {
            let m = commands::gen_data(&cfg)?;
            eprintln!("wrote {} train and {} test trajectories to {}", m.train_samples, m.test_samples, commands::data_dir(&cfg).display());
        }
        Command::Train => {
            let r = commands::train_cmd(&cfg)?;
            eprintln!("best epoch {} (checkpoint metric {:?})", r.best_epoch, r.best_metric);
        }
        Command::Predict { checkpoint, initial, scheme, dt, steps, output } => {
            let ck = checkpoint.unwrap_or_else(|| commands::checkpoint_dir(&cfg));
            let scheme = Scheme::parse(scheme.as_deref().unwrap_or(&cfg.predict_scheme))?;
            let dt = match dt {
                Some(dt) => dt,
                None => mctangent::io::Checkpoint::load(&ck)?.dt * cfg.predict_dt_factor,
            };
            let r = commands::predict_cmd(&ck, &initial, scheme, dt, steps.unwrap_or(cfg.predict_steps), &output)?;
            if let Some(k) = r.diverged_at {
                eprintln!("rollout diverged at step {k}");
            }
        }
        Command::Eval { pred, truth, output } => {
            commands::eval_cmd(&pred, &truth, &output)?;
        }
        Command::Diagnose { checkpoint } => {
            let ck = checkpoint.unwrap_or_else(|| commands::checkpoint_dir(&cfg));
            let out = commands::diagnose_cmd(&cfg, &ck)?;
            eprintln!("wrote {}", out.display());
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
