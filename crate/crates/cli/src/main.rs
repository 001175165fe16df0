use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use waveformer_core::model::{Example, ModelKind};
use waveformer_pde::burgers::BoundaryCondition;
use waveformer_pde::Scale;

use waveformer_cli::commands::{self, CompareArgs, EvaluateArgs, GenerateArgs, PredictArgs, TrainArgs};
use waveformer_cli::{selftest, CliError};

#[derive(Parser)]
#[command(name = "waveformer", version, about = "Wavelet-transformer neural operator for time-dependent PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a PDE family and write a dataset file.
    Generate {
        #[arg(long)]
        pde: Example,
        /// Trajectory count; defaults to the preset's.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "desk")]
        preset: Scale,
        #[arg(long)]
        out: PathBuf,
        /// Burgers boundary condition: dirichlet or periodic.
        #[arg(long)]
        bc: Option<BoundaryCondition>,
        /// Stored points per spatial axis (spectrally resampled).
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Train a model on a dataset file and write a checkpoint.
    Train {
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Roll a checkpoint forward from the first frames of each trajectory.
    Predict {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-step relative MSE of predictions against the true trajectories.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// First rollout step counted as extrapolated.
        #[arg(long)]
        boundary: usize,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Tabulate several evaluate CSVs and name the best model per region.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        csv: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate {
            pde,
            samples,
            seed,
            preset,
            out,
            bc,
            grid,
        } => commands::generate(&GenerateArgs {
            pde,
            samples,
            seed,
            scale: preset,
            out,
            bc,
            grid,
        }),
        Command::Train { model, data, config, out } => commands::train_cmd(&TrainArgs { model, data, config, out }),
        Command::Predict {
            model_file,
            data,
            steps,
            out,
        } => commands::predict(&PredictArgs {
            model_file,
            data,
            steps,
            out,
        }),
        Command::Evaluate { pred, truth, boundary, csv } => commands::evaluate_cmd(&EvaluateArgs { pred, truth, boundary, csv }),
        Command::Compare { csv, out } => commands::compare(&CompareArgs { csv, out }),
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            match checks.iter().filter(|c| !c.passed).count() {
                0 => Ok(()),
                n => Err(CliError::numeric(format!("{n} self-test check(s) failed"))),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
