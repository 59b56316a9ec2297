use std::path::PathBuf;
use std::process::ExitCode;

use avae_cli::commands::{cmd_affinity, cmd_eval, cmd_gen, cmd_interp, cmd_sweep, cmd_train, InterpArgs, InterpMode, SweepAxis};
use avae_cli::config::RunConfig;
use avae_cli::CliError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "avae", version, about = "Affinity-VAE experiments on synthetic glyphs and tetracubes")]
struct Cli {
    /// Run configuration file; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `[run] out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace non-empty output directories.
    #[arg(long, global = true)]
    force: bool,
    /// Parallel runs for `sweep`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dataset into `<out>/data`.
    Gen,
    /// Build the class affinity matrix.
    Affinity,
    /// Train a model into `<out>/train`.
    Train,
    /// Evaluate a checkpoint into `<out>/eval`.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate once per value of one hyperparameter.
    Sweep {
        #[arg(long, value_enum)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Decode latent traversals, corner blends or pose sweeps.
    Interp {
        #[arg(long, value_enum)]
        mode: InterpMode,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        classes: Vec<String>,
        /// Images per traversal row, or lattice size for corners.
        #[arg(long, default_value_t = 7)]
        steps: usize,
        /// Traversal half-width in prior standard deviations.
        #[arg(long, default_value_t = 3.0)]
        span: f64,
        /// Pose values for pose mode.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// gen, affinity (when gamma > 0), train and eval in sequence.
    Run,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.run.out = o.clone();
    }
    let force = cli.force;
    match cli.command {
        Command::Gen => {
            let r = cmd_gen(&cfg, force)?;
            println!("wrote {} samples to {}", r.get("files").unwrap_or("0"), cfg.run.out.join("data").display());
        }
        Command::Affinity => {
            let (m, path) = cmd_affinity(&cfg)?;
            print!("{}", m.to_text());
            println!("wrote {}", path.display());
        }
        Command::Train => print!("{}", cmd_train(&cfg, force)?.to_text()),
        Command::Eval { checkpoint } => print!("{}", cmd_eval(&cfg, checkpoint.as_deref(), force)?.to_text()),
        Command::Sweep { axis, values } => {
            let path = cmd_sweep(&cfg, axis, &values, cli.jobs, force)?;
            print!("{}", std::fs::read_to_string(&path)?);
            println!("wrote {}", path.display());
        }
        Command::Interp { mode, checkpoint, classes, steps, span, values } => {
            let args = InterpArgs { mode, classes, steps, span, values };
            let (dir, tiles) = cmd_interp(&cfg, checkpoint.as_deref(), &args, force)?;
            println!("wrote {tiles} tiles and a montage to {}", dir.display());
        }
        Command::Run => {
            cmd_gen(&cfg, force)?;
            if cfg.model.gamma > 0.0 {
                cmd_affinity(&cfg)?;
            }
            cmd_train(&cfg, force)?;
            print!("{}", cmd_eval(&cfg, None, force)?.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("avae: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
