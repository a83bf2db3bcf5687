use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use samlab::sam::NormOrder;
use samlab_cli::commands::{cmd_attack, cmd_interp_curve, cmd_shift_trial, cmd_spectrum, cmd_train};
use samlab_cli::config::ExperimentConfig;
use samlab_cli::{CliError, Overrides};

#[derive(Parser, Debug)]
#[command(name = "samlab", version, about = "Sharpness-aware training experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the model-initialization and shuffle seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent trials and per-sample gradients.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Validate the config and exit without running anything.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model; writes per-epoch metrics and a checkpoint.
    Train,
    /// Adversarial weight-corruption attack on a trained model.
    Attack {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// `2` or `inf`.
        #[arg(long)]
        norm: Option<String>,
        /// Corruption radius; repeat for a ladder.
        #[arg(long = "radius")]
        radii: Vec<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Top eigenvalues of the empirical Fisher matrix.
    Spectrum {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Parameter displacement against mix fraction, with a line fit.
    ShiftTrial {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train, test and shifted-train losses along the line between two minima.
    InterpCurve {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn load_config(global: &Global) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    Overrides { seed: global.seed, out: global.out.clone() }.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = load_config(&cli.global)?;
    if let Some(n) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| samlab::Error::Argument(format!("--jobs: {e}")))?;
    }
    if cli.global.dry_run {
        println!("config ok (digest {})", cfg.digest());
        return Ok(());
    }
    let f32 = cfg.model.precision == "f32";
    macro_rules! dispatch {
        ($f:ident $(, $arg:expr)*) => {
            if f32 { $f::<f32>(&cfg $(, $arg)*) } else { $f::<f64>(&cfg $(, $arg)*) }
        };
    }
    let written = match cli.command {
        Command::Train => dispatch!(cmd_train)?,
        Command::Attack { checkpoint, norm, radii, steps } => {
            let norm = norm.map(|n| n.parse::<NormOrder>()).transpose()?;
            let radii = (!radii.is_empty()).then_some(radii);
            dispatch!(cmd_attack, checkpoint.as_deref(), norm, radii.clone(), steps)?
        }
        Command::Spectrum { checkpoint, k, samples } => dispatch!(cmd_spectrum, checkpoint.as_deref(), k, samples)?,
        Command::ShiftTrial { checkpoint } => dispatch!(cmd_shift_trial, checkpoint.as_deref())?,
        Command::InterpCurve { checkpoint } => dispatch!(cmd_interp_curve, checkpoint.as_deref())?,
    };
    for path in written {
        println!("wrote {}", path.display());
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
