use clap::{Args, Parser, Subcommand};
use prodform_cli::config::{self, Experiment, ExperimentConfig};
use prodform_cli::output::Manifest;
use prodform_cli::CliError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Default parent directory for runs when `--out` is not given.
const OUT_ENV: &str = "PRODFORM_OUT_DIR";

#[derive(Parser)]
#[command(name = "prodform", version, about = "Product-form Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Run directory [default: $PRODFORM_OUT_DIR/<experiment>, else runs/<experiment>]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace an existing run directory.
    #[arg(long)]
    force: bool,
    /// Record wall-clock time in the manifest (outputs stay reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Standard vs product-form estimates of a product of Gaussians.
    ToyGaussian {
        #[command(flatten)]
        params: config::ToyGaussian,
        #[command(flatten)]
        common: Common,
    },
    /// Two-dimensional tail indicator.
    Tail {
        #[command(flatten)]
        params: config::Tail,
        #[command(flatten)]
        common: Common,
    },
    /// Variance ratios and cost frontier for i.i.d. products.
    Scaling {
        #[command(flatten)]
        params: config::Scaling,
        #[command(flatten)]
        common: Common,
    },
    /// Truncated Taylor expansion of exp(x_1 ... x_K).
    Taylor {
        #[command(flatten)]
        params: config::Taylor,
        #[command(flatten)]
        common: Common,
    },
    /// Theta-marginal of the hierarchical Gaussian model by eight methods.
    Hierarchical {
        #[command(flatten)]
        params: config::Hierarchical,
        #[command(flatten)]
        common: Common,
    },
    /// Stratified estimators on a mixture of products.
    Mixture {
        #[command(flatten)]
        params: config::Mixture,
        #[command(flatten)]
        common: Common,
    },
    /// Run a JSON configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Re-run the configuration recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

fn from_flags(experiment: Experiment, c: Common) -> (ExperimentConfig, Option<PathBuf>, bool) {
    let cfg = ExperimentConfig { experiment, seed: c.seed, deterministic: !c.timings, out_dir: None };
    (cfg, c.out, c.force)
}

fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn out_dir(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    if let Some(p) = flag {
        return p;
    }
    if let Some(p) = &cfg.out_dir {
        return PathBuf::from(p);
    }
    let parent = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    parent.join(cfg.experiment.name())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let setup = match cli.command {
        Command::ToyGaussian { params, common } => Ok(from_flags(Experiment::ToyGaussian(params), common)),
        Command::Tail { params, common } => Ok(from_flags(Experiment::Tail(params), common)),
        Command::Scaling { params, common } => Ok(from_flags(Experiment::Scaling(params), common)),
        Command::Taylor { params, common } => Ok(from_flags(Experiment::Taylor(params), common)),
        Command::Hierarchical { params, common } => Ok(from_flags(Experiment::Hierarchical(params), common)),
        Command::Mixture { params, common } => Ok(from_flags(Experiment::Mixture(params), common)),
        Command::Run { config, out, force } => load_config(&config).map(|c| (c, out, force)),
        Command::Replay { manifest, out, force } => Manifest::load(&manifest).map(|m| (m.config, out, force)),
    };
    let result = setup.and_then(|(cfg, out, force)| {
        let dir = out_dir(&cfg, out);
        prodform_cli::run(&cfg, &dir, force).map(|_| dir)
    });
    match result {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("prodform: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
