mod cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use helitrack_core::config::ExperimentConfig;
use helitrack_core::control::Architecture;
use helitrack_core::plant::Fidelity;
use helitrack_core::Error;

/// Certified tracking-error bounds for helicopter trajectory tracking.
#[derive(Parser)]
#[command(name = "helitrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Experiment configuration (JSON). Defaults reproduce the loiter experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Wind gust seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "all")]
    arch: ArchArg,
    #[arg(long, global = true, value_enum)]
    fidelity: Option<FidelityArg>,
    /// Certify the horizontal subsystem only.
    #[arg(long, global = true)]
    planar: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the RPI set of each architecture.
    Synth,
    /// Run the closed-loop simulation of each architecture.
    Simulate,
    /// Check traces against the certified sets and the monitored assumptions.
    Verify {
        /// Trace CSV (single architecture only).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Ellipsoid or SDP result JSON (single architecture only).
        #[arg(long)]
        ellipsoid: Option<PathBuf>,
    },
    /// Render figures from the artifacts in the output directory.
    Plot,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Cg,
    Cgh,
    Ch,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum FidelityArg {
    A,
    B,
}

pub struct Context {
    pub config: ExperimentConfig,
    pub archs: Vec<Architecture>,
    pub out: PathBuf,
}

fn context(c: &Common) -> Result<Context, Error> {
    let mut config = match &c.config {
        Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        config.wind.seed = s;
    }
    if let Some(f) = c.fidelity {
        config.sim.fidelity = match f {
            FidelityArg::A => Fidelity::A,
            FidelityArg::B => Fidelity::B,
        };
    }
    if c.planar {
        config.bounds.planar = true;
    }
    if let Some(o) = &c.out {
        config.outputs.directory = o.display().to_string();
    }
    for w in config.validate()? {
        eprintln!("warning: {w}");
    }
    let only = match c.arch {
        ArchArg::Cg => Some(Architecture::Cg),
        ArchArg::Cgh => Some(Architecture::Cgh),
        ArchArg::Ch => Some(Architecture::Ch),
        ArchArg::All => None,
    };
    let archs = config.selected(only)?.iter().map(|c| c.architecture).collect();
    let out = PathBuf::from(&config.outputs.directory);
    Ok(Context { config, archs, out })
}

/// Exit code for an error that aborted a command.
fn error_code(e: &Error) -> u8 {
    match e {
        Error::NoRpiFound { .. } | Error::NotHurwitz { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = context(&cli.common).and_then(|ctx| match &cli.command {
        Command::Synth => cmd::synth(&ctx),
        Command::Simulate => cmd::simulate(&ctx),
        Command::Verify { trace, ellipsoid } => cmd::verify(&ctx, trace.as_deref(), ellipsoid.as_deref()),
        Command::Plot => cmd::plot(&ctx),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
