use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netcbc::config::{PlantConfig, VariantName};
use netcbc::motor::Discretization;
use netcbc::pipeline::{self, LoopMode};
use netcbc::report::{format_guarantee, write_text, CertificateFile, GainSource};
use netcbc::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "netcbc", version, about = "Barrier-certificate safety bounds for control loops over lossy networks")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Seed for both the gain search and the Monte Carlo run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fluctuation-weight convention of the drift operator.
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantName>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Motor sampling time in seconds.
    #[arg(long, global = true)]
    ts: Option<f64>,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON run configuration; the motor case study when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize gain and certificate, simulate, write all artifacts.
    Certify {
        #[command(flatten)]
        config: ConfigArg,
        /// Number of simulated trajectories.
        #[arg(long)]
        trajectories: Option<usize>,
    },
    /// Check a supplied certificate matrix and gain.
    Verify {
        #[command(flatten)]
        config: ConfigArg,
        /// Certificate JSON as written by `certify`.
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Bound arithmetic: guarantee 1 − (η + c·T)/β.
    Bound {
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long = "T", visible_alias = "horizon")]
        horizon: usize,
    },
    /// Monte Carlo simulation with a given gain.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Certificate JSON or `{"gain": [[..]]}`; required for closed-loop mode.
        #[arg(long)]
        gain: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "closed-loop")]
        mode: LoopMode,
        #[arg(long)]
        trajectories: Option<usize>,
    },
    /// Print the motor plant matrices.
    Motor {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_enum)]
        discretization: Option<Discretization>,
    },
    /// Verify the published certificate matrix and gain at the configured plant.
    ExportPaperCandidate {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Write the default configuration.
    DefaultConfig,
}

fn load_config(arg: &ConfigArg, global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &arg.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.synthesis.seed = seed;
        cfg.simulation.seed = seed;
    }
    if let Some(v) = global.variant {
        cfg.synthesis.variant = v;
    }
    if let Some(out) = &global.out {
        cfg.output.dir = out.clone();
    }
    if let Some(ts) = global.ts {
        match &mut cfg.plant {
            PlantConfig::Motor(p) => p.ts = ts,
            PlantConfig::Explicit(_) => {
                return Err(CliError::Config("--ts only applies to the motor plant".into()))
            }
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let global = &cli.global;
    match cli.command {
        Command::Certify { config, trajectories } => {
            let mut cfg = load_config(&config, global)?;
            if let Some(n) = trajectories {
                cfg.simulation.trajectories = n;
            }
            let outcome = pipeline::certify(&cfg)?;
            print!("{}", outcome.summary);
            println!("artifacts written to {}", cfg.output.dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { config, certificate } => {
            let cfg = load_config(&config, global)?;
            let cert = CertificateFile::load(&certificate)?;
            let verdict = pipeline::verify(&cfg, &cert.p_matrix()?, &cert.gain_matrix()?)?;
            print!("{}", pipeline::verdict_summary(&verdict));
            let json = serde_json::to_string_pretty(&verdict).expect("verdict serializes") + "\n";
            write_text(&cfg.output.dir.join("verdict.json"), &json)?;
            Ok(if verdict.valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Bound { eta, c, beta, horizon } => {
            let bound = netcbc_core::epsilon_from_levels(eta, c, beta, horizon)?;
            println!("epsilon = {}", bound.epsilon);
            println!("{}", format_guarantee(bound.guarantee()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            config,
            gain,
            mode,
            trajectories,
        } => {
            let mut cfg = load_config(&config, global)?;
            if let Some(n) = trajectories {
                cfg.simulation.trajectories = n;
            }
            let (gain, epsilon) = match &gain {
                Some(path) => {
                    let (g, e) = GainSource::load(path)?;
                    (Some(g), e)
                }
                None => (None, None),
            };
            let outcome = pipeline::simulate(&cfg, gain.as_ref(), epsilon, mode)?;
            print!("{}", outcome.summary);
            Ok(ExitCode::SUCCESS)
        }
        Command::Motor { config, discretization } => {
            let mut cfg = load_config(&config, global)?;
            let PlantConfig::Motor(params) = &mut cfg.plant else {
                return Err(CliError::Config("configuration does not describe the motor".into()));
            };
            if let Some(d) = discretization {
                params.discretization = d;
            }
            let sys = cfg.plant.build()?;
            let echo = pipeline::plant_echo(&cfg, &sys);
            println!("{}", serde_json::to_string_pretty(&echo).expect("plant serializes"));
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportPaperCandidate { config } => {
            let cfg = load_config(&config, global)?;
            let candidate = pipeline::export_published_candidate(&cfg)?;
            print!("{}", pipeline::verdict_summary(&candidate.verdict));
            println!("drift operator radius at the published gain: {:.6}", candidate.rho);
            let json = serde_json::to_string_pretty(&candidate).expect("candidate serializes") + "\n";
            let path = cfg.output.dir.join("published_candidate.json");
            write_text(&path, &json)?;
            println!("verdict written to {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::DefaultConfig => {
            let cfg = load_config(&ConfigArg { config: None }, global)?;
            println!("{}", cfg.to_json());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
