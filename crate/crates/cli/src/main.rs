//! `dtnwave`: batch runs of the water-wave DtN studies with reproducible,
//! hashed outputs.
//!
//! Exit status: 0 when every check passes, 1 when a study fails or errors
//! (the manifest names the failing checks), 2 for usage or configuration
//! errors, in which case nothing is written.

mod artifacts;
mod config;
mod error;
mod studies;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use artifacts::{file_entry, sha256_hex, Artifacts, Check, Inputs, Manifest, Timing, Versions};
use config::{GridFile, ProfileSpec, RunConfig};
use error::CliError;
use studies::{GreenOptions, StudyOutput};

/// Environment variable bounding the worker threads of `verify-all`.
const THREADS_VAR: &str = "DTNWAVE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dtnwave", version, about = "Water-wave DtN symbols, ray fans and Green functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

/// Flags that override values from the configuration file.
#[derive(Debug, Args)]
struct Overrides {
    /// TOML run configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    energy: Option<f64>,
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Comma-separated, decreasing.
    #[arg(long, global = true, value_delimiter = ',')]
    h_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Box half-width X.
    #[arg(long, global = true)]
    half_width: Option<f64>,
    /// Nodes per axis.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Vertical levels of the strip solver.
    #[arg(long, global = true)]
    nz: Option<usize>,
    /// Depth grid file: CSV rows `x,y,depth`, or raw float64 with `--profile-sidecar`.
    #[arg(long, global = true)]
    profile_file: Option<PathBuf>,
    /// JSON header for a raw float64 depth file.
    #[arg(long, global = true, requires = "profile_file")]
    profile_sidecar: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tables of Z, L0, Q0, V and g over depth, energy and momentum ranges.
    Dispersion,
    /// Strip-solver symbol residuals, DtN adjointness and a sample solution.
    StripVerify,
    /// Lagrangian ray fan from the source point.
    Rays,
    /// Leading-order outgoing Green function on the grid.
    Green {
        /// Compare against the exact constant-depth kernel (constant profiles only).
        #[arg(long)]
        verify: bool,
        /// Also run the limiting-absorption solves along the ε schedule.
        #[arg(long)]
        absorption: bool,
    },
    /// Weighted resolvent norm against 1/h.
    ScatterNorm,
    /// The numerical acceptance suite.
    VerifyAll {
        /// Run only these criteria (comma-separated ids 1 to 11).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Dispersion => "dispersion",
            Command::StripVerify => "strip-verify",
            Command::Rays => "rays",
            Command::Green { .. } => "green",
            Command::ScatterNorm => "scatter-norm",
            Command::VerifyAll { .. } => "verify-all",
        }
    }
}

fn effective_config(o: &Overrides) -> Result<RunConfig, CliError> {
    let mut c = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &o.output {
        c.output = v.clone();
    }
    if let Some(v) = o.energy {
        c.energy = v;
    }
    if let Some(v) = o.h {
        c.h = v;
    }
    if let Some(v) = &o.h_list {
        c.h_list = v.clone();
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.half_width {
        c.grid.half_width = v;
    }
    if let Some(v) = o.n {
        c.grid.n = v;
    }
    if let Some(v) = o.nz {
        c.strip.nz = v;
    }
    if let Some(file) = &o.profile_file {
        c.profile = ProfileSpec::File(GridFile {
            file: file.clone(),
            sidecar: o.profile_sidecar.clone(),
            d0: None,
        });
    }
    Ok(c)
}

fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_VAR) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| CliError::Config(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Everything needed to run, checked before any output is written.
struct Prepared {
    config: RunConfig,
    profile: dtnwave::DepthProfile,
    inputs: Inputs,
    criteria: Vec<u8>,
    threads: usize,
}

fn prepare(cli: &Cli) -> Result<Prepared, CliError> {
    let config = effective_config(&cli.overrides)?;
    config.validate()?;
    let profile = config.load_profile()?;
    if let Command::Green { verify: true, .. } = cli.command {
        if !profile.is_constant() {
            return Err(CliError::Config("green --verify needs a constant-depth profile".into()));
        }
    }
    let criteria = match &cli.command {
        Command::VerifyAll { only } if !only.is_empty() => {
            if let Some(bad) = only.iter().find(|id| !(1..=11).contains(*id)) {
                return Err(CliError::Config(format!("no acceptance criterion {bad}")));
            }
            only.clone()
        }
        _ => dtnwave::verify::CRITERIA.iter().map(|c| c.0).collect(),
    };
    let inputs = Inputs {
        config_sha256: sha256_hex(config.to_toml().as_bytes()),
        profile_files: config.profile_inputs()?.iter().map(|p| file_entry(p)).collect::<Result<_, _>>()?,
    };
    Ok(Prepared {
        config,
        profile,
        inputs,
        criteria,
        threads: thread_count()?,
    })
}

fn run_study(command: &Command, p: &Prepared) -> Result<StudyOutput, CliError> {
    match command {
        Command::Dispersion => studies::dispersion(&p.config),
        Command::StripVerify => studies::strip_verify(&p.config, &p.profile),
        Command::Rays => studies::rays(&p.config, &p.profile),
        Command::Green { verify, absorption } => studies::green(
            &p.config,
            &p.profile,
            &GreenOptions {
                verify: *verify,
                absorption: *absorption,
            },
        ),
        Command::ScatterNorm => studies::scatter_norm(&p.config, &p.profile),
        Command::VerifyAll { .. } => studies::verify_all(&p.criteria, p.threads),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let prepared = match prepare(&cli) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let name = cli.command.name();
    let start = Instant::now();
    let (mut artifacts, checks, mut timings, errored) = match run_study(&cli.command, &prepared) {
        Ok(out) => (out.artifacts, out.checks, out.timings, false),
        Err(e) => {
            eprintln!("error: {e}");
            (Artifacts::new(), vec![Check::new(name, false, e.to_string())], Vec::new(), true)
        }
    };
    timings.push(Timing {
        stage: "total".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    artifacts.add("config.toml", prepared.config.to_toml().into_bytes());
    for c in &checks {
        println!("{}", c.line());
    }
    let status = Manifest::status_for(&checks, errored);
    let manifest = Manifest {
        command: name.to_string(),
        status,
        versions: Versions {
            cli: env!("CARGO_PKG_VERSION"),
            library: dtnwave::VERSION,
        },
        inputs: prepared.inputs,
        seed: prepared.config.seed,
        timings,
        failing: checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect(),
        checks,
        outputs: Vec::new(),
    };
    match artifacts::write_run(&prepared.config.output, &artifacts, manifest) {
        Ok(path) => println!("{status}: manifest at {}", path.display()),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    if status == "PASS" {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
