use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  input error: unreadable or invalid config, data or arguments
  3  numerical failure: the computation diverged or produced no finite result";

#[derive(Parser, Debug)]
#[command(name = "drivefit", version, about = "Drive dynamics simulation, identification and energy analysis")]
#[command(after_help = EXIT_CODES)]
pub struct Cli {
    /// Seed for every random draw (step excitation, measurement noise, optimizer)
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for population evaluation; 0 uses all cores
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Output file. JSON-producing commands print to stdout when omitted
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write an excitation trajectory CSV (positions equal targets)
    #[command(after_help = EXIT_CODES)]
    GenExcite(GenExciteArgs),
    /// Replay a target trajectory through a model and write the rollout CSV
    #[command(after_help = EXIT_CODES)]
    Simulate(SimulateArgs),
    /// Identify per-joint parameters and the command delay with CMA-ES
    #[command(after_help = EXIT_CODES)]
    Fit(FitArgs),
    /// Compare a model rollout with recorded data
    #[command(after_help = EXIT_CODES)]
    Evaluate(EvaluateArgs),
    /// Frequency response of one joint as CSV (f_hz,mag_db,phase_deg)
    #[command(after_help = EXIT_CODES)]
    Bode(BodeArgs),
    /// Per-sample electrical and mechanical power of a trajectory with torques
    #[command(after_help = EXIT_CODES)]
    EnergyReport(EnergyReportArgs),
    /// Cost of transport and its split from three battery trials
    #[command(after_help = EXIT_CODES)]
    Cot(CotArgs),
    /// Inertia estimates
    #[command(after_help = EXIT_CODES)]
    Inertia(InertiaArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExciteKind {
    Chirp,
    Steps,
}

#[derive(Args, Debug)]
pub struct GenExciteArgs {
    /// Signal family; reads the matching table of the spec file
    #[arg(long, value_enum)]
    pub kind: ExciteKind,
    /// Excitation config with a [chirp] or [steps] table
    #[arg(long)]
    pub spec: PathBuf,
    /// Robot model config; sets the joint count
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Trajectory CSV whose target columns drive the rollout
    #[arg(long)]
    pub targets: PathBuf,
    /// Standard deviation of Gaussian noise added to simulated positions, rad
    #[arg(long, default_value_t = 0.0)]
    pub position_noise: f64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Base model: gains, motors and limits are kept, identified fields are replaced
    #[arg(long)]
    pub model: PathBuf,
    /// Recorded trajectory CSVs; the loss is their mean
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    /// Search box config; built-in defaults when omitted
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    /// Optimizer config; built-in defaults when omitted
    #[arg(long)]
    pub fit: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Recorded trajectory CSV
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Args, Debug)]
pub struct BodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Joint index
    #[arg(long, default_value_t = 0)]
    pub joint: usize,
    /// First grid frequency, Hz
    #[arg(long, default_value_t = 0.1)]
    pub f_start: f64,
    /// Last grid frequency, Hz
    #[arg(long, default_value_t = 100.0)]
    pub f_end: f64,
    /// Number of log-spaced grid points
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Chirp recording; switches from the model response to the measured one
    #[arg(long, requires = "excitation")]
    pub data: Option<PathBuf>,
    /// Excitation config of the chirp that produced --data
    #[arg(long, requires = "data")]
    pub excitation: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EnergyReportArgs {
    /// Robot model config with a [motors] table
    #[arg(long)]
    pub model: PathBuf,
    /// Trajectory CSV with torque columns
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Args, Debug)]
pub struct CotArgs {
    /// Locomotion trial config
    #[arg(long)]
    pub track: PathBuf,
    /// Standing trial with drives on
    #[arg(long)]
    pub rest: PathBuf,
    /// Standing trial with drives off
    #[arg(long)]
    pub off: PathBuf,
}

#[derive(Args, Debug)]
pub struct InertiaArgs {
    #[command(subcommand)]
    pub kind: InertiaKind,
}

#[derive(Subcommand, Debug)]
pub enum InertiaKind {
    /// Link inertia from a compound pendulum swing test
    #[command(after_help = EXIT_CODES)]
    Pendulum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Effective base inertia for vertical motion at each configured knee angle
    #[command(after_help = EXIT_CODES)]
    Vertical {
        #[arg(long)]
        config: PathBuf,
    },
    /// Effective base inertia for horizontal motion at each configured hip angle
    #[command(after_help = EXIT_CODES)]
    Horizontal {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sum of component inertias reflected through their gear ratios
    #[command(after_help = EXIT_CODES)]
    Reduce {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<drivefit::Error> for CliError {
    fn from(e: drivefit::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("input error: --jobs: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| commands::run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drivefit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
