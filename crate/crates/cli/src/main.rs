mod cmd;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use carnot_gdms::{Error, ErrorClass};

#[derive(Parser, Debug)]
#[command(name = "cgdms", version, about = "Dimension estimates for conformal GDMS on step-2 Carnot groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// System preset: cf, cantor, moran, gdms, geometric, power.
    #[arg(long, global = true, default_value = "moran")]
    pub system: String,
    /// JSON system file for the moran and gdms presets.
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Group for presets that do not carry one, e.g. heis_c:1.
    #[arg(long, global = true, default_value = "heis_c:1")]
    pub group: String,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Truncation radius of the continued fraction alphabet.
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    /// Shell count (Cantor shells, generator shells, truncation of ratio
    /// generators).
    #[arg(long, global = true)]
    pub shells: Option<usize>,
    /// Leading ratio of the geometric and power generators.
    #[arg(long, global = true)]
    pub ratio: Option<f64>,
    /// Exponent of the geometric and power generators.
    #[arg(long, global = true)]
    pub exponent: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Cap on enumerated words, lattice points or samples.
    #[arg(long, global = true, env = "CGDMS_BUDGET", default_value_t = 200_000_000)]
    pub budget: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Sup-norm strategy: bracketed or sampled.
    #[arg(long, global = true, default_value = "bracketed")]
    pub sup_mode: String,
    /// Distortion constant; estimated from samples when absent.
    #[arg(long, global = true)]
    pub khat: Option<f64>,
    /// Sample points per edge in containment checks.
    #[arg(long, global = true, default_value_t = 1000)]
    pub validation_points: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pressure bounds at one t or on a grid a:b:step.
    Pressure {
        #[arg(long, conflicts_with = "t_grid")]
        t: Option<f64>,
        #[arg(long)]
        t_grid: Option<String>,
        /// Longest word length used.
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Bracket on the Bowen parameter.
    Dim {
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Theta-number estimate from an edge generator.
    Theta {
        /// Generator shells used in the regression.
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Conformal measure on cylinders and its Gibbs ratios.
    Measure {
        /// Parameter t; the Bowen parameter when absent.
        #[arg(long)]
        t: Option<f64>,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Limit set point cloud.
    Limitset {
        #[arg(long, default_value_t = 6)]
        depth: usize,
        /// Random words instead of all admissible words.
        #[arg(long)]
        chaos: Option<usize>,
        /// Also write an ASCII PLY file.
        #[arg(long)]
        ply: Option<PathBuf>,
    },
    /// Euclidean dimension range compatible with gauge dimension h.
    CompareDim {
        #[arg(long)]
        h: f64,
    },
    /// Dimension of a Bernoulli or Markov measure.
    MeasureDim {
        /// JSON file: {"bernoulli": [...]} or {"markov": [[...], ...]}.
        #[arg(long, conflicts_with = "bernoulli")]
        mu: Option<PathBuf>,
        /// Comma separated probabilities.
        #[arg(long)]
        bernoulli: Option<String>,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Greedy finite subsystem of a generator with dimension near a target.
    Subsystem {
        #[arg(long)]
        target: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_edges: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Validation => 2,
        ErrorClass::Budget => 3,
        ErrorClass::Numeric => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", serde_json::json!({"error": "validation", "message": e.to_string()}));
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    let res = cmd::run(&cli);
    eprintln!(
        "{}",
        serde_json::json!({"wallclock_s": start.elapsed().as_secs_f64()})
    );
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = match e.class() {
                ErrorClass::Validation => "validation",
                ErrorClass::Budget => "budget",
                ErrorClass::Numeric => "numeric",
            };
            eprintln!("{}", serde_json::json!({"error": class, "message": e.to_string()}));
            ExitCode::from(exit_code(&e))
        }
    }
}
