mod commands;
mod config;
mod emit;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "fbar-lab", version, about = "Rotations, roofs, special flows, towers and f-bar names on T^3")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; every estimator derives its own stream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for reports; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Bits for fixed-point rotation arithmetic.
    #[arg(long, global = true)]
    pub precision_bits: Option<u32>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Continued fractions and exact rotation.
    #[command(subcommand)]
    Rot(RotCmd),
    /// Trigonometric polynomials and plateau constructions.
    #[command(subcommand)]
    Poly(PolyCmd),
    /// Roof functions.
    #[command(subcommand)]
    Roof(RoofCmd),
    /// Special flow and its normalized time-one map.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Names and f-bar distances.
    #[command(subcommand)]
    Sym(SymCmd),
    /// Rokhlin towers and schedules.
    #[command(subcommand)]
    Tower(TowerCmd),
    /// Mixing diagnostics.
    #[command(subcommand)]
    Diag(DiagCmd),
}

#[derive(Clone, Copy, Debug, ValueEnum, Default, PartialEq, Eq)]
pub enum Emit {
    #[default]
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum RotCmd {
    /// Convergents, limits and distances to the integers.
    Build,
    /// Growth inequalities between consecutive return times.
    CheckGrowth {
        #[arg(long, value_enum, default_value_t = GrowthArg::Surrogate)]
        mode: GrowthArg,
        #[arg(long, default_value_t = 2.0)]
        g: f64,
        /// Defaults to every level with a known successor.
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Exact orbit of a point under the rotation.
    Orbit {
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 16)]
        steps: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GrowthArg {
    Paper,
    Surrogate,
}

#[derive(Subcommand, Debug)]
pub enum PolyCmd {
    /// Build the plateau polynomial at index n and report its margins.
    Plateau {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        mu: f64,
        /// auto, index-squared or factor:<s>.
        #[arg(long, default_value = "auto")]
        kernel: String,
        /// widened, literal or custom:<w>.
        #[arg(long, default_value = "widened")]
        width: String,
        /// Write the profile on this many points as CSV instead of the report.
        #[arg(long)]
        curve: Option<usize>,
    },
    /// Smallest admissible 1/eta for a return time q.
    Eta {
        #[arg(long)]
        q: u64,
    },
    /// Transfer function of a zero-average polynomial and its residual.
    SolveCohomological {
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value_t = 1000)]
        points: usize,
        #[arg(long, default_value_t = fbar_lab::trigpoly::DEFAULT_RESONANCE_FLOOR)]
        floor: f64,
    },
    /// Birkhoff sums against the telescoped transfer function.
    Birkhoff {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        m: u64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = fbar_lab::trigpoly::DEFAULT_RESONANCE_FLOOR)]
        floor: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum RoofCmd {
    /// Serialize a roof with optional plateau substitutions.
    Build {
        #[arg(long)]
        depth: Option<usize>,
        /// Plateau substitutions `n:mu`, comma separated.
        #[arg(long, value_delimiter = ',')]
        substitute: Vec<String>,
    },
    /// Margins of every plateau term in the roof.
    VerifyPlateau {
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        substitute: Vec<String>,
    },
    /// Values on a grid as CSV.
    Grid {
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        substitute: Vec<String>,
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum FlowCmd {
    /// Iterates of the normalized map.
    Orbit {
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 16)]
        steps: u64,
        #[arg(long, value_enum, default_value_t = Emit::Json)]
        emit: Emit,
    },
    /// Invariant measure of a box and of its preimage.
    Measure {
        #[arg(long = "box")]
        region: String,
        #[arg(long)]
        samples: Option<String>,
        #[arg(long, default_value_t = 1)]
        k: i64,
    },
    /// Sup distance between the unit-roof map and the translation.
    ConstantCheck {
        #[arg(long, default_value_t = 10_000)]
        points: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SystemArgs {
    /// Use the translation by this vector with Lebesgue measure instead of
    /// the configured flow.
    #[arg(long)]
    pub translation: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum SymCmd {
    /// Name of a point as a single CSV line.
    Name {
        #[arg(long)]
        point: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        level: u32,
        #[command(flatten)]
        system: SystemArgs,
    },
    /// f-bar and Hamming distances between two name files.
    Fbar {
        #[arg(long)]
        file_a: PathBuf,
        #[arg(long)]
        file_b: PathBuf,
    },
    /// Monte Carlo certificate for property P.
    PropertyP {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        centers: usize,
        #[arg(long)]
        samples: Option<String>,
        #[arg(long, default_value_t = 1)]
        level: u32,
        #[command(flatten)]
        system: SystemArgs,
    },
}

#[derive(Args, Debug, Clone)]
pub struct TowerArgs {
    /// JSON file `{"base": "x0,x1,y0,y1,z0,z1", "height": h}`.
    #[arg(long)]
    pub tower: Option<PathBuf>,
    #[arg(long)]
    pub base: Option<String>,
    #[arg(long)]
    pub height: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum TowerCmd {
    /// Search for returns to the base below the height.
    Verify {
        #[command(flatten)]
        tower: TowerArgs,
        #[arg(long)]
        samples: Option<String>,
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Precision of a tower.
    Precision {
        #[command(flatten)]
        tower: TowerArgs,
        #[arg(long)]
        samples: Option<String>,
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Level colouring against the dyadic partition.
    Mono {
        #[command(flatten)]
        tower: TowerArgs,
        #[arg(long, default_value_t = 1)]
        level: u32,
        #[arg(long)]
        samples: Option<String>,
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Product of two towers with coprime heights.
    Product {
        #[arg(long)]
        plus: String,
        #[arg(long)]
        plus_height: u64,
        #[arg(long)]
        minus: String,
        #[arg(long)]
        minus_height: u64,
        #[arg(long, default_value_t = 0.9)]
        c: f64,
        #[arg(long)]
        samples: Option<String>,
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Towers over the plateau term at index m.
    PaperBuild {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        samples: Option<String>,
        #[arg(long, default_value_t = 64)]
        max_l: u64,
    },
    /// Run the alpha/delta recursion for a size law.
    Schedule {
        #[arg(long)]
        law: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Single)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = Emit::Csv)]
        emit: Emit,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Single,
    Product,
}

#[derive(Subcommand, Debug)]
pub enum DiagCmd {
    /// Correlation decay between two boxes.
    Correlation {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, value_delimiter = ',')]
        lags: Vec<u64>,
        /// Accepts forms such as 1e6.
        #[arg(long)]
        samples: Option<String>,
        #[arg(long, value_enum, default_value_t = Emit::Json)]
        emit: Emit,
        #[command(flatten)]
        system: SystemArgs,
    },
    /// Derivative lower bounds for Birkhoff sums of the roof.
    Criterion {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        m: Vec<u64>,
        #[arg(long, default_value_t = 512)]
        grid: usize,
        #[arg(long)]
        r_x: Option<f64>,
        #[arg(long)]
        r_y: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
