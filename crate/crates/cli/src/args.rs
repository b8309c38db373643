use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "cml", version, about = "Numerical experiments on bilinear cone multipliers")]
pub struct Cli {
    /// `key = value` file; `[command]` sections apply to one command. Flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Deviation of the truncated dyadic partition from 1.
    PartitionCheck(PartitionArgs),
    /// Reconstruction error of the subordination identity on an (R, m) grid.
    SteinWeiss(SteinWeissArgs),
    /// Apply a bilinear piece to two field files.
    Apply(ApplyArgs),
    /// Largest observed norm ratio of each dyadic piece, with a decay fit.
    NormSweep(NormSweepArgs),
    /// Pointwise domination of a linear family by a maximal function.
    Domination(DominationArgs),
    /// L^p growth of a directional square function across family sizes.
    Sqfn(SqfnArgs),
    /// Lattice membership of a region family.
    Regions(RegionsArgs),
    /// Maximal function of a field file.
    Maximal(MaximalArgs),
    /// Weighted inequality for a rectangle lattice square sum.
    WeightedLattice(WeightedArgs),
    /// Draw a test function and save it as a field file.
    Generate(GenerateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::PartitionCheck(_) => "partition-check",
            Command::SteinWeiss(_) => "stein-weiss",
            Command::Apply(_) => "apply",
            Command::NormSweep(_) => "norm-sweep",
            Command::Domination(_) => "domination",
            Command::Sqfn(_) => "sqfn",
            Command::Regions(_) => "regions",
            Command::Maximal(_) => "maximal",
            Command::WeightedLattice(_) => "weighted-lattice",
            Command::Generate(_) => "generate",
        }
    }
}

#[derive(Args, Debug, Clone, Copy)]
pub struct GridArgs {
    /// Samples per axis (power of two).
    #[arg(long)]
    pub n: Option<usize>,
    /// Period of the torus.
    #[arg(long)]
    pub period: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PartitionArgs {
    /// Number of dyadic levels.
    #[arg(long = "J", default_value_t = 20)]
    pub levels: u32,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Right end of the sampled interval; defaults to 1 - 2^-J.
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SteinWeissArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub mu: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: f64,
    /// Points per axis of the (R, m) grid.
    #[arg(long = "grid-rm", default_value_t = 20)]
    pub grid_rm: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecKind {
    /// One dyadic piece at level `--j`.
    Dyadic,
    /// The sum of the pieces up to level `--j`.
    Full,
}

#[derive(Args, Debug)]
pub struct ApplyArgs {
    #[arg(long, value_enum, default_value_t = SpecKind::Dyadic)]
    pub spec: SpecKind,
    #[arg(long, default_value_t = 2)]
    pub j: u32,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub f: PathBuf,
    #[arg(long)]
    pub g: PathBuf,
    /// Sub-cells per product-rule cell at the coarse level.
    #[arg(long = "quad-panels", default_value_t = 1)]
    pub quad_panels: usize,
    #[arg(long, default_value_t = 4)]
    pub nodes: usize,
    /// Output field file.
    #[arg(long)]
    pub out: PathBuf,
    /// Report CSV; stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also evaluate the exact lattice sum (n <= 64).
    #[arg(long)]
    pub direct: bool,
    /// Field file for the exact lattice sum; defaults to `<out>.direct`.
    #[arg(long)]
    pub direct_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct NormSweepArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p1: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p2: f64,
    #[arg(long, default_value_t = 2)]
    pub jmin: u32,
    #[arg(long, default_value_t = 5)]
    pub jmax: u32,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub nodes: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    T,
    B,
}

#[derive(Args, Debug)]
pub struct DominationArgs {
    #[arg(long, value_enum)]
    pub op: OpKind,
    #[arg(long, default_value_t = 0.5)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.75)]
    pub mu: f64,
    /// Level of the B family.
    #[arg(long, default_value_t = 2)]
    pub j: u32,
    /// Comma-separated t values; defaults depend on the operator.
    #[arg(long = "t-grid", value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// Number of test functions.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Trapezoid,
    Sector,
}

#[derive(Args, Debug)]
pub struct SqfnArgs {
    #[arg(long, value_enum)]
    pub family: FamilyKind,
    /// Comma-separated family sizes (l for trapezoids, N for sectors).
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<u32>,
    #[arg(long, default_value_t = 4.0)]
    pub p: f64,
    /// Sector aperture.
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_8)]
    pub alpha: f64,
    /// Mixed test functions.
    #[arg(long, default_value_t = 6)]
    pub functions: usize,
    /// Random-sign functions spread over the finest family.
    #[arg(long, default_value_t = 4)]
    pub spread: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RegionsArgs {
    #[arg(long, value_enum)]
    pub mode: FamilyKind,
    #[arg(long, default_value_t = 2)]
    pub ell: u32,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub alpha: f64,
    #[arg(long = "N", default_value_t = 8)]
    pub count: u32,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaximalKind {
    Strong,
    Directional,
    Kakeya,
    Sector,
}

#[derive(Args, Debug)]
pub struct MaximalArgs {
    #[arg(long, value_enum)]
    pub kind: MaximalKind,
    #[arg(long)]
    pub f: PathBuf,
    /// Slope of the directional variant.
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// Eccentricity range of the Kakeya variant.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 8.0)]
    pub b: f64,
    #[arg(long, default_value_t = 16)]
    pub directions: usize,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub alpha: f64,
    #[arg(long = "N", default_value_t = 8)]
    pub count: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WeightedArgs {
    /// Comma-separated exponents s > 1.
    #[arg(long, value_delimiter = ',', default_value = "1.1,1.5")]
    pub s: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rectangle sides in wavenumbers.
    #[arg(long, value_delimiter = ',', default_value = "4,4")]
    pub rect: Vec<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Band,
    Cone,
    Strip,
    Sector,
    ConeEdge,
    Axis,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = TargetKind::Band)]
    pub target: TargetKind,
    /// Level for the cone-edge and axis targets.
    #[arg(long, default_value_t = 2)]
    pub j: u32,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
}
