use std::path::PathBuf;

use carnot_tsp::MetricKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Geometry of Carnot groups from the command line.
///
/// Every JSON report carries the tool version, a SHA-256 hash of the resolved
/// command configuration and a SHA-256 hash of the group file.
///
/// `carleson --csv` writes the columns
/// `level,center_index,radius,beta,beta_lower,contribution`
/// with floats printed to 17 significant digits, after `#` comment lines
/// holding the same metadata.
#[derive(Parser, Debug)]
#[command(name = "carnot-tsp", version, about)]
pub struct Cli {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (default: available cores).
    #[arg(long, global = true, env = "CARNOT_TSP_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate a group file: shape, antisymmetry, Jacobi, grading, stratification.
    GroupCheck(GroupCheckArgs),
    /// Homogeneous norm of a point.
    Norm(NormArgs),
    /// Distance `||q^{-1} p||` between two points.
    Dist(DistArgs),
    /// Certify subadditivity of the HS norm for the group's eta on random pairs.
    CertifyEta(CertifyArgs),
    /// Beta number of a curve in a ball.
    Beta(BetaArgs),
    /// Greedy separated nets of a curve.
    Nets(NetsArgs),
    /// Dyadic cubes of a curve's samples, with the axioms verified.
    Cubes(CubesArgs),
    /// Extreme ratios mu(B(x, r)) / r over samples and scales.
    Regularity(RegularityArgs),
    /// Multiresolution Carleson sum of beta numbers.
    Carleson(CarlesonArgs),
    /// Curvature inequality ratios over random admissible quadruples.
    CurvatureScan(CurvatureArgs),
    /// Empirical constants of the curvature argument.
    Constants(ConstantsArgs),
    /// Operator norms of truncated singular integrals on a curve.
    SioNorm(SioNormArgs),
    /// The kernel at one point.
    Kernel(KernelArgs),
    /// One annular piece T_(j)1(x) with the truncation sandwich.
    Tj(TjArgs),
    /// Every acceptance metric in one report.
    CorpusRun(CorpusArgs),
    /// Write a generated curve file.
    CurveGen(CurveGenArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct GroupArg {
    /// Built-in name (heisenberg, engel, h2, abelian3) or path to a group file.
    #[arg(long)]
    pub group: Option<String>,
    /// hs or linf.
    #[arg(long, default_value = "hs")]
    pub metric: MetricKind,
}

#[derive(Args, Debug, Serialize)]
pub struct CurveArg {
    #[command(flatten)]
    pub group: GroupArg,
    /// Curve file `{"group": …, "points": [[…], …], "closed": bool}`.
    #[arg(long)]
    pub curve: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct GroupCheckArgs {
    /// Group name or file.
    pub file: Option<String>,
    #[arg(long)]
    pub group: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct NormArgs {
    #[command(flatten)]
    pub group: GroupArg,
    /// Comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
}

#[derive(Args, Debug, Serialize)]
pub struct DistArgs {
    #[command(flatten)]
    pub group: GroupArg,
    #[arg(long, allow_hyphen_values = true)]
    pub p: String,
    #[arg(long, allow_hyphen_values = true)]
    pub q: String,
}

#[derive(Args, Debug, Serialize)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub group: GroupArg,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long = "box", default_value_t = 10.0)]
    pub box_radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct BetaArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    #[arg(long, allow_hyphen_values = true)]
    pub center: String,
    #[arg(long)]
    pub radius: f64,
    /// Use the brute-force grid search instead of the direct search.
    #[arg(long)]
    pub oracle_grid: bool,
    /// Grid resolution for --oracle-grid.
    #[arg(long, default_value_t = 8)]
    pub grid_res: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct NetsArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    #[arg(long, allow_hyphen_values = true)]
    pub nmin: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub nmax: Option<i32>,
}

#[derive(Args, Debug, Serialize)]
pub struct CubesArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    #[arg(long, allow_hyphen_values = true)]
    pub jmin: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub jmax: Option<i32>,
}

#[derive(Args, Debug, Serialize)]
pub struct RegularityArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    /// Comma-separated radii (default: dyadic from the diameter down to the resolution).
    #[arg(long)]
    pub scales: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct CarlesonArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    /// auto, 2r2 or a positive number.
    #[arg(long, default_value = "auto")]
    pub exponent: String,
    #[arg(long, allow_hyphen_values = true)]
    pub nmin: Option<i32>,
    #[arg(long, allow_hyphen_values = true)]
    pub nmax: Option<i32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sum over the curve as given rather than rescaled to diameter 1.
    #[arg(long)]
    pub no_normalize: bool,
    /// Per-ball CSV rows instead of JSON.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct CurvatureArgs {
    #[command(flatten)]
    pub group: GroupArg,
    #[arg(long, default_value_t = 0.1)]
    pub m: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// auto, 2r2 or a positive number; comma-separated for several.
    #[arg(long, default_value = "auto")]
    pub exponent: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct ConstantsArgs {
    #[command(flatten)]
    pub group: GroupArg,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 2_000)]
    pub goal_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct SioNormArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    /// Comma-separated truncation radii.
    #[arg(long, default_value = "0.125,0.0625,0.03125,0.015625,0.0078125,0.00390625,0.001953125")]
    pub eps_list: String,
    /// Override the group's eta.
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct KernelArgs {
    #[command(flatten)]
    pub group: GroupArg,
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
}

#[derive(Args, Debug, Serialize)]
pub struct TjArgs {
    #[command(flatten)]
    pub curve: CurveArg,
    #[arg(long, allow_hyphen_values = true)]
    pub j: i32,
    #[arg(long)]
    pub x_index: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct CorpusArgs {
    /// Directory of curve files, or `default` for the built-in corpus.
    #[arg(long, default_value = "default")]
    pub corpus: String,
    /// Small sample counts; thresholds unchanged.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct CurveGenArgs {
    #[command(flatten)]
    pub group: GroupArg,
    /// Curve spec as JSON text or a path to a JSON file, e.g.
    /// `{"kind": "lifted-planar", "shape": "circle", "samples": 1025}`.
    #[arg(long)]
    pub spec: String,
}
