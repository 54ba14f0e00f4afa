use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lagloop_core::potentials::{DEFAULT_KMAX, DEFAULT_RADIUS};
use lagloop_core::verification::{ALGEBRAIC_TOL, GEOMETRIC_TOL};

#[derive(Debug, Parser)]
#[command(name = "lagloop", version, about = "Minimal Lagrangian Delaunay and perturbed cylinders in CP2")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Number of sample points on the unit λ-circle (power of two).
    #[arg(long, global = true, default_value_t = 256)]
    pub lambda_grid: usize,
    /// Largest λ-degree a perturbation coefficient may carry.
    #[arg(long, global = true, default_value_t = 32)]
    pub trunc_d: usize,
    /// Highest z-order kept in the series for P.
    #[arg(long, global = true, default_value_t = DEFAULT_KMAX)]
    pub kmax: usize,
    /// Direction of the branch cut of ln z, in radians.
    #[arg(long, global = true, default_value_t = PI, allow_hyphen_values = true)]
    pub cut_angle: f64,
    /// Tolerance of the frame and monodromy checks.
    #[arg(long, global = true, default_value_t = ALGEBRAIC_TOL)]
    pub tol_alg: f64,
    /// Tolerance of the finite-difference geometric checks.
    #[arg(long, global = true, default_value_t = GEOMETRIC_TOL)]
    pub tol_geo: f64,
    /// Exit with status 5 when any verification check fails.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyse Delaunay data: β, ψ, spectrum at λ = 1, flatness, star and period verdicts.
    Delaunay(DelaunayArgs),
    /// Run the full pipeline on a perturbed potential and write mesh plus report.
    Perturb(PerturbArgs),
    /// Tabulate spectrum, star flag and period along a segment of b values.
    Sweep(SweepArgs),
    /// Run the pipeline and write only the verification report.
    Verify(VerifyArgs),
    /// Run the pipeline and write one mesh file.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, Args)]
pub struct SpecArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a_im: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b_re: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b_im: f64,
}

/// Log-spaced annulus sampled in the cut plane.
#[derive(Debug, Clone, Copy, Args)]
pub struct MeshArgs {
    #[arg(long, default_value_t = 0.1)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 16)]
    pub n_radial: usize,
    #[arg(long, default_value_t = 16)]
    pub n_angular: usize,
}

#[derive(Debug, Clone, Args)]
pub struct PotentialArgs {
    /// Potential JSON file.
    #[arg(long)]
    pub potential: PathBuf,
    /// Radius of the disk on which the perturbation converges.
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    pub radius: f64,
}

#[derive(Debug, Args)]
pub struct DelaunayArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Also sample the surface and write surface.csv and surface.obj.
    #[arg(long)]
    pub mesh: bool,
    #[command(flatten)]
    pub grid: MeshArgs,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[command(flatten)]
    pub grid: MeshArgs,
    /// Compare perturbed and Delaunay frames near the puncture and append the fit.
    #[arg(long)]
    pub verify_asymptotics: bool,
    /// Radii used by --verify-asymptotics.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001,0.0001")]
    pub asymptotic_radii: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a_im: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b_re_from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b_re_to: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b_im_from: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b_im_to: f64,
    /// Number of equally spaced b values, endpoints included; 0 gives an empty table.
    #[arg(long)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[command(flatten)]
    pub grid: MeshArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Obj,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChartArg {
    Affine,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub potential: PotentialArgs,
    #[command(flatten)]
    pub grid: MeshArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, value_enum, default_value_t = ChartArg::Affine)]
    pub chart: ChartArg,
}
