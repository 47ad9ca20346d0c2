use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use faccs::dynamics::Method;
use faccs::tracking::Route;

#[derive(Debug, Parser)]
#[command(name = "faccs", version, about = "Trackability analysis and oscillatory tracking for mechanical control systems on Lie groups")]
pub struct Cli {
    /// Worker threads for cone sampling and frequency sweeps.
    #[arg(long, global = true, env = "FACCS_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide trackability from the symmetric-product closure.
    Analyze(AnalyzeArgs),
    /// Integrate the Kirchhoff equations under given controls.
    Simulate(SimulateArgs),
    /// Synthesize oscillatory controls for a reference curve and simulate them.
    Track(TrackArgs),
    /// Check the built-in structure constants and symmetric products exactly.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Spec file, or a bundled spec name.
    pub spec: String,
    #[arg(long, default_value_t = 3)]
    pub lmax: usize,
    /// Also run the cone analysis.
    #[arg(long)]
    pub cones: bool,
    /// Cone samples per level (default 8 n^2).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Write the JSON report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Rk4,
    LieEuler,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rk4 => Method::Rk4Reproject,
            MethodArg::LieEuler => Method::LieEuler,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    pub spec: String,
    /// Final time.
    #[arg(long = "t", default_value_t = 10.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Constant controls `u1,u2,...` or a CSV file with columns t,u1,...
    #[arg(long)]
    pub u: Option<String>,
    /// Initial body velocity `w1,w2,w3,v1,v2,v3`.
    #[arg(long, allow_hyphen_values = true)]
    pub v0: Option<String>,
    #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
    pub method: MethodArg,
    /// Trajectory CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Direct,
    TwoStage,
}

impl From<RouteArg> for Route {
    fn from(r: RouteArg) -> Self {
        match r {
            RouteArg::Direct => Route::Direct,
            RouteArg::TwoStage => Route::TwoStage,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrackArgs {
    pub spec: String,
    /// Built-in curve (circle, line, helix, slew, exp) with optional
    /// `:key=value,...` parameters, or a curve file.
    #[arg(long)]
    pub curve: String,
    /// Tracking tolerance; without it every completed run succeeds.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Base oscillation frequency in rad/s.
    #[arg(long, default_value_t = 25.0)]
    pub omega: f64,
    /// Number of runs, doubling the frequency each time.
    #[arg(long, default_value_t = 1)]
    pub sweep: usize,
    /// Ratio of mechanical to kinematic frequency.
    #[arg(long, default_value_t = 10.0)]
    pub mech_factor: f64,
    /// Integration steps per period of the fastest oscillation.
    #[arg(long, default_value_t = 20)]
    pub steps_per_period: usize,
    #[arg(long, default_value_t = 3)]
    pub lmax: usize,
    #[arg(long, value_enum)]
    pub route: Option<RouteArg>,
    #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
    pub method: MethodArg,
    /// Directory for per-run CSVs and summary.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    /// Check the algebra of this spec instead of the built-in se(3) table.
    #[arg(long)]
    pub spec: Option<String>,
}
