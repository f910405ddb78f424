use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "hopf-soliton",
    version,
    about = "Rotational Hopf solitons of mean curvature flow in S^{2n+1}"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Half the hypersurface dimension.
    #[arg(long, global = true, default_value_t = 1)]
    pub n: u32,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub abs_tol: f64,
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub rel_tol: f64,
    /// Largest arclength an integration may cover.
    #[arg(long, global = true, default_value_t = 500.0)]
    pub horizon: f64,
    /// Orientation of the ambient angle, 1 or -1.
    #[arg(long, global = true, default_value_t = 1, allow_negative_numbers = true, value_parser = parse_sign)]
    pub theta_sign: i8,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

fn parse_sign(s: &str) -> Result<i8, String> {
    match s.trim() {
        "1" | "+1" => Ok(1),
        "-1" => Ok(-1),
        other => Err(format!("expected 1 or -1, got {other}")),
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate the phase system from one point.
    Flow(FlowArgs),
    /// Build the doubled soliton through the totally geodesic slice.
    BuildSoliton(BuildArgs),
    /// Check the curvature identities on a profile or trajectory table.
    Verify(VerifyArgs),
    /// Integrate a lattice of starts forward and backward.
    PhasePortrait(PortraitArgs),
    /// Write an OBJ mesh of an n = 1 surface, stereographically projected.
    ExportMesh(MeshArgs),
    /// Print the equilibrium and its linearization.
    Linearize,
    /// Re-run a command from its manifest and compare output digests.
    Replay(ReplayArgs),
}

/// Initial point: `u,v` or `equilibrium`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartSpec {
    Point(f64, f64),
    Equilibrium,
}

impl FromStr for StartSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "equilibrium" {
            return Ok(StartSpec::Equilibrium);
        }
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 2 {
            return Err(format!("expected u,v or 'equilibrium', got {s}"));
        }
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x}: {e}"));
        Ok(StartSpec::Point(num(parts[0])?, num(parts[1])?))
    }
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("direction").required(true).args(["forward", "backward"])))]
pub struct FlowArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub start: StartSpec,
    #[arg(long)]
    pub forward: bool,
    #[arg(long)]
    pub backward: bool,
    /// Arclength at which a start on the circle hands over to the integrator.
    #[arg(long, default_value_t = 0.1)]
    pub handoff: f64,
    #[arg(long, default_value = "flow.csv")]
    pub output: String,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlueArg {
    HalfTurn,
    Reflection,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Spacing of the written profile; must divide the handoff.
    #[arg(long, default_value_t = 5e-4)]
    pub grid: f64,
    #[arg(long, value_enum, default_value_t = GlueArg::HalfTurn)]
    pub glue: GlueArg,
    /// Half-range S of the doubled profile; by default a few pseudo-periods past convergence.
    #[arg(long)]
    pub half_range: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub handoff: f64,
    /// Skip the perturbation start used to cross-check the series.
    #[arg(long)]
    pub no_cross_validate: bool,
    /// Write the constant Clifford profile instead (half-range defaults to 10).
    #[arg(long)]
    pub clifford: bool,
    #[arg(long, default_value = "profile.csv")]
    pub output: String,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateArg {
    Stated,
    Corrected,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Profile table from build-soliton, or trajectory table from flow.
    pub table: PathBuf,
    /// Which form of the identities decides the exit code.
    #[arg(long, value_enum, default_value_t = GateArg::Stated)]
    pub gate: GateArg,
    /// Spacing used when a trajectory table is re-integrated.
    #[arg(long, default_value_t = 5e-4)]
    pub grid: f64,
    /// Also write every residual to residuals.csv.
    #[arg(long)]
    pub residuals: bool,
    #[arg(long, default_value = "report.txt")]
    pub report: String,
}

/// `NUxNV` lattice size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lattice(pub usize, pub usize);

impl FromStr for Lattice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once('x')
            .ok_or_else(|| format!("expected NUxNV, got {s}"))?;
        let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x}: {e}"));
        Ok(Lattice(num(a)?, num(b)?))
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directions {
    Both,
    Forward,
    Backward,
}

#[derive(Args, Debug)]
pub struct PortraitArgs {
    #[arg(long, default_value = "5x5")]
    pub lattice: Lattice,
    /// Additional seeded random interior starts.
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    #[arg(long, value_enum, default_value_t = Directions::Both)]
    pub directions: Directions,
}

/// Four comma-separated coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec4(pub [f64; 4]);

impl FromStr for Vec4 {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
        match v {
            Ok(v) if v.len() == 4 => Ok(Vec4([v[0], v[1], v[2], v[3]])),
            _ => Err(format!("expected four comma-separated numbers, got {s}")),
        }
    }
}

#[derive(Args, Debug)]
pub struct MeshArgs {
    pub table: PathBuf,
    /// Samples of the fiber circle.
    #[arg(long, default_value_t = 64)]
    pub alpha_resolution: usize,
    #[arg(long, default_value_t = 10)]
    pub s_stride: usize,
    #[arg(long, default_value = "0,0,0,1", allow_hyphen_values = true)]
    pub pole: Vec4,
    #[arg(long, default_value_t = 1e-3)]
    pub min_pole_distance: f64,
    #[arg(long, default_value = "mesh.obj")]
    pub output: String,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}
