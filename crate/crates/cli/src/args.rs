use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "dynpr", version, about = "PageRank with time-dependent teleportation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// Static PageRank for a fixed teleportation vector.
    Static(StaticArgs),
    /// Integrate the dynamic system and write the trajectory.
    Evolve(EvolveArgs),
    /// Cumulative, variance, difference, and transient ranks of a trajectory.
    Ranks(RanksArgs),
    /// Intersection similarity profile of two score files.
    Isim(IsimArgs),
    /// Analytic periodic steady state under cosine teleportation vs integration.
    Oscillate(OscillateArgs),
    /// Base vs score-augmented one-step-ahead activity prediction.
    Predict(PredictArgs),
    /// Seeded synthetic graphs and activity.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Re-execute the command recorded in a manifest.
    #[serde(skip)]
    Rerun(RerunArgs),
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct Output {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Run single-threaded.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct StaticArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0.85)]
    pub alpha: f64,
    /// Teleport to the mean of the normalized activity columns (default: uniform).
    #[arg(long)]
    pub activity: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Euler,
    Rk45,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Uniform,
    Teleport0,
    Staticpr,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// Activity column j is used on [j s, (j+1) s).
    Piecewise,
    /// Cosine blend of the columns with phases 2 pi j / k.
    Oscillatory,
}

/// Output grid: a fixed step or the epoch boundaries `j s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    Step(f64),
    Epochs,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "epochs" {
            return Ok(Grid::Epochs);
        }
        match s.parse::<f64>() {
            Ok(h) if h > 0.0 && h.is_finite() => Ok(Grid::Step(h)),
            _ => Err(format!("grid must be a positive step or \"epochs\", got {s:?}")),
        }
    }
}

/// Smoothing rate in a sweep; `raw` means no smoothing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Theta(pub Option<f64>);

impl FromStr for Theta {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "raw" {
            return Ok(Theta(None));
        }
        s.parse::<f64>()
            .map(|t| Theta(Some(t)))
            .map_err(|_| format!("theta must be a number or \"raw\", got {s:?}"))
    }
}

pub fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("window must be \"lo,hi\", got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("invalid window start {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("invalid window end {hi:?}"))?;
    Ok((lo, hi))
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct EvolveArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Activity CSV (node,epoch,count). Without it and without --k, v is uniform.
    #[arg(long)]
    pub activity: Option<PathBuf>,
    /// Oscillatory schedule over k node classes (node i belongs to class i mod k).
    #[arg(long, conflicts_with = "activity")]
    pub k: Option<usize>,
    /// Default: piecewise for --activity, oscillatory for --k.
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleKind>,
    #[arg(long, default_value_t = 0.85)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub timescale: f64,
    /// Exponential smoothing rate of v(t).
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodKind::Rk45)]
    pub method: MethodKind,
    /// Euler step size.
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub atol: f64,
    /// End time (default: k s for activity schedules, 20 for --k, 50 otherwise).
    #[arg(long)]
    pub tmax: Option<f64>,
    /// Output grid: a step such as 0.1, or "epochs" (default: epochs for activity, 0.1 otherwise).
    #[arg(long)]
    pub grid: Option<Grid>,
    #[arg(long, value_enum, default_value_t = InitialKind::Teleport0)]
    pub initial: InitialKind,
    /// Disable the sum-preserving correction term.
    #[arg(long)]
    pub no_correction: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct RanksArgs {
    /// Trajectory CSV written by `evolve`.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Difference-rank window "lo,hi" (default: last 80% of the time span).
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(f64, f64)>,
    /// Also report the transient rank at this time.
    #[arg(long)]
    pub at: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct IsimArgs {
    /// Score CSV (node,score).
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub topk: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct OscillateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0.85)]
    pub alpha: f64,
    /// Columns e over k node classes (node i in class i mod k).
    #[arg(long, required_unless_present = "activity", conflicts_with = "activity")]
    pub k: Option<usize>,
    /// Explicit columns: the normalized activity epochs.
    #[arg(long)]
    pub activity: Option<PathBuf>,
    #[arg(long, default_value_t = 20.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 0.05)]
    pub grid: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-11)]
    pub atol: f64,
    #[arg(long, value_enum, default_value_t = InitialKind::Staticpr)]
    pub initial: InitialKind,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub activity: PathBuf,
    #[arg(long, default_value_t = 0.85)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub timescale: f64,
    /// Comma-separated smoothing sweep; "raw" means no smoothing.
    #[arg(long, value_delimiter = ',', default_value = "raw")]
    pub theta: Vec<Theta>,
    /// Lag window w.
    #[arg(long, default_value_t = 3)]
    pub lags: usize,
    /// Cohort size m (top and bottom nodes by difference rank).
    #[arg(long, default_value_t = 100)]
    pub cohort: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub atol: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SynthCommand {
    /// Uniform random directed graph (graph.txt).
    Graph(SynthGraphArgs),
    /// Heavy-tailed random activity (activity.csv).
    Activity(SynthActivityArgs),
    /// Graph plus activity driven by the dynamic state (graph.txt, activity.csv).
    Diffusion(SynthDiffusionArgs),
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SynthGraphArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub edges: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SynthActivityArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub epochs: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SynthDiffusionArgs {
    #[arg(long)]
    pub nodes: usize,
    #[arg(long)]
    pub edges: usize,
    #[arg(long)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.85)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub timescale: f64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Clone, Debug, Default)]
pub struct RerunArgs {
    pub manifest: PathBuf,
    /// Write into this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
