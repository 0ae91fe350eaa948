use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use dmfa::arch::ArchSpec;
use dmfa::data::TRAJECTORY_POINTS;
use dmfa::optim::{Convergence, FitConfig, StepRule};
use dmfa::selection::{DEFAULT_DEEPER_K, PRUNE_THRESHOLD};
use dmfa::variational::{PriorHyperparams, PriorSettings};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "dmfa",
    version,
    about = "Bayesian deep mixtures of factor analyzers for high-dimensional clustering"
)]
pub struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic clustering scenario.
    Simulate(SimulateArgs),
    /// Fit one architecture and write a checkpoint and an ELBO trace.
    Fit(FitArgs),
    /// Score every admissible architecture with a short run, pick the best
    /// and refit it.
    Select(SelectArgs),
    /// Assign each row of a dataset to a first-layer cluster.
    Cluster(ClusterArgs),
    /// Compare predicted and true labels.
    Evaluate(EvaluateArgs),
    /// Fit an overfitted mixture, drop low-weight components and refit.
    PruneRefit(PruneRefitArgs),
    /// Prepare raw inputs for fitting.
    #[command(subcommand)]
    Preprocess(PreprocessCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioName {
    S1,
    S2,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("source").required(true).args(["scenario", "spec"])))]
pub struct SimulateArgs {
    /// Built-in scenario.
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioName>,
    /// Scenario spec JSON file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of rows (default 1000, or the spec's value).
    #[arg(long)]
    pub n: Option<usize>,
    /// Generator seed (default 0, or the spec's value).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Numeric CSV with one observation per row.
    #[arg(long)]
    pub data: PathBuf,
    /// The data file has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Column holding true labels, by header name or zero-based index. It is
    /// excluded from the features.
    #[arg(long)]
    pub label_column: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct PriorArgs {
    /// Scale G of the prior on component means.
    #[arg(long = "prior-g", value_name = "G", value_parser = positive)]
    pub g: Option<f64>,
    /// Horseshoe global scale ν for every layer.
    #[arg(long = "prior-nu", value_name = "NU", value_parser = positive)]
    pub nu: Option<f64>,
    /// Half-Cauchy scale A of the noise standard deviations.
    #[arg(long = "prior-a", value_name = "A", value_parser = positive)]
    pub a: Option<f64>,
    /// Dirichlet concentration ρ of the mixing weights.
    #[arg(long = "prior-rho", value_name = "RHO", value_parser = positive)]
    pub rho: Option<f64>,
    /// Global scale for one layer as LAYER=NU with 1-based layers, e.g.
    /// `1=1e5` to relax shrinkage in the first layer. Repeatable.
    #[arg(long = "layer-nu", value_name = "LAYER=NU", value_parser = layer_nu)]
    pub layer_nu: Vec<(usize, f64)>,
}

impl PriorArgs {
    pub fn settings(&self, default_rho: f64) -> PriorSettings {
        PriorSettings {
            cauchy_scale: self.g.unwrap_or(PriorHyperparams::DEFAULT_CAUCHY_SCALE),
            global_shrinkage: self
                .nu
                .unwrap_or(PriorHyperparams::DEFAULT_GLOBAL_SHRINKAGE),
            global_shrinkage_overrides: self.layer_nu.clone(),
            noise_scale: self.a.unwrap_or(PriorHyperparams::DEFAULT_NOISE_SCALE),
            concentration: self.rho.unwrap_or(default_rho),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct OptimArgs {
    /// Iterations of the optimizer.
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    /// Minibatch size as a fraction of n, before clamping.
    #[arg(long, default_value_t = 0.05)]
    pub batch_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub batch_min: usize,
    #[arg(long, default_value_t = 1024)]
    pub batch_max: usize,
    /// Record the ELBO every this many iterations.
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Stop early once the relative ELBO change over this many records is
    /// below --tol.
    #[arg(long, requires = "tol")]
    pub converge_window: Option<usize>,
    #[arg(long, requires = "converge_window")]
    pub tol: Option<f64>,
    /// Use the step schedule a0 (1 + t/tau)^(-0.75), given as A0,TAU,
    /// instead of the adaptive step.
    #[arg(long, value_name = "A0,TAU", value_parser = pair)]
    pub robbins_monro: Option<(f64, f64)>,
    /// Averaging window of the adaptive step.
    #[arg(long, default_value_t = 32.0)]
    pub adaptive_window: f64,
    /// Write elapsed seconds into traces and reports. Reruns then differ.
    #[arg(long)]
    pub wall_clock: bool,
}

impl OptimArgs {
    pub fn config(&self, seed: u64) -> FitConfig {
        FitConfig {
            batch_fraction: self.batch_fraction,
            batch_min: self.batch_min,
            batch_max: self.batch_max,
            max_iterations: self.iters,
            seed,
            elbo_record_stride: self.record_every,
            convergence: self
                .converge_window
                .zip(self.tol)
                .map(|(window, tolerance)| Convergence { window, tolerance }),
            step_rule: match self.robbins_monro {
                Some((a0, tau)) => StepRule::RobbinsMonro { a0, tau },
                None => StepRule::Adaptive {
                    window: self.adaptive_window,
                },
            },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Architecture as K=k1,k2,...;D=d1,d2,... (the observed dimension comes
    /// from the data).
    #[arg(long, value_parser = arch_spec)]
    pub arch: ArchSpec,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Depths to enumerate.
    #[arg(long, value_delimiter = ',', default_value = "2,3")]
    pub layers: Vec<usize>,
    /// First-layer component counts to try. Without it a single overfitted
    /// count floor(sqrt(n)) is used and ρ defaults to the overfitted value.
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    /// Component counts to try in every deeper layer.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DEEPER_K)]
    pub deeper_k: Vec<usize>,
    /// Only score; skip the final fit of the chosen architecture.
    #[arg(long)]
    pub no_refit: bool,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    /// Checkpoint written by fit, select or prune-refit.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    /// Predicted labels; the last column of each row is read.
    #[arg(long)]
    pub pred: PathBuf,
    /// True labels, in the same layout.
    #[arg(long)]
    pub truth: PathBuf,
    /// Also write metrics.csv here. The table always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(group(ArgGroup::new("start").required(true).args(["arch", "dims", "checkpoint"])))]
pub struct PruneRefitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Overfitted architecture to fit first.
    #[arg(long, value_parser = arch_spec)]
    pub arch: Option<ArchSpec>,
    /// Latent dimensions only; the first layer gets floor(sqrt(n))
    /// components and deeper layers one each.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Start from an already fitted overfitted model.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Components whose mean weight is below this are removed.
    #[arg(long, default_value_t = PRUNE_THRESHOLD)]
    pub threshold: f64,
    /// Dirichlet concentration for the refit of the reduced model.
    #[arg(long, default_value_t = PriorHyperparams::KNOWN_K_CONCENTRATION, value_parser = positive)]
    pub refit_rho: f64,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum PreprocessCommand {
    /// Scale every row to mean 0 and sample variance 1.
    Standardize(StandardizeArgs),
    /// Resample trajectories (one JSON array of [x, y] pairs per line) to a
    /// fixed number of points and flatten them into rows.
    Trajectories(TrajectoryArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct StandardizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Points per resampled trajectory.
    #[arg(long, default_value_t = TRAJECTORY_POINTS)]
    pub points: usize,
    /// Reverse trajectories so that each starts at the end nearer this
    /// point, given as X,Y.
    #[arg(long, value_name = "X,Y", value_parser = pair)]
    pub center: Option<(f64, f64)>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn layer_nu(s: &str) -> Result<(usize, f64), String> {
    let (layer, nu) = s
        .split_once('=')
        .ok_or_else(|| format!("expected LAYER=NU, got {s:?}"))?;
    let layer = layer
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&l| l >= 1)
        .ok_or_else(|| format!("layer must be a positive integer, got {layer:?}"))?;
    Ok((layer, positive(nu.trim())?))
}

fn pair(s: &str) -> Result<(f64, f64), String> {
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("expected two numbers separated by a comma, got {s:?}"))
    };
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two numbers separated by a comma, got {s:?}"))?;
    Ok((parse(a)?, parse(b)?))
}

fn arch_spec(s: &str) -> Result<ArchSpec, String> {
    s.parse::<ArchSpec>().map_err(|e| e.to_string())
}
