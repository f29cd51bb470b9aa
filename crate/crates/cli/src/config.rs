//! Flag structs and the optional TOML file that supplies their defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use crate::CliError;

/// Copies every field that the command line left unset from `file`.
macro_rules! merge_fields {
    ($dst:expr, $src:expr; $($field:ident),+ $(,)?) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field.take(); } )+
    };
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub solve: SolveArgs,
    pub simulate: SimulateArgs,
    pub condense_bench: BenchArgs,
    pub vb_check: VbCheckArgs,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Numerical knobs shared by the solver and the filter.
#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericArgs {
    /// Components kept per alpha function.
    #[arg(long)]
    pub alpha_budget: Option<usize>,
    /// Components kept per filtered belief.
    #[arg(long)]
    pub filter_budget: Option<usize>,
    /// Clusters used by condensation.
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Clustering metric: euclidean, symkl, jsd, wasserstein2 or bhattacharyya.
    #[arg(long)]
    pub metric: Option<String>,
    /// Convergence tolerance of the variational EM loop.
    #[arg(long)]
    pub vb_tol: Option<f64>,
    #[arg(long)]
    pub vb_max_iter: Option<usize>,
}

impl NumericArgs {
    fn merge(&mut self, mut f: NumericArgs) {
        merge_fields!(self, f; alpha_budget, filter_budget, clusters, metric, vb_tol, vb_max_iter);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveArgs {
    /// Built-in scenario name or path to a scenario JSON file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Planner model JSON replacing the scenario's planner.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Solve the scenario's likelihood-mixture planner instead.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub gm: Option<bool>,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Number of training beliefs.
    #[arg(long)]
    pub beliefs: Option<usize>,
    /// Maximum rollout length when generating training beliefs.
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File name of the policy inside the output directory.
    #[arg(long)]
    pub policy_name: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub numeric: NumericArgs,
}

impl SolveArgs {
    pub fn merge(&mut self, mut f: SolveArgs) {
        merge_fields!(self, f; scenario, model, gm, rounds, beliefs, depth, seed, out, policy_name);
        self.numeric.merge(f.numeric);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Built-in scenario name or path to a scenario JSON file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Policy solved on the scenario's softmax planner.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Policy solved on the scenario's likelihood-mixture planner.
    #[arg(long)]
    pub gm_policy: Option<PathBuf>,
    /// Comma-separated baselines: greedy, perfect.
    #[arg(long, value_delimiter = ',')]
    pub baselines: Option<Vec<String>>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Overrides the scenario's episode length.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write per-step trajectories.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub trajectories: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    pub numeric: NumericArgs,
}

impl SimulateArgs {
    pub fn merge(&mut self, mut f: SimulateArgs) {
        merge_fields!(self, f; scenario, policy, gm_policy, baselines, episodes, steps, seed, out, trajectories);
        self.numeric.merge(f.numeric);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchArgs {
    /// Comma-separated clustering metrics (default: all).
    #[arg(long, value_delimiter = ',')]
    pub metrics: Option<Vec<String>>,
    /// Comma-separated state dimensions.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Random inputs per dimension.
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub input_size: Option<usize>,
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl BenchArgs {
    pub fn merge(&mut self, mut f: BenchArgs) {
        merge_fields!(self, f; metrics, dims, runs, input_size, target, clusters, seed, out);
    }
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VbCheckArgs {
    #[arg(long)]
    pub cases: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub vb_tol: Option<f64>,
    #[arg(long)]
    pub vb_max_iter: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl VbCheckArgs {
    pub fn merge(&mut self, mut f: VbCheckArgs) {
        merge_fields!(self, f; cases, seed, vb_tol, vb_max_iter, out);
    }
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Built-in scenario name.
    #[arg(long)]
    pub name: String,
    /// Destination file.
    #[arg(long)]
    pub out: PathBuf,
}
