use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use patchwood::{Aggregation, BuildConfig, Criterion, ForestConfig, Sampling, SplitterKind, Task};
use serde::Serialize;

use crate::Usage;

#[derive(Debug, Parser)]
#[command(name = "patchwood", version, about = "Randomized tree ensembles and MDI importances")]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, env = "PATCHWOOD_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Where to write the run manifest. Defaults to `<output>.manifest.json`
    /// when the command writes to a file; stdout-only runs write none.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic learning set as CSV.
    GenData(GenDataArgs),
    /// Fit a forest on a CSV file.
    Train(TrainArgs),
    /// Predict rows of a CSV file with a saved forest or tree.
    Predict(PredictArgs),
    /// Variable importances from a model or a discrete joint distribution.
    Importance(ImportanceArgs),
    /// Monte-Carlo bias-variance decomposition on a synthetic problem.
    Biasvar(BiasvarArgs),
    /// Mean leaf depth of totally randomized trees on n distinct points.
    DepthExp(DepthExpArgs),
    /// Measured versus predicted bias of plug-in mutual information.
    MiBias(MiBiasArgs),
    /// Fit time, depth and error along one scaling axis.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Led,
    Friedman1,
    LinearGaussian,
}

#[derive(Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long, value_enum)]
    pub kind: GeneratorKind,
    /// Rows; for `led`, 10 gives the ten digits exactly once.
    #[arg(long)]
    pub n: usize,
    /// Total inputs for friedman1, noise inputs for linear-gaussian.
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ForestArgs {
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// none | bootstrap | pasting | subspace | patch
    #[arg(long, default_value = "none")]
    pub sampling: String,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_f: f64,
    /// average | soft-vote | majority; soft-vote for classes, average otherwise.
    #[arg(long)]
    pub aggregation: Option<Aggregation>,
    /// gini | entropy | mse; gini for classes, mse otherwise.
    #[arg(long)]
    pub criterion: Option<Criterion>,
    /// best | random-k | ets | pert | trt-multiway
    #[arg(long, default_value = "best")]
    pub splitter: SplitterKind,
    /// Features drawn per node (K).
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,
    #[arg(long, default_value_t = 0.0)]
    pub min_weighted_decrease: f64,
    #[arg(long)]
    pub max_leaf_nodes: Option<usize>,
}

impl ForestArgs {
    pub fn resolve(&self, task: Task, seed: u64) -> anyhow::Result<ForestConfig> {
        if self.trees == 0 {
            return Err(Usage("--trees must be at least 1".into()).into());
        }
        let sampling = Sampling::from_token(&self.sampling, self.alpha_s, self.alpha_f).map_err(|e| Usage(e.to_string()))?;
        let classes = task.is_classification();
        Ok(ForestConfig {
            n_trees: self.trees,
            sampling,
            base: BuildConfig {
                criterion: self.criterion.unwrap_or(if classes { Criterion::Gini } else { Criterion::Mse }),
                splitter: self.splitter,
                max_features: self.max_features,
                min_samples_split: self.min_samples_split,
                max_depth: self.max_depth,
                min_samples_leaf: self.min_samples_leaf,
                min_weighted_decrease: self.min_weighted_decrease,
                max_leaf_nodes: self.max_leaf_nodes,
                seed,
                ..BuildConfig::default()
            },
            aggregation: self.aggregation.unwrap_or(if classes { Aggregation::SoftVote } else { Aggregation::Average }),
            seed,
            n_threads: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskArg {
    Auto,
    Classification,
    Regression,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Columns to treat as categorical (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Columns to treat as ordered even if they look categorical.
    #[arg(long, value_delimiter = ',')]
    pub ordered: Vec<String>,
    #[arg(long)]
    pub weight: Option<String>,
    #[arg(long, value_enum, default_value = "auto")]
    pub task: TaskArg,
    /// Model file, conventionally `.pwforest`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub forest: ForestArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct PredictArgs {
    /// A `.pwforest` or `.pwtree` file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Mdi,
    Permutation,
    AnalyticTrt,
    AnalyticPruned,
    AnalyticSubspace,
}

#[derive(Debug, Args, Serialize)]
pub struct ImportanceArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    /// Saved forest, for mdi and permutation.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CSV data: held-out rows for permutation, or a fully categorical
    /// learning set whose empirical joint feeds the analytic methods.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column of `--data` for the analytic methods.
    #[arg(long)]
    pub target: Option<String>,
    /// `led` for the bundled seven-segment distribution, or a JSON joint file.
    #[arg(long)]
    pub joint: Option<String>,
    /// Depth limit q for analytic-pruned.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Subspace size q for analytic-subspace.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, default_value_t = patchwood::importance::DEFAULT_REPEATS)]
    pub repeats: usize,
    /// Emit the per-depth decomposition next to each total.
    #[arg(long)]
    pub decompose: bool,
    /// Rescale so the totals sum to one.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemArg {
    Friedman1,
    LinearGaussian,
}

#[derive(Debug, Args, Serialize)]
pub struct BiasvarArgs {
    #[arg(long, value_enum, default_value = "friedman1")]
    pub problem: ProblemArg,
    /// Total inputs for friedman1, noise inputs for linear-gaussian.
    #[arg(long)]
    pub features: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 50)]
    pub sets: usize,
    #[arg(long, default_value_t = 300)]
    pub train_size: usize,
    #[arg(long, default_value_t = 200)]
    pub test_size: usize,
    /// Seeds per learning set; 2 or more also reports rho.
    #[arg(long, default_value_t = 1)]
    pub models_per_set: usize,
    /// Ensemble sizes to evaluate; defaults to `--trees`.
    #[arg(long, value_delimiter = ',')]
    pub ms: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub forest: ForestArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct DepthExpArgs {
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MiBiasArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,4,10")]
    pub card_x: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    pub card_y: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// N | p | K | M
    #[arg(long)]
    pub axis: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub train_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    /// Total friedman1 inputs.
    #[arg(long, default_value_t = 10)]
    pub features: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub forest: ForestArgs,
}
