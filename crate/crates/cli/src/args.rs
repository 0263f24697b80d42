use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use memorability::game::Spacing;

/// Memory-game experiments, consistency studies and memorability regression.
#[derive(Debug, Parser)]
#[command(name = "memwb", version)]
pub struct Cli {
    /// TOML config file; keys are flag names, `[subcommand]` tables apply to
    /// one subcommand, and command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate memory-game sequences as line-delimited JSON.
    GenSeq(GenSeqArgs),
    /// Run the experiment HTTP server.
    Serve(ServeArgs),
    /// Simulate binomial observers playing the memory game.
    Simulate(SimulateArgs),
    /// Score sessions into a memorability table and response matrix.
    Score(ScoreArgs),
    /// Split-half consistency per group size.
    Consistency(ConsistencyArgs),
    /// Across-group variance of per-item scores per group size.
    Variance(VarianceArgs),
    /// Within-order versus cross-order consistency of fixed-order sessions.
    OrderStudy(OrderStudyArgs),
    /// Train a boosted-tree model on features and scores.
    Train(TrainArgs),
    /// Predict scores with a trained model.
    Predict(PredictArgs),
    /// Repeated train/test evaluation of one feature set.
    Evaluate(EvaluateArgs),
    /// Evaluate and rank several feature sets.
    Compare(CompareArgs),
    /// Per-item prediction error differences of two models, binned by score.
    Errdiff(ErrdiffArgs),
    /// Human consistency upper bound (split-half at half the participants).
    UpperBound(UpperBoundArgs),
}

pub fn parse_spacing(s: &str) -> Result<Spacing, String> {
    let (a, b) = s.split_once(',').ok_or("expected MIN,MAX")?;
    let min = a.trim().parse().map_err(|_| format!("bad minimum {a:?}"))?;
    let max = b.trim().parse().map_err(|_| format!("bad maximum {b:?}"))?;
    Ok(Spacing::new(min, max))
}

#[derive(Debug, Args, Clone)]
pub struct SeqArgs {
    /// Allowed target repeat distance in slots, MIN,MAX.
    #[arg(long, value_parser = parse_spacing, default_value = "36,108")]
    pub target_spacing: Spacing,
    /// Allowed vigilance repeat distance in slots, MIN,MAX.
    #[arg(long, value_parser = parse_spacing, default_value = "1,7")]
    pub vigilance_spacing: Spacing,
    /// Image display time in milliseconds.
    #[arg(long, default_value_t = 1000)]
    pub display_ms: u32,
    /// Blank gap between images in milliseconds.
    #[arg(long, default_value_t = 1400)]
    pub gap_ms: u32,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct AttnArgs {
    /// Sessions below this vigilance hit rate are excluded.
    #[arg(long, default_value_t = 0.5)]
    pub min_vigilance: f64,
    /// Sessions above this false-alarm rate are excluded.
    #[arg(long, default_value_t = 0.5)]
    pub max_false_alarm: f64,
}

#[derive(Debug, Args, Clone)]
pub struct HpArgs {
    /// Boosting rounds.
    #[arg(long, default_value_t = 500)]
    pub rounds: usize,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    /// Shrinkage applied to every tree.
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Minimum gain to keep a split.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub min_child_weight: f64,
    /// Fraction of rows drawn per tree.
    #[arg(long, default_value_t = 0.8)]
    pub subsample: f64,
    /// Fraction of features drawn per tree.
    #[arg(long, default_value_t = 0.8)]
    pub colsample: f64,
    /// Initial prediction [default: mean label].
    #[arg(long)]
    pub base_score: Option<f64>,
    /// Standardize features before training.
    #[arg(long)]
    pub standardize: bool,
    /// Hold out this fraction of rows for early stopping [default: off].
    #[arg(long)]
    pub early_stopping: Option<f64>,
    /// Rounds without holdout improvement before stopping.
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct EvalArgs {
    /// Random train/test splits.
    #[arg(long, default_value_t = 25)]
    pub splits: usize,
    /// Fraction of items in each test set.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Args)]
pub struct GenSeqArgs {
    /// Pool manifest CSV (item_id,image_uri,role) [default: synthetic pool].
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Targets per sequence.
    #[arg(long, default_value_t = 0)]
    pub targets: usize,
    /// Fillers per sequence.
    #[arg(long, default_value_t = 0)]
    pub fillers: usize,
    /// Vigilance fillers per sequence (each shown twice).
    #[arg(long, default_value_t = 0)]
    pub vigilance: usize,
    #[command(flatten)]
    pub seq: SeqArgs,
    /// Use fixed order ID instead of a random order.
    #[arg(long)]
    pub order: Option<u32>,
    /// Number of sequences; sequence i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Random seed, echoed in every output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Directory holding experiment logs.
    #[arg(long, default_value = "data")]
    pub data_dir: PathBuf,
    /// Directory served under /stimuli/.
    #[arg(long)]
    pub stimuli: Option<PathBuf>,
    /// Base directory for relative pool manifest paths.
    #[arg(long, default_value = ".")]
    pub pool_root: PathBuf,
    /// Snapshot every N log entries (0 disables snapshots).
    #[arg(long, default_value_t = 256)]
    pub snapshot_every: usize,
    /// Skip fsync after each log append.
    #[arg(long)]
    pub no_fsync: bool,
    /// Sequence files (JSONL, as written by gen-seq) to register as
    /// experiments named after the file stem; existing experiments are kept.
    #[arg(long, value_delimiter = ',')]
    pub preload: Vec<PathBuf>,
    /// Session cap for preloaded experiments.
    #[arg(long, default_value_t = 1000)]
    pub max_sessions: usize,
    /// Seed for preloaded experiments.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// True scores (CSV with item_id,score) [default: synthetic items].
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Synthetic items.
    #[arg(long, default_value_t = 45)]
    pub items: usize,
    /// Mean of the synthetic score distribution (normal, clipped to [0, 1]).
    #[arg(long, default_value_t = 0.66)]
    pub mean: f64,
    /// Standard deviation of the synthetic score distribution.
    #[arg(long, default_value_t = 0.14)]
    pub sd: f64,
    /// Participants (per order when --orders is set).
    #[arg(long, default_value_t = 270)]
    pub participants: usize,
    /// Fillers per sequence.
    #[arg(long, default_value_t = 60)]
    pub fillers: usize,
    /// Vigilance fillers per sequence (each shown twice).
    #[arg(long, default_value_t = 10)]
    pub vigilance: usize,
    #[command(flatten)]
    pub seq: SeqArgs,
    /// Press probability on non-repeat slots.
    #[arg(long, default_value_t = 0.05)]
    pub fa_prob: f64,
    /// Press probability on vigilance repeats.
    #[arg(long, default_value_t = 0.9)]
    pub vigilance_prob: f64,
    /// Number of fixed orders (0: every participant gets a random order).
    #[arg(long, default_value_t = 0)]
    pub orders: u32,
    /// Size of the per-order score shift.
    #[arg(long, default_value_t = 0.0)]
    pub order_delta: f64,
    /// Fraction of items with a per-order shift.
    #[arg(long, default_value_t = 0.5)]
    pub order_delta_fraction: f64,
    /// Random seed, echoed in every output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sessions output (JSONL) [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the true scores used.
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Sequences and sessions (JSONL).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub attn: AttnArgs,
    /// Memorability table CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Response matrix CSV.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
    /// Per-session scores CSV.
    #[arg(long)]
    pub sessions_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    /// Sessions (JSONL) or response matrix (CSV).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Group sizes.
    #[arg(long, value_delimiter = ',', default_value = "40,100,135")]
    pub k: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    #[command(flatten)]
    pub attn: AttnArgs,
    /// Random seed, echoed in every output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Summary CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-split rho CSV.
    #[arg(long)]
    pub per_split_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    /// Sessions (JSONL) or response matrix (CSV).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Group sizes.
    #[arg(long, value_delimiter = ',', default_value = "40,130")]
    pub k: Vec<usize>,
    /// Bootstrap groups per size.
    #[arg(long, default_value_t = 1000)]
    pub groups: usize,
    #[command(flatten)]
    pub attn: AttnArgs,
    /// Random seed, echoed in every output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OrderStudyArgs {
    /// Fixed-order sequences and sessions (JSONL).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Participants per group.
    #[arg(long, default_value_t = 25)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    #[command(flatten)]
    pub attn: AttnArgs,
    /// Random seed, echoed in every output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature file (CSV or binary).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Scores (CSV with item_id,score).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub hp: HpArgs,
    /// Random seed, echoed in every output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Predictions CSV (item_id,prediction) [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub hp: HpArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Random seed, echoed in every output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Summary CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-split rho CSV.
    #[arg(long)]
    pub per_split_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Feature sets as PATH or NAME=PATH; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Also evaluate the column-wise concatenation of all sets.
    #[arg(long)]
    pub concat: bool,
    #[command(flatten)]
    pub hp: HpArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Random seed, echoed in every output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ErrdiffArgs {
    /// Predictions of model A (CSV item_id,prediction).
    #[arg(long)]
    pub pred_a: Option<PathBuf>,
    #[arg(long)]
    pub pred_b: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Score bin edges [default: 0, 0.05, ..., 1].
    #[arg(long, value_delimiter = ',')]
    pub bins: Vec<f64>,
    /// Per-item CSV [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-bin counts CSV.
    #[arg(long)]
    pub bins_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct UpperBoundArgs {
    /// Sessions (JSONL) or response matrix (CSV).
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    #[command(flatten)]
    pub attn: AttnArgs,
    /// Random seed, echoed in every output.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
