//! Command-line surface. Parameters that can also come from the JSON config
//! file are `Option`s here; resolution order is flag > config > default.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "qfilter",
    version,
    about = "Classifier-based corpus quality filtering toolkit",
    propagate_version = true
)]
pub struct Cli {
    /// JSON config file; keys mirror the long flag names of the subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Log progress details to stderr (same as RUST_LOG=info).
    #[arg(long, short = 'v', global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate and normalize a JSON-lines corpus (tokenize, stamp lengths).
    Ingest(IngestArgs),
    /// Embed a corpus as hashed n-gram vectors.
    Embed(EmbedArgs),
    /// Train the quality classifier from HQ and LQ embeddings.
    TrainClassifier(TrainClassifierArgs),
    /// Score embedded documents with a trained classifier.
    Score(ScoreArgs),
    /// Fit the empirical score CDF and (optionally) a top-k threshold.
    Calibrate(CalibrateArgs),
    /// Filter a corpus by score threshold, top-k fraction, or score band.
    Filter(FilterArgs),
    /// Partition scored documents into equal-count quantile buckets.
    Deciles(DecilesArgs),
    /// Per-document selection weights 1[r >= tau]/r, mean-1 normalized.
    Reweight(ReweightArgs),
    /// Apply Perm(k): permute each document's tokens with probability k.
    Perm(PermArgs),
    /// Train the budgeted softmax language model on a corpus.
    LmTrain(LmTrainArgs),
    /// Evaluate a language model's cross-entropy on a corpus.
    LmEval(LmEvalArgs),
    /// Train/eval loss matrix over a Perm(k) family plus relation analysis.
    Conditioning(ConditioningArgs),
    /// Fit the scaling law E + A/N^alpha + B/D^beta to (n, d, loss) rows.
    ScalingFit(ScalingFitArgs),
    /// Length-vs-score bias report with optional length subsampling.
    BiasReport(BiasReportArgs),
    /// Project embeddings onto their top principal components.
    Pca(PcaArgs),
    /// Run an analytic Gaussian-mixture sandbox scenario.
    Sandbox(SandboxArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Input JSON-lines corpus (one {"id", "text", ...} object per line).
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Normalized corpus destination.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Keep only the first N documents.
    #[arg(long, value_name = "N")]
    pub limit: Option<usize>,
    /// Tokenizer vocabulary size.
    #[arg(long, value_name = "V")]
    pub vocab_size: Option<u32>,
}

#[derive(Args, Debug)]
pub struct EmbedArgs {
    /// Corpus to embed.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Binary embedding matrix destination.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Embedding dimension.
    #[arg(long, value_name = "D")]
    pub dim: Option<usize>,
    /// Comma-separated n-gram orders, e.g. "1,2".
    #[arg(long, value_name = "ORDERS")]
    pub ngram_orders: Option<String>,
    /// Hash seed.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Tokenizer vocabulary size.
    #[arg(long, value_name = "V")]
    pub vocab_size: Option<u32>,
    /// Skip L2 normalization of the vectors.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Args, Debug)]
pub struct TrainClassifierArgs {
    /// High-quality class embeddings.
    #[arg(long, value_name = "PATH")]
    pub hq: PathBuf,
    /// Low-quality class embeddings.
    #[arg(long, value_name = "PATH")]
    pub lq: PathBuf,
    /// Classifier JSON destination.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Rows sampled from each class.
    #[arg(long, value_name = "N")]
    pub n_per_class: Option<usize>,
    /// Comma-separated regularization grid, e.g. "1e-6,1e-4,1e-2".
    #[arg(long, value_name = "GRID")]
    pub lambda_grid: Option<String>,
    /// Fraction of each class held out for lambda selection.
    #[arg(long, value_name = "F")]
    pub holdout_fraction: Option<f64>,
    /// Optimizer iteration cap.
    #[arg(long, value_name = "N")]
    pub max_iters: Option<usize>,
    /// Gradient-norm convergence tolerance.
    #[arg(long, value_name = "TOL")]
    pub tol: Option<f64>,
    /// Sampling/split seed.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Trained classifier JSON.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Embeddings to score.
    #[arg(long, value_name = "PATH")]
    pub embeddings: PathBuf,
    /// Scores CSV destination (id,score,log_odds).
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Scores CSV (as written by `score`).
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    /// Empirical CDF table destination (CSV).
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Also resolve the top-k threshold for this selection fraction.
    #[arg(long, value_name = "K")]
    pub k: Option<f64>,
    /// Where to write the resolved selection spec (requires --k).
    #[arg(long, value_name = "PATH")]
    pub selection_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FilterArgs {
    /// Corpus to filter.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Scores CSV aligned with the corpus by id.
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    /// Filtered corpus destination.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Selection spec JSON produced by `calibrate`.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["k", "tau", "lo", "hi"])]
    pub selection: Option<PathBuf>,
    /// Top-k fraction; the threshold is calibrated from --scores.
    #[arg(long, value_name = "K")]
    pub k: Option<f64>,
    /// Explicit score threshold (keep score >= tau).
    #[arg(long, value_name = "TAU")]
    pub tau: Option<f64>,
    /// Exclusive band lower bound (keep lo <= score < hi).
    #[arg(long, value_name = "LO", requires = "hi", conflicts_with_all = ["k", "tau"])]
    pub lo: Option<f64>,
    /// Exclusive band upper bound.
    #[arg(long, value_name = "HI", requires = "lo")]
    pub hi: Option<f64>,
}

#[derive(Args, Debug)]
pub struct DecilesArgs {
    /// Scores CSV.
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    /// Assignment CSV destination (id,score,bucket).
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Number of equal-count buckets.
    #[arg(long, value_name = "Q")]
    pub buckets: Option<usize>,
    /// Optional bucket summary JSON (boundaries and sizes).
    #[arg(long, value_name = "PATH")]
    pub summary_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReweightArgs {
    /// Scores CSV.
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    /// Weights CSV destination (id,weight).
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Ratio threshold tau (r = p_hq/p_lq scale).
    #[arg(long, value_name = "TAU")]
    pub tau: f64,
    /// Derive ratios from the score column instead of the log-odds column.
    #[arg(long)]
    pub from_scores: bool,
    /// Optional summary JSON (tau, normalizer, retained count).
    #[arg(long, value_name = "PATH")]
    pub summary_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PermArgs {
    /// Corpus to transform.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Transformed corpus destination.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Per-document permutation probability.
    #[arg(long, value_name = "K")]
    pub k: Option<f64>,
    /// Transform seed.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct LmTrainArgs {
    /// Training corpus.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Binary model destination.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    #[command(flatten)]
    pub lm: LmFlags,
    /// Optional per-step loss trace CSV.
    #[arg(long, value_name = "PATH")]
    pub trace_out: Option<PathBuf>,
}

/// Language-model hyperparameters shared by lm-train and conditioning.
#[derive(Args, Debug, Clone)]
pub struct LmFlags {
    #[arg(long, value_name = "V")]
    pub vocab_size: Option<u32>,
    #[arg(long, value_name = "W")]
    pub context_window: Option<usize>,
    #[arg(long, value_name = "D")]
    pub feature_dim: Option<usize>,
    #[arg(long, value_name = "N")]
    pub steps: Option<usize>,
    #[arg(long, value_name = "B")]
    pub batch_size: Option<usize>,
    #[arg(long, value_name = "LR")]
    pub step_size: Option<f64>,
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct LmEvalArgs {
    /// Trained language model.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Evaluation corpus.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Evaluation report JSON destination.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct ConditioningArgs {
    /// Base corpus for the Perm(k) family.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Output directory (loss/std/delta CSVs, edges, report, matrix JSON).
    #[arg(long, value_name = "DIR")]
    pub output_dir: PathBuf,
    /// Comma-separated Perm probabilities, e.g. "0,0.25,0.5,0.75,1".
    #[arg(long, value_name = "GRID")]
    pub k_grid: Option<String>,
    /// Training seeds per cell.
    #[arg(long, value_name = "N")]
    pub seeds: Option<usize>,
    /// Edge threshold in units of the column std.
    #[arg(long, value_name = "S")]
    pub sigma_mult: Option<f64>,
    /// Fraction of documents held out as the eval side.
    #[arg(long, value_name = "F")]
    pub holdout_fraction: Option<f64>,
    #[command(flatten)]
    pub lm: LmFlags,
}

#[derive(Args, Debug)]
pub struct ScalingFitArgs {
    /// Observations CSV with header n,d,loss.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Fit JSON destination.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Huber transition width in log-loss space.
    #[arg(long, value_name = "DELTA")]
    pub huber_delta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct BiasReportArgs {
    /// Corpus the scores refer to.
    #[arg(long, value_name = "PATH")]
    pub corpus: PathBuf,
    /// Scores CSV.
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    /// Report JSON destination.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Number of score buckets in the report table.
    #[arg(long, value_name = "Q")]
    pub buckets: Option<usize>,
    /// Drop documents shorter than this many tokens before reporting.
    #[arg(long, value_name = "N")]
    pub min_len: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PcaArgs {
    /// Embeddings to project.
    #[arg(long, value_name = "PATH")]
    pub embeddings: PathBuf,
    /// Projection CSV destination (id,pc1..pcK).
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
    /// Number of principal components to keep.
    #[arg(long, value_name = "K")]
    pub out_dim: Option<usize>,
    /// Optional explained-variance JSON.
    #[arg(long, value_name = "PATH")]
    pub explained_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SandboxArgs {
    /// Scenario JSON (mixtures, k grid, sampling settings).
    #[arg(long, value_name = "PATH")]
    pub scenario: PathBuf,
    /// Result rows CSV destination.
    #[arg(long, value_name = "PATH")]
    pub output: PathBuf,
}
