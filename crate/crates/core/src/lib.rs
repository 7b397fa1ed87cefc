//! Quality-filtering toolkit: classifier-based corpus selection and the
//! analysis machinery around it.
//!
//! The pipeline: hash documents into n-gram feature vectors ([`embed`]),
//! train a regularized logistic classifier that separates a curated set
//! from the pool ([`classifier`]), score the pool, turn a target selection
//! fraction into a score threshold ([`calibrate`]), and select ([`filter`]).
//! Around it: an analytic Gaussian sandbox with quadrature-exact answers
//! ([`synthlab`]), a budget-limited language model ([`lm`]) used to measure
//! data conditioning ([`conditioning`]), scaling-law fits ([`scaling`]),
//! and length-bias diagnostics ([`bias`]).
//!
//! Everything is deterministic given seeds: fixed-stream RNGs, ordered
//! collections, parallel reductions with sequential merges, and atomic
//! artifact writes.

// Validation deliberately writes `!(x > 0.0)` instead of `x <= 0.0`: the
// negated form also rejects NaN, which is the point of those checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Numeric loops here usually couple one index across several matrices
// (`delta[i][j]`, `stds[j][j]`, `k_grid[i]`); the index form reads better
// than nested iterator adapters for that.
#![allow(clippy::needless_range_loop)]

pub mod bias;
pub mod calibrate;
pub mod classifier;
pub mod conditioning;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod filter;
pub mod fsutil;
pub mod hash;
pub mod lm;
pub mod scaling;
pub mod synthetic;
pub mod synthlab;

pub use bias::{length_score_report, length_subsample, spearman, BiasReport};
pub use calibrate::{
    export_cdf_csv, fit_cdf, threshold_for_fraction, ScoreCdf, SelectionMode, SelectionSpec,
};
pub use classifier::{default_lambda_grid, train, QualityClassifier, TrainConfig, TrainMeta};
pub use conditioning::{
    build_loss_matrix, delta_matrix, ordering_report, perm_family, relation_graph, DatasetPair,
    LossMatrix, OrderingReport, RelationEdge, RelationGraph,
};
pub use corpus::{
    load_corpus, perm_transform, save_corpus, split_holdout, Corpus, Document, PermSpec,
    Tokenizer,
};
pub use embed::{
    embed_corpus, load_embeddings, pca_project, save_embeddings, DocEmbedding, EmbeddingMatrix,
    HashedEmbedderConfig, PcaProjection,
};
pub use error::{Error, Result};
pub use filter::{
    partition_quantiles, reweight_diag_from_log_odds, reweight_diag_from_scores, select,
    BucketPartition, ReweightDiag,
};
pub use lm::{eval_xent, export_loss_trace_csv, train_lm, LMConfig, LMModel};
pub use scaling::{
    fit as scaling_fit, limit_loss, predict as scaling_predict, FitOptions, ScalingFit,
    ScalingObservation,
};
pub use synthlab::{
    bayes_score, cqf_gaussian_surrogate, cqf_tau_for_fraction, crisp_resample, hq_ratio_bucket_edges,
    kl_divergence, kl_mixture_vs_histogram, log_ratio, moment_fit, run_sandbox, Density,
    GaussianComponent, GaussianMixtureSpec, KlOutcome, QuadratureGrid, SandboxRow,
    SandboxScenario,
};

/// Version stamp recorded in run manifests.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
