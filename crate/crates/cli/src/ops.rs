//! Implementations of the sixteen subcommands. Each one resolves its
//! parameters (flag > config > default), does the work through the library,
//! writes its artifacts atomically, and records a manifest next to the
//! primary output.

use std::collections::BTreeMap;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use qfilter_core::bias::{length_score_report, length_subsample};
use qfilter_core::calibrate::{fit_cdf, threshold_for_fraction, SelectionSpec};
use qfilter_core::classifier::{
    default_lambda_grid, train, QualityClassifier, TrainConfig,
};
use qfilter_core::conditioning::{
    build_loss_matrix, delta_matrix, ordering_report, perm_family, relation_graph,
    write_edge_list, write_matrix_csv,
};
use qfilter_core::corpus::{
    load_corpus, perm_transform, save_corpus, Corpus, PermSpec, Tokenizer, DEFAULT_VOCAB_SIZE,
};
use qfilter_core::embed::{
    embed_corpus, load_embeddings, pca_project, save_embeddings, EmbeddingMatrix,
    HashedEmbedderConfig, DEFAULT_EMBED_DIM,
};
use qfilter_core::filter::{
    partition_quantiles, reweight_diag_from_log_odds, reweight_diag_from_scores, select,
};
use qfilter_core::fsutil::atomic_write;
use qfilter_core::lm::{eval_xent, export_loss_trace_csv, train_lm, LMConfig, LMModel};
use qfilter_core::scaling::{fit as scaling_fit, FitOptions};
use qfilter_core::synthlab::{run_sandbox, SandboxScenario};

use crate::args::{self, Cli, Command};
use crate::cfg::{self, parse_list, pick, pick_opt};
use crate::tables::{read_observations, read_scores, write_json, write_scores, RunManifest, ScoreRow};

pub fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Ingest(a) => ingest(a, config),
        Command::Embed(a) => embed(a, config),
        Command::TrainClassifier(a) => train_classifier(a, config),
        Command::Score(a) => score(a, config),
        Command::Calibrate(a) => calibrate(a, config),
        Command::Filter(a) => filter(a, config),
        Command::Deciles(a) => deciles(a, config),
        Command::Reweight(a) => reweight(a, config),
        Command::Perm(a) => perm(a, config),
        Command::LmTrain(a) => lm_train(a, config),
        Command::LmEval(a) => lm_eval(a, config),
        Command::Conditioning(a) => conditioning(a, config),
        Command::ScalingFit(a) => scaling_fit_cmd(a, config),
        Command::BiasReport(a) => bias_report(a, config),
        Command::Pca(a) => pca(a, config),
        Command::Sandbox(a) => sandbox(a, config),
    }
}

fn load_corpus_flag(path: &Path, limit: Option<usize>, vocab: u32) -> Result<Corpus> {
    let tokenizer = Tokenizer::new(vocab)?;
    let corpus = load_corpus(path, limit, &tokenizer)?;
    if corpus.is_empty() {
        bail!("{}: corpus has no documents", path.display());
    }
    Ok(corpus)
}

fn ingest(a: args::IngestArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::IngestConfig = cfg::load(config)?;
    let limit = pick_opt(a.limit, file.limit);
    let vocab = pick(a.vocab_size, file.vocab_size, DEFAULT_VOCAB_SIZE);
    let corpus = load_corpus_flag(&a.input, limit, vocab)?;
    save_corpus(&corpus, &a.output)?;
    log::info!("ingested {} documents", corpus.len());
    RunManifest::new("ingest", config, 0)
        .input(&a.input)
        .output(&a.output)
        .write_beside(&a.output)
}

fn embed(a: args::EmbedArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::EmbedConfig = cfg::load(config)?;
    let orders = match a.ngram_orders.as_deref() {
        Some(raw) => parse_list::<usize>(raw, "ngram order")?,
        None => file.ngram_orders.clone().unwrap_or_else(|| vec![1, 2]),
    };
    let seed = pick(a.seed, file.seed, 0);
    let embed_cfg = HashedEmbedderConfig {
        dim: pick(a.dim, file.dim, DEFAULT_EMBED_DIM),
        ngram_orders: orders,
        seed,
        normalize: if a.no_normalize {
            false
        } else {
            file.normalize.unwrap_or(true)
        },
    };
    let vocab = pick(a.vocab_size, file.vocab_size, DEFAULT_VOCAB_SIZE);
    let corpus = load_corpus_flag(&a.input, None, vocab)?;
    let matrix = embed_corpus(&corpus, &embed_cfg)?;
    if matrix.degenerate_count() > 0 {
        log::warn!(
            "{} of {} documents embedded to zero vectors",
            matrix.degenerate_count(),
            matrix.n_rows()
        );
    }
    save_embeddings(&matrix, &a.output)?;
    RunManifest::new("embed", config, seed)
        .input(&a.input)
        .output(&a.output)
        .write_beside(&a.output)
}

fn train_classifier(a: args::TrainClassifierArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::TrainClassifierConfig = cfg::load(config)?;
    let lambda_grid = match a.lambda_grid.as_deref() {
        Some(raw) => parse_list::<f64>(raw, "lambda")?,
        None => file.lambda_grid.clone().unwrap_or_else(default_lambda_grid),
    };
    let seed = pick(a.seed, file.seed, 0);
    let defaults = TrainConfig::default();
    let train_cfg = TrainConfig {
        n_per_class: pick(a.n_per_class, file.n_per_class, defaults.n_per_class),
        lambda_grid,
        holdout_fraction: pick(
            a.holdout_fraction,
            file.holdout_fraction,
            defaults.holdout_fraction,
        ),
        max_iters: pick(a.max_iters, file.max_iters, defaults.max_iters),
        tol: pick(a.tol, file.tol, defaults.tol),
        seed,
    };
    let hq = load_embeddings(&a.hq)?;
    let lq = load_embeddings(&a.lq)?;
    let model = train(&hq, &lq, &train_cfg)?;
    log::info!(
        "selected lambda {} with holdout accuracy {:.4}",
        model.lambda,
        model.train_meta.holdout_accuracy
    );
    model.save(&a.output)?;
    RunManifest::new("train-classifier", config, seed)
        .input(&a.hq)
        .input(&a.lq)
        .output(&a.output)
        .write_beside(&a.output)
}

fn score(a: args::ScoreArgs, config: Option<&Path>) -> Result<()> {
    let _: cfg::EmptyConfig = cfg::load(config)?;
    let model = QualityClassifier::load(&a.model)?;
    let matrix = load_embeddings(&a.embeddings)?;
    let mut rows = Vec::with_capacity(matrix.n_rows());
    for i in 0..matrix.n_rows() {
        let x = matrix.row_f64(i);
        rows.push(ScoreRow {
            id: matrix.ids()[i].clone(),
            score: model.score(&x)?,
            log_odds: model.log_odds(&x)?,
        });
    }
    write_scores(&a.output, &rows)?;
    RunManifest::new("score", config, 0)
        .input(&a.model)
        .input(&a.embeddings)
        .output(&a.output)
        .write_beside(&a.output)
}

fn calibrate(a: args::CalibrateArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::CalibrateConfig = cfg::load(config)?;
    let rows = read_scores(&a.scores)?;
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let cdf = fit_cdf(&scores)?;
    qfilter_core::calibrate::export_cdf_csv(&cdf, &a.output)?;

    let k = pick_opt(a.k, file.k);
    let mut manifest = RunManifest::new("calibrate", config, 0)
        .input(&a.scores)
        .output(&a.output);
    match (k, a.selection_out.as_ref()) {
        (Some(k), Some(sel_path)) => {
            let tau = threshold_for_fraction(&cdf, k)?;
            let spec = SelectionSpec::top_k(k, tau);
            write_json(sel_path, &spec)?;
            manifest = manifest.output(sel_path);
        }
        (Some(k), None) => {
            let tau = threshold_for_fraction(&cdf, k)?;
            log::info!("threshold for k = {k}: {tau}");
        }
        (None, Some(_)) => bail!("--selection-out requires --k (or a config 'k' entry)"),
        (None, None) => {}
    }
    manifest.write_beside(&a.output)
}

/// Align a scores table to the corpus document order.
fn aligned_scores(corpus: &Corpus, rows: &[ScoreRow], scores_path: &Path) -> Result<Vec<f64>> {
    let by_id: BTreeMap<&str, f64> = rows.iter().map(|r| (r.id.as_str(), r.score)).collect();
    corpus
        .iter()
        .map(|doc| {
            by_id.get(doc.id.as_str()).copied().with_context(|| {
                format!(
                    "document '{}' has no score in {}",
                    doc.id,
                    scores_path.display()
                )
            })
        })
        .collect()
}

fn filter(a: args::FilterArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::FilterConfig = cfg::load(config)?;
    let corpus = load_corpus_flag(&a.input, None, DEFAULT_VOCAB_SIZE)?;
    let rows = read_scores(&a.scores)?;
    let scores = aligned_scores(&corpus, &rows, &a.scores)?;

    let spec = if let Some(sel_path) = &a.selection {
        let text = std::fs::read_to_string(sel_path)
            .with_context(|| format!("reading selection spec {}", sel_path.display()))?;
        serde_json::from_str::<SelectionSpec>(&text)
            .with_context(|| format!("parsing selection spec {}", sel_path.display()))?
    } else {
        let k = pick_opt(a.k, file.k);
        let tau = pick_opt(a.tau, file.tau);
        let lo = pick_opt(a.lo, file.lo);
        let hi = pick_opt(a.hi, file.hi);
        match (k, tau, lo, hi) {
            (_, _, Some(lo), Some(hi)) => SelectionSpec::exclusive(lo, hi),
            (Some(k), Some(tau), None, None) => SelectionSpec::top_k(k, tau),
            (Some(k), None, None, None) => {
                // Calibrate the threshold from this same scores table.
                let cdf = fit_cdf(&rows.iter().map(|r| r.score).collect::<Vec<_>>())?;
                SelectionSpec::top_k(k, threshold_for_fraction(&cdf, k)?)
            }
            (None, Some(tau), None, None) => SelectionSpec::at_threshold(tau),
            _ => bail!(
                "filter needs a selection: --selection FILE, --k [--tau], --tau, or --lo/--hi"
            ),
        }
    };
    let kept = select(&corpus, &scores, &spec)?;
    log::info!("retained {} of {} documents", kept.len(), corpus.len());
    save_corpus(&kept, &a.output)?;
    RunManifest::new("filter", config, 0)
        .input(&a.input)
        .input(&a.scores)
        .output(&a.output)
        .write_beside(&a.output)
}

#[derive(Serialize)]
struct BucketSummary {
    bucket_count: usize,
    boundaries: Vec<f64>,
    sizes: Vec<usize>,
}

fn deciles(a: args::DecilesArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::DecilesConfig = cfg::load(config)?;
    let buckets = pick(a.buckets, file.buckets, 10);
    let rows = read_scores(&a.scores)?;
    let scored: Vec<(String, f64)> = rows.iter().map(|r| (r.id.clone(), r.score)).collect();
    let part = partition_quantiles(&scored, buckets)?;

    atomic_write(&a.output, |w| {
        writeln!(w, "id,score,bucket").map_err(|e| qfilter_core::Error::io(&a.output, e))?;
        for (id, s) in &scored {
            let b = part.bucket_of(id).expect("every scored id is assigned");
            writeln!(w, "{id},{s},{b}").map_err(|e| qfilter_core::Error::io(&a.output, e))?;
        }
        Ok(())
    })?;
    if let Some(summary_path) = &a.summary_out {
        write_json(
            summary_path,
            &BucketSummary {
                bucket_count: part.bucket_count,
                boundaries: part.boundaries.clone(),
                sizes: part.sizes().to_vec(),
            },
        )?;
    }
    RunManifest::new("deciles", config, 0)
        .input(&a.scores)
        .output(&a.output)
        .output_opt(a.summary_out.as_ref())
        .write_beside(&a.output)
}

#[derive(Serialize)]
struct ReweightSummary {
    tau: f64,
    normalizer: f64,
    retained: usize,
    total: usize,
}

fn reweight(a: args::ReweightArgs, config: Option<&Path>) -> Result<()> {
    let _: cfg::EmptyConfig = cfg::load(config)?;
    let rows = read_scores(&a.scores)?;
    let diag = if a.from_scores {
        let scored: Vec<(String, f64)> = rows.iter().map(|r| (r.id.clone(), r.score)).collect();
        reweight_diag_from_scores(&scored, a.tau)?
    } else {
        let odds: Vec<(String, f64)> = rows.iter().map(|r| (r.id.clone(), r.log_odds)).collect();
        reweight_diag_from_log_odds(&odds, a.tau)?
    };
    atomic_write(&a.output, |w| {
        writeln!(w, "id,weight").map_err(|e| qfilter_core::Error::io(&a.output, e))?;
        for (id, weight) in &diag.weights {
            writeln!(w, "{id},{weight}").map_err(|e| qfilter_core::Error::io(&a.output, e))?;
        }
        Ok(())
    })?;
    if let Some(summary_path) = &a.summary_out {
        write_json(
            summary_path,
            &ReweightSummary {
                tau: diag.tau,
                normalizer: diag.normalizer,
                retained: diag.retained,
                total: diag.weights.len(),
            },
        )?;
    }
    RunManifest::new("reweight", config, 0)
        .input(&a.scores)
        .output(&a.output)
        .output_opt(a.summary_out.as_ref())
        .write_beside(&a.output)
}

fn perm(a: args::PermArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::PermConfig = cfg::load(config)?;
    let Some(k) = pick_opt(a.k, file.k) else {
        bail!("perm needs a permutation probability: --k (or a config 'k' entry)");
    };
    let seed = pick(a.seed, file.seed, 0);
    let corpus = load_corpus_flag(&a.input, None, DEFAULT_VOCAB_SIZE)?;
    let out = perm_transform(&corpus, &PermSpec { k, seed })?;
    save_corpus(&out, &a.output)?;
    RunManifest::new("perm", config, seed)
        .input(&a.input)
        .output(&a.output)
        .write_beside(&a.output)
}

fn resolve_lm_config(flags: &args::LmFlags, file: &cfg::LmConfigFile) -> LMConfig {
    let d = LMConfig::default();
    LMConfig {
        vocab_size: pick(flags.vocab_size, file.vocab_size, d.vocab_size),
        context_window: pick(flags.context_window, file.context_window, d.context_window),
        feature_dim: pick(flags.feature_dim, file.feature_dim, d.feature_dim),
        steps: pick(flags.steps, file.steps, d.steps),
        batch_size: pick(flags.batch_size, file.batch_size, d.batch_size),
        step_size: pick(flags.step_size, file.step_size, d.step_size),
        seed: pick(flags.seed, file.seed, d.seed),
    }
}

fn lm_train(a: args::LmTrainArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::LmConfigFile = cfg::load(config)?;
    let lm_cfg = resolve_lm_config(&a.lm, &file);
    let corpus = load_corpus_flag(&a.input, None, lm_cfg.vocab_size)?;
    let model = train_lm(&corpus, &lm_cfg)?;
    log::info!(
        "trained {} steps; final loss {:.4}",
        lm_cfg.steps,
        model.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    model.save(&a.output)?;
    if let Some(trace_path) = &a.trace_out {
        export_loss_trace_csv(&model, trace_path)?;
    }
    RunManifest::new("lm-train", config, lm_cfg.seed)
        .input(&a.input)
        .output(&a.output)
        .output_opt(a.trace_out.as_ref())
        .write_beside(&a.output)
}

#[derive(Serialize)]
struct LmEvalReport {
    cross_entropy_nats: f64,
    documents: usize,
    tokens: usize,
}

fn lm_eval(a: args::LmEvalArgs, config: Option<&Path>) -> Result<()> {
    let _: cfg::EmptyConfig = cfg::load(config)?;
    let model = LMModel::load(&a.model)?;
    let corpus = load_corpus_flag(&a.input, None, model.config.vocab_size)?;
    let xent = eval_xent(&model, &corpus)?;
    write_json(
        &a.output,
        &LmEvalReport {
            cross_entropy_nats: xent,
            documents: corpus.len(),
            tokens: corpus.total_tokens(),
        },
    )?;
    RunManifest::new("lm-eval", config, 0)
        .input(&a.model)
        .input(&a.input)
        .output(&a.output)
        .write_beside(&a.output)
}

fn conditioning(a: args::ConditioningArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::ConditioningConfig = cfg::load(config)?;
    let k_grid = match a.k_grid.as_deref() {
        Some(raw) => parse_list::<f64>(raw, "k")?,
        None => file
            .k_grid
            .clone()
            .unwrap_or_else(|| vec![0.0, 0.25, 0.5, 0.75, 1.0]),
    };
    let seeds = pick(a.seeds, file.seeds, 3);
    let sigma_mult = pick(a.sigma_mult, file.sigma_mult, 1.0);
    let holdout = pick(a.holdout_fraction, file.holdout_fraction, 0.25);
    let lm_cfg = resolve_lm_config(&a.lm, &file.lm);

    let corpus = load_corpus_flag(&a.input, None, lm_cfg.vocab_size)?;
    let family = perm_family(&corpus, &k_grid, holdout, lm_cfg.seed)?;
    let matrix = build_loss_matrix(&family, &lm_cfg, seeds)?;
    let delta = delta_matrix(&matrix)?;
    let graph = relation_graph(&matrix.k_grid, &delta, &matrix.stds, sigma_mult)?;
    let report = ordering_report(&graph);

    std::fs::create_dir_all(&a.output_dir)
        .with_context(|| format!("creating output dir {}", a.output_dir.display()))?;
    let path = |name: &str| -> PathBuf { a.output_dir.join(name) };
    matrix.save_json(&path("loss_matrix.json"))?;
    write_matrix_csv(&matrix.k_grid, &matrix.losses, &path("losses.csv"))?;
    write_matrix_csv(&matrix.k_grid, &matrix.stds, &path("stds.csv"))?;
    write_matrix_csv(&matrix.k_grid, &delta, &path("delta.csv"))?;
    write_edge_list(&graph, &path("edges.csv"))?;
    write_json(&path("report.json"), &report)?;

    RunManifest::new("conditioning", config, lm_cfg.seed)
        .input(&a.input)
        .output(&path("loss_matrix.json"))
        .output(&path("losses.csv"))
        .output(&path("stds.csv"))
        .output(&path("delta.csv"))
        .output(&path("edges.csv"))
        .output(&path("report.json"))
        .write_to(&path("manifest.json"))
}

fn scaling_fit_cmd(a: args::ScalingFitArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::ScalingFitConfig = cfg::load(config)?;
    let obs = read_observations(&a.input)?;
    let opts = FitOptions {
        robust_delta: pick(a.huber_delta, file.huber_delta, FitOptions::default().robust_delta),
        ..FitOptions::default()
    };
    let fit = scaling_fit(&obs, &opts)?;
    write_json(&a.output, &fit)?;
    RunManifest::new("scaling-fit", config, 0)
        .input(&a.input)
        .output(&a.output)
        .write_beside(&a.output)
}

fn bias_report(a: args::BiasReportArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::BiasReportConfig = cfg::load(config)?;
    let buckets = pick(a.buckets, file.buckets, 10);
    let min_len = pick_opt(a.min_len, file.min_len);

    let full = load_corpus_flag(&a.corpus, None, DEFAULT_VOCAB_SIZE)?;
    let rows = read_scores(&a.scores)?;
    let (corpus, emptied) = match min_len {
        Some(n) => length_subsample(&full, n)?,
        None => (full, false),
    };
    if emptied {
        bail!("--min-len {} removed every document", min_len.unwrap_or(0));
    }
    let keep: BTreeMap<&str, ()> = corpus.iter().map(|d| (d.id.as_str(), ())).collect();
    let scored: Vec<(String, f64)> = rows
        .iter()
        .filter(|r| keep.contains_key(r.id.as_str()))
        .map(|r| (r.id.clone(), r.score))
        .collect();
    let part = partition_quantiles(&scored, buckets)?;
    let mut report = length_score_report(&corpus, &scored, &part)?;
    report.min_len_applied = min_len;
    write_json(&a.output, &report)?;
    RunManifest::new("bias-report", config, 0)
        .input(&a.corpus)
        .input(&a.scores)
        .output(&a.output)
        .write_beside(&a.output)
}

#[derive(Serialize)]
struct ExplainedVariance {
    out_dim: usize,
    explained: Vec<f64>,
}

fn pca(a: args::PcaArgs, config: Option<&Path>) -> Result<()> {
    let file: cfg::PcaConfig = cfg::load(config)?;
    let out_dim = pick(a.out_dim, file.out_dim, 2);
    let matrix: EmbeddingMatrix = load_embeddings(&a.embeddings)?;
    let proj = pca_project(&matrix, out_dim)?;

    atomic_write(&a.output, |w| {
        let header: Vec<String> = (1..=out_dim).map(|i| format!("pc{i}")).collect();
        writeln!(w, "id,{}", header.join(",")).map_err(|e| qfilter_core::Error::io(&a.output, e))?;
        for (i, id) in matrix.ids().iter().enumerate() {
            let coords: Vec<String> = proj.row(i).iter().map(|c| c.to_string()).collect();
            writeln!(w, "{id},{}", coords.join(","))
                .map_err(|e| qfilter_core::Error::io(&a.output, e))?;
        }
        Ok(())
    })?;
    if let Some(explained_path) = &a.explained_out {
        write_json(
            explained_path,
            &ExplainedVariance {
                out_dim,
                explained: proj.explained.clone(),
            },
        )?;
    }
    RunManifest::new("pca", config, 0)
        .input(&a.embeddings)
        .output(&a.output)
        .output_opt(a.explained_out.as_ref())
        .write_beside(&a.output)
}

fn sandbox(a: args::SandboxArgs, config: Option<&Path>) -> Result<()> {
    let _: cfg::EmptyConfig = cfg::load(config)?;
    let text = std::fs::read_to_string(&a.scenario)
        .with_context(|| format!("reading scenario {}", a.scenario.display()))?;
    let scenario: SandboxScenario = serde_json::from_str(&text)
        .with_context(|| format!("parsing scenario {}", a.scenario.display()))?;
    let rows = run_sandbox(&scenario)?;
    atomic_write(&a.output, |w| {
        writeln!(w, "k,kl_hq_cqf,kl_top_decile,kl_bottom_decile,kl_crisp")
            .map_err(|e| qfilter_core::Error::io(&a.output, e))?;
        for r in &rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.k, r.kl_hq_cqf, r.kl_top_decile, r.kl_bottom_decile, r.kl_crisp
            )
            .map_err(|e| qfilter_core::Error::io(&a.output, e))?;
        }
        Ok(())
    })?;
    RunManifest::new("sandbox", config, scenario.seed)
        .input(&a.scenario)
        .output(&a.output)
        .write_beside(&a.output)
}
