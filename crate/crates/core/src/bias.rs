//! Length-bias diagnostics: does the quality score secretly track document
//! length? Reports the Spearman rank correlation between token count and
//! score, per-bucket mean lengths, and provides the subsample-by-length
//! mitigation for the curated positive set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::filter::BucketPartition;

/// Average ranks (1-based); ties share the mean of their positions.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite by validation"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // Positions i..=j (0-based) share the average 1-based rank.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with the average-rank tie convention.
/// A constant variable has zero rank variance; the correlation is defined
/// as 0 in that case.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DimMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData(
            "rank correlation needs ≥ 2 points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank correlation input".into()));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Length-bias report over a scored, bucketed corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasReport {
    pub spearman_len_score: f64,
    pub n_documents: usize,
    pub bucket_count: usize,
    /// Mean token count per score bucket (ascending score buckets).
    pub bucket_mean_lengths: Vec<f64>,
    /// Mean score per bucket, for orientation.
    pub bucket_mean_scores: Vec<f64>,
    pub bucket_sizes: Vec<usize>,
    /// The min-length cutoff applied before training, when the caller used
    /// the subsample mitigation.
    pub min_len_applied: Option<usize>,
}

/// Correlate token counts with scores and summarize lengths per score
/// bucket. Every document needs a score and a bucket assignment.
pub fn length_score_report(
    corpus: &Corpus,
    scores: &[(String, f64)],
    partition: &BucketPartition,
) -> Result<BiasReport> {
    if corpus.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "bias report needs ≥ 3 documents, got {}",
            corpus.len()
        )));
    }
    let score_of: BTreeMap<&str, f64> = scores.iter().map(|(id, s)| (id.as_str(), *s)).collect();
    let mut lens = Vec::with_capacity(corpus.len());
    let mut svals = Vec::with_capacity(corpus.len());
    let q = partition.bucket_count;
    let mut sum_len = vec![0.0; q];
    let mut sum_score = vec![0.0; q];
    let mut counts = vec![0usize; q];
    for doc in corpus.docs() {
        let s = *score_of.get(doc.id.as_str()).ok_or_else(|| {
            Error::Config(format!("document '{}' has no score", doc.id))
        })?;
        let b = partition.bucket_of(&doc.id).ok_or_else(|| {
            Error::Config(format!("document '{}' has no bucket assignment", doc.id))
        })?;
        let len = doc.tokens.len() as f64;
        lens.push(len);
        svals.push(s);
        sum_len[b] += len;
        sum_score[b] += s;
        counts[b] += 1;
    }
    let rho = spearman(&lens, &svals)?;
    let means = |sums: &[f64]| -> Vec<f64> {
        sums.iter()
            .zip(&counts)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect()
    };
    Ok(BiasReport {
        spearman_len_score: rho,
        n_documents: corpus.len(),
        bucket_count: q,
        bucket_mean_lengths: means(&sum_len),
        bucket_mean_scores: means(&sum_score),
        bucket_sizes: counts,
        min_len_applied: None,
    })
}

/// Keep only documents with at least `min_len` tokens. Returns the corpus
/// plus a flag that is true when nothing survived (a warning, not an
/// error).
pub fn length_subsample(corpus: &Corpus, min_len: usize) -> Result<(Corpus, bool)> {
    let kept: Vec<_> = corpus
        .docs()
        .iter()
        .filter(|d| d.tokens.len() >= min_len)
        .cloned()
        .collect();
    let emptied = kept.is_empty() && !corpus.is_empty();
    if emptied {
        log::warn!("length_subsample(min_len = {min_len}) removed every document");
    }
    Ok((Corpus::from_documents(kept)?, emptied))
}
