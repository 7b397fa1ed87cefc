//! Selection predicates over scored corpora: top-k and exclusive-band
//! filtering, quantile bucket partitioning, and the likelihood-ratio
//! reweighting diagnostic.

use std::collections::BTreeMap;

use crate::calibrate::{SelectionMode, SelectionSpec};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Apply a selection spec to a corpus with per-document scores (parallel
/// slices, same order). Input document order is preserved.
pub fn select(corpus: &Corpus, scores: &[f64], spec: &SelectionSpec) -> Result<Corpus> {
    if scores.len() != corpus.len() {
        return Err(Error::DimMismatch {
            expected: corpus.len(),
            got: scores.len(),
        });
    }
    let mode = spec.mode()?;
    let docs = corpus
        .iter()
        .zip(scores)
        .filter(|(_, &s)| retained(mode, s))
        .map(|(d, _)| d.clone())
        .collect();
    Corpus::from_documents(docs)
}

/// Evaluate the selection predicate for one score.
pub fn retained(mode: SelectionMode, score: f64) -> bool {
    match mode {
        SelectionMode::Threshold(tau) => score >= tau,
        SelectionMode::Exclusive { lo, hi } => score >= lo && score < hi,
    }
}

/// Equal-count partition of scored documents into `q` buckets by score rank.
#[derive(Debug, Clone)]
pub struct BucketPartition {
    /// q+1 ascending values: bucket i spans scores observed in
    /// [boundaries[i], boundaries[i+1]] (both ends realized by members).
    pub boundaries: Vec<f64>,
    assignments: BTreeMap<String, usize>,
    pub bucket_count: usize,
    sizes: Vec<usize>,
}

impl BucketPartition {
    pub fn bucket_of(&self, id: &str) -> Option<usize> {
        self.assignments.get(id).copied()
    }

    pub fn assignments(&self) -> &BTreeMap<String, usize> {
        &self.assignments
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Partition `(id, score)` pairs into `q` equal-count buckets, ascending by
/// score. Bucket i holds ranks [⌊i·n/q⌋, ⌊(i+1)·n/q⌋); score ties are broken
/// by id so the partition is deterministic.
pub fn partition_quantiles(scored: &[(String, f64)], q: usize) -> Result<BucketPartition> {
    let n = scored.len();
    if q < 1 || q > n {
        return Err(Error::Config(format!(
            "bucket count must lie in [1, {n}], got {q}"
        )));
    }
    if let Some((id, s)) = scored.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s} for id {id}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scored[a]
            .1
            .partial_cmp(&scored[b].1)
            .unwrap()
            .then_with(|| scored[a].0.cmp(&scored[b].0))
    });

    let mut assignments = BTreeMap::new();
    let mut sizes = vec![0usize; q];
    let mut boundaries = Vec::with_capacity(q + 1);
    for b in 0..q {
        let start = b * n / q;
        let end = (b + 1) * n / q;
        boundaries.push(scored[order[start]].1);
        for &i in &order[start..end] {
            if assignments.insert(scored[i].0.clone(), b).is_some() {
                return Err(Error::DuplicateId {
                    id: scored[i].0.clone(),
                    line: 0,
                });
            }
            sizes[b] += 1;
        }
    }
    boundaries.push(scored[order[n - 1]].1);

    Ok(BucketPartition {
        boundaries,
        assignments,
        bucket_count: q,
        sizes,
    })
}

/// Reweighting diagnostic for the retained distribution: w(x) ∝ 1[r̂ ≥ τ]/r̂,
/// normalized to mean 1 over retained documents.
#[derive(Debug, Clone)]
pub struct ReweightDiag {
    pub tau: f64,
    /// (id, weight) in input order; weight is exactly 0 for dropped docs.
    pub weights: Vec<(String, f64)>,
    /// Estimate of Z = P(r̂ ≥ τ): retained count / total count.
    pub normalizer: f64,
    pub retained: usize,
}

/// Build the diagnostic from per-document log-odds (the stable route: the
/// ratio estimate is exp(log_odds), never score/(1−score) on rounded scores).
pub fn reweight_diag_from_log_odds(
    scored: &[(String, f64)],
    tau: f64,
) -> Result<ReweightDiag> {
    if scored.is_empty() {
        return Err(Error::InsufficientData("no documents to reweight".into()));
    }
    if !(tau > 0.0) || tau.is_nan() {
        return Err(Error::Domain(format!(
            "ratio threshold tau must be > 0, got {tau}"
        )));
    }
    let mut ratios = Vec::with_capacity(scored.len());
    for (id, lo) in scored {
        if !lo.is_finite() {
            return Err(Error::NumericGuard(format!(
                "log-odds for id {id} is {lo}"
            )));
        }
        let r = lo.exp();
        if r == 0.0 || !r.is_finite() {
            return Err(Error::NumericGuard(format!(
                "ratio estimate for id {id} underflows or overflows (log-odds {lo})"
            )));
        }
        ratios.push(r);
    }

    let mut raw: Vec<f64> = ratios
        .iter()
        .map(|&r| if r >= tau { 1.0 / r } else { 0.0 })
        .collect();
    let retained = raw.iter().filter(|&&w| w > 0.0).count();
    if retained > 0 {
        let mean = raw.iter().sum::<f64>() / retained as f64;
        for w in &mut raw {
            *w /= mean;
        }
    }
    let weights = scored
        .iter()
        .zip(&raw)
        .map(|((id, _), &w)| (id.clone(), w))
        .collect();
    Ok(ReweightDiag {
        tau,
        weights,
        normalizer: retained as f64 / scored.len() as f64,
        retained,
    })
}

/// Build the diagnostic from scores in (0,1): r̂ = s/(1−s). Scores exactly 0
/// or 1 trip the numeric guard (the ratio is undefined or infinite there).
pub fn reweight_diag_from_scores(scored: &[(String, f64)], tau: f64) -> Result<ReweightDiag> {
    let as_log_odds = scored
        .iter()
        .map(|(id, s)| {
            if !s.is_finite() || *s <= 0.0 || *s >= 1.0 {
                return Err(Error::NumericGuard(format!(
                    "score for id {id} is {s}; the ratio s/(1−s) needs s strictly in (0,1)"
                )));
            }
            Ok((id.clone(), (s / (1.0 - s)).ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    reweight_diag_from_log_odds(&as_log_odds, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tokenizer;
    use approx::assert_abs_diff_eq;

    fn decimal_corpus() -> (Corpus, Vec<f64>) {
        let tok = Tokenizer::default();
        let pairs: Vec<(String, String)> = (1..=10)
            .map(|i| (format!("d{i:02}"), format!("word{i}")))
            .collect();
        let corpus = Corpus::from_texts(pairs, &tok).unwrap();
        let scores: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        (corpus, scores)
    }

    #[test]
    fn threshold_select_counts() {
        let (corpus, scores) = decimal_corpus();
        let out = select(&corpus, &scores, &SelectionSpec::at_threshold(0.8)).unwrap();
        assert_eq!(out.len(), 3);
        let ids: Vec<_> = out.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["d08", "d09", "d10"]);
    }

    #[test]
    fn full_selection_returns_input() {
        let (corpus, scores) = decimal_corpus();
        let spec = SelectionSpec::top_k(1.0, 0.1);
        let out = select(&corpus, &scores, &spec).unwrap();
        assert_eq!(out.len(), corpus.len());
    }

    #[test]
    fn infinite_tau_selects_nothing() {
        let (corpus, scores) = decimal_corpus();
        let spec = SelectionSpec::top_k(0.0, f64::INFINITY);
        let out = select(&corpus, &scores, &spec).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn exclusive_band_is_half_open() {
        let (corpus, scores) = decimal_corpus();
        let out = select(&corpus, &scores, &SelectionSpec::exclusive(0.3, 0.6)).unwrap();
        let ids: Vec<_> = out.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["d03", "d04", "d05"]);
    }

    #[test]
    fn select_is_idempotent() {
        let (corpus, scores) = decimal_corpus();
        let spec = SelectionSpec::at_threshold(0.55);
        let once = select(&corpus, &scores, &spec).unwrap();
        let kept_scores: Vec<f64> = corpus
            .iter()
            .zip(&scores)
            .filter(|(d, _)| once.iter().any(|o| o.id == d.id))
            .map(|(_, &s)| s)
            .collect();
        let twice = select(&once, &kept_scores, &spec).unwrap();
        let ids = |c: &Corpus| c.iter().map(|d| d.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&once), ids(&twice));
    }

    #[test]
    fn select_rejects_mismatched_scores() {
        let (corpus, _) = decimal_corpus();
        assert!(matches!(
            select(&corpus, &[0.5], &SelectionSpec::at_threshold(0.1)),
            Err(Error::DimMismatch { .. })
        ));
    }

    fn scored_ids(n: usize) -> Vec<(String, f64)> {
        (0..n)
            .map(|i| (format!("d{i:04}"), (i as f64 + 1.0) / (n as f64 + 1.0)))
            .collect()
    }

    #[test]
    fn partition_exact_division() {
        let partition = partition_quantiles(&scored_ids(100), 10).unwrap();
        assert_eq!(partition.sizes(), &[10; 10]);
        assert_eq!(partition.boundaries.len(), 11);
    }

    #[test]
    fn partition_remainder_spreads() {
        let partition = partition_quantiles(&scored_ids(101), 10).unwrap();
        let sizes = partition.sizes();
        assert_eq!(sizes.iter().sum::<usize>(), 101);
        assert!(sizes.iter().all(|&s| s == 10 || s == 11));
    }

    #[test]
    fn buckets_are_rank_ordered() {
        let scored = scored_ids(100);
        let partition = partition_quantiles(&scored, 10).unwrap();
        let score_of = |id: &str| scored.iter().find(|(i, _)| i == id).unwrap().1;
        let in_bucket = |b: usize| {
            scored
                .iter()
                .filter(|(id, _)| partition.bucket_of(id) == Some(b))
                .map(|(id, _)| score_of(id))
                .collect::<Vec<_>>()
        };
        let b0 = in_bucket(0);
        let b9 = in_bucket(9);
        let max0 = b0.iter().cloned().fold(f64::MIN, f64::max);
        let min9 = b9.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min9 >= max0);
    }

    #[test]
    fn partition_tie_break_is_by_id() {
        let scored: Vec<(String, f64)> = ["c", "a", "d", "b"]
            .iter()
            .map(|id| (id.to_string(), 0.5))
            .collect();
        let partition = partition_quantiles(&scored, 2).unwrap();
        assert_eq!(partition.bucket_of("a"), Some(0));
        assert_eq!(partition.bucket_of("b"), Some(0));
        assert_eq!(partition.bucket_of("c"), Some(1));
        assert_eq!(partition.bucket_of("d"), Some(1));
    }

    #[test]
    fn partition_concatenation_reproduces_rank_sort() {
        let scored = scored_ids(37);
        let q = 5;
        let partition = partition_quantiles(&scored, q).unwrap();
        let mut by_bucket: Vec<(usize, String, f64)> = scored
            .iter()
            .map(|(id, s)| (partition.bucket_of(id).unwrap(), id.clone(), *s))
            .collect();
        by_bucket.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.2.partial_cmp(&b.2).unwrap()));
        let mut expect = scored.clone();
        expect.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let concat: Vec<f64> = by_bucket.iter().map(|(_, _, s)| *s).collect();
        let sorted: Vec<f64> = expect.iter().map(|(_, s)| *s).collect();
        assert_eq!(concat, sorted);
    }

    #[test]
    fn partition_rejects_bad_bucket_counts() {
        let scored = scored_ids(5);
        assert!(partition_quantiles(&scored, 0).is_err());
        assert!(partition_quantiles(&scored, 6).is_err());
        assert!(partition_quantiles(&scored, 5).is_ok());
    }

    #[test]
    fn constant_ratio_gives_unit_weights() {
        let scored: Vec<(String, f64)> = (0..8)
            .map(|i| (format!("d{i}"), 1.25f64.ln()))
            .collect();
        let diag = reweight_diag_from_log_odds(&scored, 1.0).unwrap();
        assert_eq!(diag.retained, 8);
        for (_, w) in &diag.weights {
            assert_abs_diff_eq!(*w, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(diag.normalizer, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_closed_form_weights() {
        // For densities N(1,1) over N(0,1): log r(x) = x − 0.5, so with τ = 1
        // the retained weights are ∝ exp(0.5 − x) on x ≥ 0.5.
        let xs: Vec<f64> = (0..20).map(|i| 0.5 + i as f64 * 0.1).collect();
        let scored: Vec<(String, f64)> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| (format!("d{i:02}"), x - 0.5))
            .collect();
        let diag = reweight_diag_from_log_odds(&scored, 1.0).unwrap();
        assert_eq!(diag.retained, xs.len());
        let w0 = diag.weights[0].1;
        for (i, &x) in xs.iter().enumerate() {
            let expect = w0 * (0.5 - x).exp() / (0.5 - xs[0]).exp();
            assert_abs_diff_eq!(diag.weights[i].1, expect, epsilon = 1e-12);
        }
        let mean: f64 =
            diag.weights.iter().map(|(_, w)| *w).sum::<f64>() / diag.retained as f64;
        assert_abs_diff_eq!(mean, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn just_below_tau_gets_weight_zero() {
        let scored = vec![
            ("keep".to_string(), 0.0f64),     // r = 1
            ("drop".to_string(), -1e-9f64),   // r just under 1
        ];
        let diag = reweight_diag_from_log_odds(&scored, 1.0).unwrap();
        assert_abs_diff_eq!(diag.weights[0].1, 1.0, epsilon = 1e-12);
        assert_eq!(diag.weights[1].1, 0.0);
        assert_eq!(diag.retained, 1);
        assert_abs_diff_eq!(diag.normalizer, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn weights_decrease_in_score_within_retained() {
        let scored: Vec<(String, f64)> = (0..50)
            .map(|i| (format!("d{i:02}"), -1.0 + i as f64 * 0.1))
            .collect();
        let diag = reweight_diag_from_log_odds(&scored, 0.8).unwrap();
        let retained: Vec<f64> = diag
            .weights
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(_, w)| *w)
            .collect();
        assert!(retained.len() > 2);
        for pair in retained.windows(2) {
            assert!(
                pair[1] < pair[0],
                "weights must strictly decrease in log-odds order"
            );
        }
    }

    #[test]
    fn numeric_guards_fire() {
        let exact_zero = vec![("a".to_string(), 0.0f64)];
        assert!(matches!(
            reweight_diag_from_scores(&exact_zero, 1.0),
            Err(Error::NumericGuard(_))
        ));
        let exact_one = vec![("a".to_string(), 1.0f64)];
        assert!(matches!(
            reweight_diag_from_scores(&exact_one, 1.0),
            Err(Error::NumericGuard(_))
        ));
        let overflow = vec![("a".to_string(), 1000.0f64)];
        assert!(matches!(
            reweight_diag_from_log_odds(&overflow, 1.0),
            Err(Error::NumericGuard(_))
        ));
        let underflow = vec![("a".to_string(), -1000.0f64)];
        assert!(matches!(
            reweight_diag_from_log_odds(&underflow, 1.0),
            Err(Error::NumericGuard(_))
        ));
    }

    #[test]
    fn score_route_matches_log_odds_route() {
        let los = [-0.4f64, 0.1, 0.9, 1.7];
        let from_lo: Vec<(String, f64)> = los
            .iter()
            .enumerate()
            .map(|(i, &lo)| (format!("d{i}"), lo))
            .collect();
        let from_scores: Vec<(String, f64)> = los
            .iter()
            .enumerate()
            .map(|(i, &lo)| (format!("d{i}"), crate::classifier::sigmoid(lo)))
            .collect();
        let a = reweight_diag_from_log_odds(&from_lo, 1.0).unwrap();
        let b = reweight_diag_from_scores(&from_scores, 1.0).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert_abs_diff_eq!(x.1, y.1, epsilon = 1e-9);
        }
    }
}
