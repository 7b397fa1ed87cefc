//! Seeded synthetic-data generators used by the test and benchmark
//! fixtures: a Markov-chain corpus whose token order carries signal, a
//! length-confounded two-class corpus pair, and embedding matrices drawn
//! from Gaussian mixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Tokenizer};
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::hash::derive_seed;
use crate::synthlab::GaussianMixtureSpec;

/// Configuration for the Markov corpus.
#[derive(Debug, Clone)]
pub struct MarkovCorpusConfig {
    pub n_docs: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Number of word types in the chain.
    pub n_states: usize,
    /// Probability of following the chain instead of jumping uniformly.
    pub order_strength: f64,
    pub seed: u64,
}

impl Default for MarkovCorpusConfig {
    fn default() -> Self {
        MarkovCorpusConfig {
            n_docs: 400,
            min_len: 40,
            max_len: 120,
            n_states: 48,
            order_strength: 0.85,
            seed: 0,
        }
    }
}

/// Generate a corpus from a first-order Markov chain over `n_states` word
/// types: from state s, with probability `order_strength` move to one of
/// four preferred successors of s, otherwise jump uniformly. Word order is
/// therefore learnable — and destroyed by token permutation.
pub fn markov_corpus(cfg: &MarkovCorpusConfig, tokenizer: &Tokenizer) -> Result<Corpus> {
    if cfg.n_docs == 0 || cfg.n_states < 8 {
        return Err(Error::Config(
            "markov corpus needs ≥ 1 document and ≥ 8 states".into(),
        ));
    }
    if cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(Error::Config(format!(
            "bad length range [{}, {}]",
            cfg.min_len, cfg.max_len
        )));
    }
    if !(0.0..=1.0).contains(&cfg.order_strength) {
        return Err(Error::Domain(format!(
            "order_strength must be in [0,1], got {}",
            cfg.order_strength
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s = cfg.n_states;
    let pairs: Vec<(String, String)> = (0..cfg.n_docs)
        .map(|i| {
            let len = rng.random_range(cfg.min_len..=cfg.max_len);
            let mut state = rng.random_range(0..s);
            let mut words = Vec::with_capacity(len);
            for _ in 0..len {
                words.push(format!("t{state:03}"));
                state = if rng.random::<f64>() < cfg.order_strength {
                    // Preferred successors: a fixed affine pattern of s.
                    let which = rng.random_range(0..4usize);
                    (state * 7 + 3 + which) % s
                } else {
                    rng.random_range(0..s)
                };
            }
            (format!("mk-{i:06}"), words.join(" "))
        })
        .collect();
    Corpus::from_texts(pairs, tokenizer)
}

/// Configuration for the length-confounded class pair.
#[derive(Debug, Clone)]
pub struct LengthConfoundConfig {
    pub n_per_class: usize,
    /// Token-count range of curated (positive) documents.
    pub hq_len: (usize, usize),
    /// Token-count range of pool (negative) documents.
    pub lq_len: (usize, usize),
    /// Size of the vocabulary shared by both classes.
    pub shared_vocab: usize,
    /// Extra class-specific word types per class.
    pub class_vocab: usize,
    /// Probability a token comes from the shared vocabulary.
    pub shared_prob: f64,
    pub seed: u64,
}

impl Default for LengthConfoundConfig {
    fn default() -> Self {
        LengthConfoundConfig {
            n_per_class: 3000,
            hq_len: (20, 220),
            lq_len: (120, 420),
            shared_vocab: 1200,
            class_vocab: 120,
            shared_prob: 0.94,
            seed: 0,
        }
    }
}

fn confounded_class(
    prefix: &str,
    n: usize,
    len_range: (usize, usize),
    class_tag: usize,
    cfg: &LengthConfoundConfig,
    tokenizer: &Tokenizer,
    seed: u64,
) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(String, String)> = (0..n)
        .map(|i| {
            let len = rng.random_range(len_range.0..=len_range.1);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    if rng.random::<f64>() < cfg.shared_prob {
                        // Zipf-ish shared vocabulary: squared uniform index
                        // concentrates mass on early types.
                        let u: f64 = rng.random();
                        let idx = ((u * u) * cfg.shared_vocab as f64) as usize;
                        format!("s{:05}", idx.min(cfg.shared_vocab - 1))
                    } else {
                        let idx = rng.random_range(0..cfg.class_vocab);
                        format!("c{class_tag}x{idx:04}")
                    }
                })
                .collect();
            (format!("{prefix}-{i:06}"), words.join(" "))
        })
        .collect();
    Corpus::from_texts(pairs, tokenizer)
}

/// Two-class corpus pair where the positive class is systematically
/// shorter but topically almost identical: most of the separating signal
/// available to a classifier is document length, with a thin genuine
/// topical signal left over after length matching.
pub fn length_confounded_pair(
    cfg: &LengthConfoundConfig,
    tokenizer: &Tokenizer,
) -> Result<(Corpus, Corpus)> {
    if cfg.n_per_class == 0 || cfg.shared_vocab == 0 || cfg.class_vocab == 0 {
        return Err(Error::Config("empty class or vocabulary".into()));
    }
    if cfg.hq_len.0 == 0 || cfg.hq_len.0 > cfg.hq_len.1 || cfg.lq_len.0 == 0 || cfg.lq_len.0 > cfg.lq_len.1
    {
        return Err(Error::Config("bad length ranges".into()));
    }
    if !(0.0..=1.0).contains(&cfg.shared_prob) {
        return Err(Error::Domain(format!(
            "shared_prob must be in [0,1], got {}",
            cfg.shared_prob
        )));
    }
    let hq = confounded_class(
        "hq",
        cfg.n_per_class,
        cfg.hq_len,
        0,
        cfg,
        tokenizer,
        derive_seed(cfg.seed, 0),
    )?;
    let lq = confounded_class(
        "lq",
        cfg.n_per_class,
        cfg.lq_len,
        1,
        cfg,
        tokenizer,
        derive_seed(cfg.seed, 1),
    )?;
    Ok((hq, lq))
}

/// Draw `n` rows from a Gaussian mixture as an (unnormalized) embedding
/// matrix with ids `{prefix}-{i}`.
pub fn gaussian_matrix(
    spec: &GaussianMixtureSpec,
    n: usize,
    seed: u64,
    prefix: &str,
) -> Result<EmbeddingMatrix> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InsufficientData("need ≥ 1 sample row".into()));
    }
    let samples = spec.sample(n, seed);
    let ids: Vec<String> = (0..n).map(|i| format!("{prefix}-{i:06}")).collect();
    let rows: Vec<Vec<f32>> = samples
        .into_iter()
        .map(|x| x.into_iter().map(|v| v as f32).collect())
        .collect();
    EmbeddingMatrix::from_rows(ids, rows, false)
}
