//! A deliberately budget-limited language model: a linear softmax over
//! hashed context features, trained by a fixed number of SGD steps.
//!
//! The model exists to *measure* datasets, not to be good: a fixed
//! optimization budget makes training loss sensitive to how well-conditioned
//! the data is, which is exactly the signal the conditioning matrices need.

use std::fs::File;
use std::io::{BufReader, Read as IoRead, Write as IoWrite};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::hash::{fnv1a64_extend, splitmix64, FNV_OFFSET};

/// Magic prefix of the binary model format.
pub const LM_MAGIC: &[u8; 6] = b"QFLM\0\x01";

/// L2 norm at which batch gradients are clipped.
pub const GRAD_CLIP_NORM: f64 = 5.0;

/// Hash marker for out-of-document context positions.
const PAD_TOKEN: u64 = u64::MAX;

/// Training configuration; the step budget is the defining quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LMConfig {
    #[serde(default = "default_vocab")]
    pub vocab_size: u32,
    #[serde(default = "default_context_window")]
    pub context_window: usize,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_step_size")]
    pub step_size: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_vocab() -> u32 {
    4096
}
fn default_context_window() -> usize {
    3
}
fn default_feature_dim() -> usize {
    8192
}
fn default_steps() -> usize {
    20_000
}
fn default_batch_size() -> usize {
    64
}
fn default_step_size() -> f64 {
    0.05
}

impl Default for LMConfig {
    fn default() -> Self {
        LMConfig {
            vocab_size: default_vocab(),
            context_window: default_context_window(),
            feature_dim: default_feature_dim(),
            steps: default_steps(),
            batch_size: default_batch_size(),
            step_size: default_step_size(),
            seed: 0,
        }
    }
}

impl LMConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config(format!(
                "vocab_size must be ≥ 2, got {}",
                self.vocab_size
            )));
        }
        if self.steps < 1 {
            return Err(Error::Config("steps must be ≥ 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be ≥ 1".into()));
        }
        // Feature 0 is the always-on bias; context features need ≥ 1 slot.
        if self.feature_dim < 2 {
            return Err(Error::Config(format!(
                "feature_dim must be ≥ 2, got {}",
                self.feature_dim
            )));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::Config(format!(
                "step_size must be positive and finite, got {}",
                self.step_size
            )));
        }
        Ok(())
    }
}

/// Trained model: weight matrix (feature_dim × vocab) plus the per-step
/// training-loss trace.
#[derive(Debug, Clone)]
pub struct LMModel {
    pub config: LMConfig,
    /// Row-major: weights[f * vocab + v].
    pub weights: Vec<f32>,
    pub loss_trace: Vec<f64>,
}

/// Hash one (offset, token) context slot into a feature index ≥ 1.
fn context_feature(offset: usize, token: u64, feature_dim: usize) -> usize {
    let mut h = FNV_OFFSET;
    h = fnv1a64_extend(h, &(offset as u64).to_le_bytes());
    h = fnv1a64_extend(h, &token.to_le_bytes());
    1 + (splitmix64(h) % (feature_dim as u64 - 1)) as usize
}

/// Active feature indices for predicting position `t` of `tokens`:
/// the bias feature plus one hashed slot per context position.
fn features_at(tokens: &[u32], t: usize, cfg: &LMConfig, out: &mut Vec<usize>) {
    out.clear();
    out.push(0);
    for j in 1..=cfg.context_window {
        let tok = if t >= j { tokens[t - j] as u64 } else { PAD_TOKEN ^ j as u64 };
        out.push(context_feature(j, tok, cfg.feature_dim));
    }
}

impl LMModel {
    /// All-zero model (the uniform predictive distribution).
    pub fn zero(config: LMConfig) -> Result<Self> {
        config.validate()?;
        let n = config.feature_dim * config.vocab_size as usize;
        Ok(LMModel {
            weights: vec![0.0; n],
            config,
            loss_trace: Vec::new(),
        })
    }

    fn logits_into(&self, feats: &[usize], logits: &mut [f64]) {
        let v = self.config.vocab_size as usize;
        logits.fill(0.0);
        for &f in feats {
            let row = &self.weights[f * v..(f + 1) * v];
            for (l, &w) in logits.iter_mut().zip(row) {
                *l += w as f64;
            }
        }
    }

    /// −log p(tokens[t] | context), in nats.
    fn xent_at(&self, tokens: &[u32], t: usize, feats: &mut Vec<usize>, logits: &mut [f64]) -> f64 {
        features_at(tokens, t, &self.config, feats);
        self.logits_into(feats, logits);
        let target = tokens[t] as usize;
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
        lse - logits[target]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, |w| {
            w.write_all(LM_MAGIC).map_err(|e| Error::io(path, e))?;
            let c = &self.config;
            let mut head = Vec::with_capacity(64);
            head.extend_from_slice(&c.vocab_size.to_le_bytes());
            head.extend_from_slice(&(c.context_window as u64).to_le_bytes());
            head.extend_from_slice(&(c.feature_dim as u64).to_le_bytes());
            head.extend_from_slice(&(c.steps as u64).to_le_bytes());
            head.extend_from_slice(&(c.batch_size as u64).to_le_bytes());
            head.extend_from_slice(&c.step_size.to_le_bytes());
            head.extend_from_slice(&c.seed.to_le_bytes());
            w.write_all(&head).map_err(|e| Error::io(path, e))?;
            let mut buf = Vec::with_capacity(self.weights.len() * 4);
            for &x in &self.weights {
                buf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&buf).map_err(|e| Error::io(path, e))?;
            w.write_all(&(self.loss_trace.len() as u64).to_le_bytes())
                .map_err(|e| Error::io(path, e))?;
            let mut tbuf = Vec::with_capacity(self.loss_trace.len() * 8);
            for &x in &self.loss_trace {
                tbuf.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&tbuf).map_err(|e| Error::io(path, e))?;
            Ok(())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
        let fail = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            if pos + n > bytes.len() {
                return Err(fail("truncated model file"));
            }
            let s = &bytes[pos..pos + n];
            pos += n;
            Ok(s)
        };
        if take(6)? != LM_MAGIC {
            return Err(fail("bad magic; not a model file"));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());
        let f64_at = |b: &[u8]| f64::from_le_bytes(b.try_into().unwrap());
        let config = LMConfig {
            vocab_size: u32_at(take(4)?),
            context_window: u64_at(take(8)?) as usize,
            feature_dim: u64_at(take(8)?) as usize,
            steps: u64_at(take(8)?) as usize,
            batch_size: u64_at(take(8)?) as usize,
            step_size: f64_at(take(8)?),
            seed: u64_at(take(8)?),
        };
        config.validate().map_err(|e| fail(&format!("invalid stored config: {e}")))?;
        let n = config.feature_dim * config.vocab_size as usize;
        let wbytes = take(n * 4)?;
        let weights: Vec<f32> = wbytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(fail("non-finite weights"));
        }
        let tlen = u64_at(take(8)?) as usize;
        let tbytes = take(tlen * 8)?;
        let loss_trace: Vec<f64> = tbytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if pos != bytes.len() {
            return Err(fail("trailing bytes after model payload"));
        }
        Ok(LMModel {
            config,
            weights,
            loss_trace,
        })
    }
}

/// Write the per-step training-loss trace as CSV (step, loss).
pub fn export_loss_trace_csv(model: &LMModel, path: &Path) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(w, "step,loss").map_err(|e| Error::io(path, e))?;
        for (i, loss) in model.loss_trace.iter().enumerate() {
            writeln!(w, "{i},{loss}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    })
}

/// Token positions of a corpus addressed by a flat index: doc offsets plus
/// total count.
struct PositionIndex<'a> {
    docs: Vec<&'a [u32]>,
    offsets: Vec<u64>,
    total: u64,
}

impl<'a> PositionIndex<'a> {
    fn build(corpus: &'a Corpus, vocab: u32) -> Result<Self> {
        let mut docs = Vec::new();
        let mut offsets = Vec::new();
        let mut total = 0u64;
        for d in corpus.docs() {
            if let Some(&bad) = d.tokens.iter().find(|&&t| t >= vocab) {
                return Err(Error::Domain(format!(
                    "document '{}' holds token id {bad} ≥ vocab_size {vocab}; retokenize with a matching vocab",
                    d.id
                )));
            }
            if d.tokens.is_empty() {
                continue;
            }
            docs.push(d.tokens.as_slice());
            offsets.push(total);
            total += d.tokens.len() as u64;
        }
        if total == 0 {
            return Err(Error::InsufficientData(
                "corpus has no token positions".into(),
            ));
        }
        Ok(PositionIndex {
            docs,
            offsets,
            total,
        })
    }

    fn locate(&self, flat: u64) -> (&'a [u32], usize) {
        let di = self.offsets.partition_point(|&o| o <= flat) - 1;
        (self.docs[di], (flat - self.offsets[di]) as usize)
    }
}

/// Train for exactly `cfg.steps` SGD steps on next-token cross-entropy.
/// Positions are sampled uniformly with replacement; the learning rate
/// decays linearly; batch gradients are clipped to L2 norm 5. There is no
/// early stopping: the budget is the measurement.
pub fn train_lm(corpus: &Corpus, cfg: &LMConfig) -> Result<LMModel> {
    cfg.validate()?;
    let index = PositionIndex::build(corpus, cfg.vocab_size)?;
    let v = cfg.vocab_size as usize;
    let mut model = LMModel::zero(cfg.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let max_rows = cfg.batch_size * (cfg.context_window + 1);
    let mut rows = vec![0.0f64; max_rows * v];
    let mut slot_features: Vec<usize> = Vec::with_capacity(max_rows);
    let mut slot_of: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    let mut logits = vec![0.0f64; v];
    let mut feats: Vec<usize> = Vec::new();
    let mut trace = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        // Clear only the rows used last step.
        for slot in 0..slot_features.len() {
            rows[slot * v..(slot + 1) * v].fill(0.0);
        }
        slot_features.clear();
        slot_of.clear();
        let mut batch_loss = 0.0;

        for _ in 0..cfg.batch_size {
            let flat = rng.random_range(0..index.total);
            let (tokens, t) = index.locate(flat);
            features_at(tokens, t, cfg, &mut feats);
            model.logits_into(&feats, &mut logits);
            let target = tokens[t] as usize;
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for l in logits.iter_mut() {
                *l = (*l - max).exp();
                sum += *l;
            }
            batch_loss += sum.ln() - (logits[target].ln());
            // logits now holds exp(l − max); convert to probabilities and
            // scatter (p − onehot) into the gradient row of each feature.
            for &f in &feats {
                let slot = *slot_of.entry(f).or_insert_with(|| {
                    slot_features.push(f);
                    slot_features.len() - 1
                });
                let row = &mut rows[slot * v..(slot + 1) * v];
                for (r, &e) in row.iter_mut().zip(logits.iter()) {
                    *r += e / sum;
                }
                row[target] -= 1.0;
            }
        }

        let inv_b = 1.0 / cfg.batch_size as f64;
        let mut norm_sq = 0.0;
        for slot in 0..slot_features.len() {
            for r in &mut rows[slot * v..(slot + 1) * v] {
                *r *= inv_b;
                norm_sq += *r * *r;
            }
        }
        let norm = norm_sq.sqrt();
        let clip = if norm > GRAD_CLIP_NORM {
            GRAD_CLIP_NORM / norm
        } else {
            1.0
        };
        let lr = cfg.step_size * (1.0 - step as f64 / cfg.steps as f64);
        for (slot, &f) in slot_features.iter().enumerate() {
            let row = &rows[slot * v..(slot + 1) * v];
            let wrow = &mut model.weights[f * v..(f + 1) * v];
            for (w, &g) in wrow.iter_mut().zip(row) {
                *w = (*w as f64 - lr * clip * g) as f32;
            }
        }
        trace.push(batch_loss * inv_b);
    }

    if trace.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("training-loss trace".into()));
    }
    model.loss_trace = trace;
    Ok(model)
}

/// Mean next-token cross-entropy over every position of the corpus, in
/// nats per token. Parallel over documents with a deterministic reduction.
pub fn eval_xent(model: &LMModel, corpus: &Corpus) -> Result<f64> {
    let index = PositionIndex::build(corpus, model.config.vocab_size)?;
    let per_doc: Vec<(f64, u64)> = index
        .docs
        .par_iter()
        .map(|tokens| {
            let v = model.config.vocab_size as usize;
            let mut logits = vec![0.0f64; v];
            let mut feats = Vec::new();
            let mut sum = 0.0;
            for t in 0..tokens.len() {
                sum += model.xent_at(tokens, t, &mut feats, &mut logits);
            }
            (sum, tokens.len() as u64)
        })
        .collect();
    let mut total = 0.0;
    let mut count = 0u64;
    for (s, c) in per_doc {
        total += s;
        count += c;
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tokenizer;
    use tempfile::tempdir;

    fn tiny_cfg() -> LMConfig {
        LMConfig {
            vocab_size: 32,
            context_window: 2,
            feature_dim: 64,
            steps: 400,
            batch_size: 16,
            step_size: 0.05,
            seed: 7,
        }
    }

    fn corpus_of(texts: &[&str], vocab: u32) -> Corpus {
        let tok = Tokenizer::new(vocab).unwrap();
        let pairs: Vec<(String, String)> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| (format!("d{i:04}"), t.to_string()))
            .collect();
        Corpus::from_texts(pairs, &tok).unwrap()
    }

    #[test]
    fn zero_model_scores_exactly_ln_v() {
        let cfg = tiny_cfg();
        let model = LMModel::zero(cfg.clone()).unwrap();
        let corpus = corpus_of(&["a b c d e", "f g h"], cfg.vocab_size);
        let xent = eval_xent(&model, &corpus).unwrap();
        assert_eq!(xent, (cfg.vocab_size as f64).ln());
    }

    #[test]
    fn one_token_language_is_memorized() {
        let cfg = LMConfig {
            steps: 2600,
            step_size: 0.1,
            ..tiny_cfg()
        };
        let text = "tok ".repeat(200);
        let corpus = corpus_of(&[text.trim()], cfg.vocab_size);
        let model = train_lm(&corpus, &cfg).unwrap();
        assert!(
            *model.loss_trace.last().unwrap() <= 0.01,
            "final training loss {}",
            model.loss_trace.last().unwrap()
        );
        let xent = eval_xent(&model, &corpus).unwrap();
        assert!(xent <= 0.01, "eval xent {xent}");
    }

    #[test]
    fn zero_steps_is_a_config_error() {
        let cfg = LMConfig {
            steps: 0,
            ..tiny_cfg()
        };
        let corpus = corpus_of(&["a b"], 32);
        assert!(matches!(
            train_lm(&corpus, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let cfg = tiny_cfg();
        let corpus = corpus_of(&["a b c a b c a", "x y z x y"], cfg.vocab_size);
        let m1 = train_lm(&corpus, &cfg).unwrap();
        let m2 = train_lm(&corpus, &cfg).unwrap();
        let bits = |m: &LMModel| m.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&m1), bits(&m2));
        assert_eq!(
            m1.loss_trace.iter().map(|l| l.to_bits()).collect::<Vec<_>>(),
            m2.loss_trace.iter().map(|l| l.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn loss_trace_has_budget_length_and_stays_finite() {
        let cfg = tiny_cfg();
        let corpus = corpus_of(&["p q r s t u v w", "q p q p q"], cfg.vocab_size);
        let model = train_lm(&corpus, &cfg).unwrap();
        assert_eq!(model.loss_trace.len(), cfg.steps);
        assert!(model.loss_trace.iter().all(|l| l.is_finite()));
        assert!(model.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let cfg = tiny_cfg();
        let corpus = Corpus::from_documents(vec![]).unwrap();
        assert!(train_lm(&corpus, &cfg).is_err());
        let model = LMModel::zero(cfg).unwrap();
        assert!(eval_xent(&model, &corpus).is_err());
    }

    #[test]
    fn oversized_token_ids_are_rejected() {
        let cfg = tiny_cfg();
        // Tokenized with a larger vocab than the model expects.
        let corpus = corpus_of(&["alpha beta gamma delta"], 1 << 20);
        let has_big = corpus.docs()[0].tokens.iter().any(|&t| t >= cfg.vocab_size);
        if has_big {
            assert!(matches!(train_lm(&corpus, &cfg), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn model_roundtrips_through_binary_file() {
        let cfg = tiny_cfg();
        let corpus = corpus_of(&["m n o m n o", "o n m"], cfg.vocab_size);
        let model = train_lm(&corpus, &cfg).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.bin");
        model.save(&path).unwrap();
        let loaded = LMModel::load(&path).unwrap();
        assert_eq!(loaded.config, model.config);
        assert_eq!(
            loaded.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
            model.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(loaded.loss_trace, model.loss_trace);
    }

    #[test]
    fn corrupt_model_files_are_rejected() {
        let cfg = tiny_cfg();
        let model = LMModel::zero(cfg).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("model.bin");
        model.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let truncated = dir.path().join("trunc.bin");
        std::fs::write(&truncated, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(LMModel::load(&truncated), Err(Error::Format { .. })));

        let trailing = dir.path().join("trail.bin");
        let mut extra = bytes.clone();
        extra.extend_from_slice(b"xx");
        std::fs::write(&trailing, &extra).unwrap();
        assert!(matches!(LMModel::load(&trailing), Err(Error::Format { .. })));

        let badmagic = dir.path().join("magic.bin");
        let mut bm = bytes.clone();
        bm[0] ^= 0xFF;
        std::fs::write(&badmagic, &bm).unwrap();
        assert!(matches!(LMModel::load(&badmagic), Err(Error::Format { .. })));
    }

    #[test]
    fn training_reduces_loss_on_structured_text() {
        let cfg = tiny_cfg();
        // Deterministic cyclic language: fully predictable from 1 token of
        // context, so even the tiny budget should beat uniform by a lot.
        let text = "a b c d e f g h ".repeat(60);
        let corpus = corpus_of(&[text.trim()], cfg.vocab_size);
        let model = train_lm(&corpus, &cfg).unwrap();
        let xent = eval_xent(&model, &corpus).unwrap();
        let uniform = (cfg.vocab_size as f64).ln();
        assert!(
            xent < 0.5 * uniform,
            "expected large improvement over uniform {uniform}, got {xent}"
        );
    }

    #[test]
    fn loss_trace_csv_is_written() {
        let cfg = LMConfig {
            steps: 5,
            ..tiny_cfg()
        };
        let corpus = corpus_of(&["a b a b a b"], cfg.vocab_size);
        let model = train_lm(&corpus, &cfg).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        export_loss_trace_csv(&model, &path).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        let mut lines = body.lines();
        assert_eq!(lines.next(), Some("step,loss"));
        assert_eq!(lines.count(), 5);
    }
}
