//! Corpus ingestion, tokenization, held-out splitting, and the Perm(k)
//! order-destruction transform.
//!
//! Documents travel as JSON-lines records with a required `id` and `text`
//! and an optional string-valued `meta` map. Token ids are always derived
//! from `text` by the active [`Tokenizer`], so text and tokens cannot drift
//! apart across transforms.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::hash::fnv1a64;

/// Default token id space of the hashing tokenizer.
pub const DEFAULT_VOCAB_SIZE: u32 = 32_768;

/// Meta key recording the token count at ingestion time.
pub const META_SEQ_LEN: &str = "seq_len";

/// One text record flowing through the pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Token ids; always the tokenizer output for `text`. Not serialized.
    #[serde(skip)]
    pub tokens: Vec<u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl Document {
    pub fn token_len(&self) -> usize {
        self.tokens.len()
    }
}

/// An ordered collection of documents with unique non-empty ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
}

impl Corpus {
    /// Build a corpus from documents, enforcing the id invariants.
    pub fn from_documents(docs: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            if doc.id.is_empty() {
                return Err(Error::Degenerate(format!("document {i} has an empty id")));
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: doc.id.clone(),
                    line: i + 1,
                });
            }
        }
        Ok(Corpus { docs })
    }

    /// Convenience constructor from `(id, text)` pairs.
    pub fn from_texts<I, S, T>(pairs: I, tokenizer: &Tokenizer) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let docs = pairs
            .into_iter()
            .map(|(id, text)| {
                let text = text.into();
                let tokens = tokenizer.tokenize(&text);
                let mut meta = BTreeMap::new();
                meta.insert(META_SEQ_LEN.to_string(), tokens.len().to_string());
                Document {
                    id: id.into(),
                    text,
                    tokens,
                    meta,
                }
            })
            .collect();
        Corpus::from_documents(docs)
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.docs.iter()
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.docs
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }
}

/// Whitespace-split + 64-bit FNV-1a hashing tokenizer over a fixed id space.
#[derive(Debug, Clone, Copy)]
pub struct Tokenizer {
    vocab_size: u32,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer {
            vocab_size: DEFAULT_VOCAB_SIZE,
        }
    }
}

impl Tokenizer {
    pub fn new(vocab_size: u32) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::Config("tokenizer vocab size must be ≥ 1".into()));
        }
        Ok(Tokenizer { vocab_size })
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    /// Deterministically map text to token ids in `[0, vocab_size)`.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        text.split_whitespace()
            .map(|w| (fnv1a64(w.as_bytes()) % self.vocab_size as u64) as u32)
            .collect()
    }
}

/// Parameters of the Perm(k) transform: each document's tokens are uniformly
/// permuted with probability `k`, independently per document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermSpec {
    pub k: f64,
    pub seed: u64,
}

/// Parse one JSON-lines record, tokenize it, and stamp `meta["seq_len"]`.
pub fn parse_document_line(
    line: &str,
    path: &Path,
    lineno: usize,
    tokenizer: &Tokenizer,
) -> Result<Document> {
    let mut doc: Document =
        serde_json::from_str(line).map_err(|e| Error::parse(path, lineno, e.to_string()))?;
    if doc.id.is_empty() {
        return Err(Error::parse(path, lineno, "empty document id"));
    }
    doc.tokens = tokenizer.tokenize(&doc.text);
    doc.meta
        .insert(META_SEQ_LEN.to_string(), doc.tokens.len().to_string());
    Ok(doc)
}

/// Load a JSON-lines corpus, preserving file order.
///
/// `limit` truncates after that many documents. Blank lines are skipped;
/// malformed lines and duplicate ids are hard errors carrying line numbers.
pub fn load_corpus(
    path: impl AsRef<Path>,
    limit: Option<usize>,
    tokenizer: &Tokenizer,
) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut docs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        if limit.is_some_and(|l| docs.len() >= l) {
            break;
        }
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let doc = parse_document_line(&line, path, lineno, tokenizer)?;
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId {
                id: doc.id,
                line: lineno,
            });
        }
        docs.push(doc);
    }
    Ok(Corpus { docs })
}

/// Serialize one document as a JSON line (stable key order).
pub fn document_json_line(doc: &Document) -> Result<String> {
    serde_json::to_string(doc).map_err(|e| Error::Format(format!("serialize document: {e}")))
}

/// Write a corpus as JSON-lines, atomically.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    atomic_write(path, |w| {
        for doc in corpus.iter() {
            let line = document_json_line(doc)?;
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    })
}

/// Apply Perm(k): permute each document's token order with probability `k`.
///
/// The per-document RNG is seeded by `spec.seed XOR fnv1a64(id)`, so results
/// do not depend on document order or sharding. One Bernoulli draw decides
/// whether to permute, then (if permuting) one uniform permutation is drawn
/// from the same stream. Token multisets are always preserved, and the text
/// is re-ordered word-for-word so tokens remain the tokenizer image of text.
pub fn perm_transform(corpus: &Corpus, spec: &PermSpec) -> Result<Corpus> {
    if !(spec.k >= 0.0 && spec.k <= 1.0) {
        return Err(Error::Domain(format!(
            "perm probability k must lie in [0,1], got {}",
            spec.k
        )));
    }
    let docs = corpus
        .docs
        .par_iter()
        .map(|doc| permute_document(doc, spec))
        .collect();
    Ok(Corpus { docs })
}

fn permute_document(doc: &Document, spec: &PermSpec) -> Document {
    let seed = spec.seed ^ fnv1a64(doc.id.as_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Bernoulli decision first, permutation second: the decision stream must
    // not shift when k changes from "never" to "sometimes".
    let permute = rng.random::<f64>() < spec.k;
    if !permute || doc.tokens.len() < 2 {
        return doc.clone();
    }
    let words: Vec<&str> = doc.text.split_whitespace().collect();
    debug_assert_eq!(words.len(), doc.tokens.len());
    let mut perm: Vec<usize> = (0..doc.tokens.len()).collect();
    perm.shuffle(&mut rng);
    let tokens: Vec<u32> = perm.iter().map(|&i| doc.tokens[i]).collect();
    let text = perm
        .iter()
        .map(|&i| words[i])
        .collect::<Vec<_>>()
        .join(" ");
    Document {
        id: doc.id.clone(),
        text,
        tokens,
        meta: doc.meta.clone(),
    }
}

/// Split into `(train, heldout)` with `|heldout| = round(fraction·n)`.
///
/// Selection is a seeded shuffle; both sides keep the original corpus order.
pub fn split_holdout(corpus: &Corpus, fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if corpus.is_empty() {
        return Err(Error::InsufficientData(
            "split_holdout requires a nonempty corpus".into(),
        ));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Domain(format!(
            "holdout fraction must lie in (0,1), got {fraction}"
        )));
    }
    let n = corpus.len();
    let target = (fraction * n as f64).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut heldout_mask = vec![false; n];
    for &i in idx.iter().take(target) {
        heldout_mask[i] = true;
    }
    let mut train = Vec::with_capacity(n - target);
    let mut heldout = Vec::with_capacity(target);
    for (i, doc) in corpus.docs.iter().enumerate() {
        if heldout_mask[i] {
            heldout.push(doc.clone());
        } else {
            train.push(doc.clone());
        }
    }
    Ok((Corpus { docs: train }, Corpus { docs: heldout }))
}
