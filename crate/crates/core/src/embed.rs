//! Document embeddings: a signed hashed bag-of-n-grams embedder, a binary
//! on-disk matrix format for externally computed vectors, and PCA projection.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::hash::{fnv1a64_extend, splitmix64, FNV_OFFSET};

/// Magic prefix of the binary embedding file format.
pub const EMBEDDING_MAGIC: [u8; 8] = *b"QFEMB\0\0\x01";

/// Default embedding dimension.
pub const DEFAULT_EMBED_DIM: usize = 384;

/// Configuration of the hashed n-gram embedder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HashedEmbedderConfig {
    /// Output dimension (≥ 2).
    pub dim: usize,
    /// n-gram orders to hash (each ≥ 1); duplicates are ignored.
    pub ngram_orders: Vec<usize>,
    /// Seed mixed into every feature hash.
    pub seed: u64,
    /// L2-normalize each nonzero vector (default true).
    pub normalize: bool,
}

impl Default for HashedEmbedderConfig {
    fn default() -> Self {
        HashedEmbedderConfig {
            dim: DEFAULT_EMBED_DIM,
            ngram_orders: vec![1, 2],
            seed: 0,
            normalize: true,
        }
    }
}

impl HashedEmbedderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config(format!(
                "embedding dim must be ≥ 2, got {}",
                self.dim
            )));
        }
        if self.ngram_orders.is_empty() {
            return Err(Error::Config("ngram_orders must be nonempty".into()));
        }
        if self.ngram_orders.contains(&0) {
            return Err(Error::Config("ngram orders must be ≥ 1".into()));
        }
        Ok(())
    }

    fn sorted_orders(&self) -> Vec<usize> {
        let mut orders = self.ngram_orders.clone();
        orders.sort_unstable();
        orders.dedup();
        orders
    }
}

/// A single embedded document.
#[derive(Debug, Clone, PartialEq)]
pub struct DocEmbedding {
    pub vector: Vec<f32>,
    /// True when the vector is identically zero (empty document, or exact
    /// cancellation of signed features) and therefore cannot be normalized.
    pub degenerate: bool,
}

/// Map one n-gram to a bucket index and a sign in {−1, +1}.
fn ngram_bucket(seed: u64, gram: &[u32], dim: usize) -> (usize, f64) {
    let mut h = fnv1a64_extend(FNV_OFFSET, &seed.to_le_bytes());
    h = fnv1a64_extend(h, &(gram.len() as u64).to_le_bytes());
    for &t in gram {
        h = fnv1a64_extend(h, &t.to_le_bytes());
    }
    let h = splitmix64(h);
    let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
    let index = ((h >> 1) % dim as u64) as usize;
    (index, sign)
}

/// Embed one document as a (optionally L2-normalized) signed n-gram count
/// vector. Deterministic in (document tokens, config).
pub fn embed_document(doc: &Document, cfg: &HashedEmbedderConfig) -> Result<DocEmbedding> {
    cfg.validate()?;
    let mut acc = vec![0f64; cfg.dim];
    for order in cfg.sorted_orders() {
        if doc.tokens.len() < order {
            continue;
        }
        for gram in doc.tokens.windows(order) {
            let (idx, sign) = ngram_bucket(cfg.seed, gram, cfg.dim);
            acc[idx] += sign;
        }
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(DocEmbedding {
            vector: vec![0.0; cfg.dim],
            degenerate: true,
        });
    }
    let scale = if cfg.normalize { 1.0 / norm } else { 1.0 };
    Ok(DocEmbedding {
        vector: acc.iter().map(|&x| (x * scale) as f32).collect(),
        degenerate: false,
    })
}

/// Dense row-major embedding matrix keyed by document id.
#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    ids: Vec<String>,
    data: Vec<f32>,
    dim: usize,
    normalized: bool,
}

impl EmbeddingMatrix {
    /// Build from flat row-major data; validates shape and finiteness.
    pub fn new(ids: Vec<String>, data: Vec<f32>, dim: usize, normalized: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dim must be ≥ 1".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::DimMismatch {
                expected: ids.len() * dim,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "embedding entry at row {} col {}",
                pos / dim,
                pos % dim
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId {
                    id: id.clone(),
                    line: 0,
                });
            }
        }
        Ok(EmbeddingMatrix {
            ids,
            data,
            dim,
            normalized,
        })
    }

    /// Build from per-row vectors.
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f32>>, normalized: bool) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(1);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
        }
        let data = rows.into_iter().flatten().collect();
        EmbeddingMatrix::new(ids, data, dim, normalized)
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        self.row(i).iter().map(|&v| v as f64).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// A row is degenerate when it is identically zero.
    pub fn is_degenerate_row(&self, i: usize) -> bool {
        self.row(i).iter().all(|&v| v == 0.0)
    }

    pub fn degenerate_count(&self) -> usize {
        (0..self.n_rows())
            .filter(|&i| self.is_degenerate_row(i))
            .count()
    }
}

/// Embed a whole corpus in parallel; output row order matches corpus order.
pub fn embed_corpus(corpus: &Corpus, cfg: &HashedEmbedderConfig) -> Result<EmbeddingMatrix> {
    cfg.validate()?;
    let embedded: Vec<DocEmbedding> = corpus
        .docs()
        .par_iter()
        .map(|doc| embed_document(doc, cfg))
        .collect::<Result<_>>()?;
    let degenerate = embedded.iter().filter(|e| e.degenerate).count();
    if degenerate > 0 {
        log::warn!("{degenerate} degenerate (zero) embeddings out of {}", corpus.len());
    }
    let ids = corpus.iter().map(|d| d.id.clone()).collect();
    let mut data = Vec::with_capacity(corpus.len() * cfg.dim);
    for e in embedded {
        data.extend_from_slice(&e.vector);
    }
    EmbeddingMatrix::new(ids, data, cfg.dim, cfg.normalize)
}

/// Save a matrix in the binary embedding format (atomic write).
///
/// Layout: 8-byte magic, u32 LE row count, u32 LE dim, rows of dim f32 LE,
/// then each id as u16 LE length + UTF-8 bytes.
pub fn save_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if m.n_rows() > u32::MAX as usize || m.dim() > u32::MAX as usize {
        return Err(Error::Format("matrix too large for file format".into()));
    }
    for id in m.ids() {
        if id.len() > u16::MAX as usize {
            return Err(Error::Format(format!(
                "document id longer than 65535 bytes: {}...",
                &id[..32.min(id.len())]
            )));
        }
    }
    atomic_write(path, |w| {
        let io = |e: std::io::Error| Error::io(path, e);
        w.write_all(&EMBEDDING_MAGIC).map_err(io)?;
        w.write_all(&(m.n_rows() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&(m.dim() as u32).to_le_bytes()).map_err(io)?;
        for v in &m.data {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        for id in m.ids() {
            w.write_all(&(id.len() as u16).to_le_bytes()).map_err(io)?;
            w.write_all(id.as_bytes()).map_err(io)?;
        }
        Ok(())
    })
}

/// Load a matrix from the binary embedding format.
///
/// The `normalized` flag is not stored on disk; it is inferred by checking
/// row norms against 1 with a coarse tolerance.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut off = 0usize;

    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        if *off + n > bytes.len() {
            return Err(Error::Format(format!(
                "truncated embedding file {} (need {} bytes at offset {})",
                path.display(),
                n,
                off
            )));
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };

    let magic = take(&mut off, 8)?;
    if magic != EMBEDDING_MAGIC {
        return Err(Error::Format(format!(
            "bad magic in {}: expected QFEMB header",
            path.display()
        )));
    }
    let n = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(Error::Format("embedding file declares dim 0".into()));
    }
    let payload = n
        .checked_mul(dim)
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| Error::Format("embedding payload size overflows".into()))?;
    let raw = take(&mut off, payload)?;
    let data: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let len = u16::from_le_bytes(take(&mut off, 2)?.try_into().unwrap()) as usize;
        let raw_id = take(&mut off, len)?;
        let id = std::str::from_utf8(raw_id)
            .map_err(|e| Error::Format(format!("id is not UTF-8: {e}")))?;
        ids.push(id.to_string());
    }
    if off != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after embedding payload",
            bytes.len() - off
        )));
    }

    let normalized = data.chunks_exact(dim).all(|row| {
        let norm_sq: f64 = row.iter().map(|&v| (v as f64) * (v as f64)).sum();
        norm_sq == 0.0 || (norm_sq.sqrt() - 1.0).abs() < 1e-3
    }) && n > 0;
    EmbeddingMatrix::new(ids, data, dim, normalized)
}

/// PCA projection of an embedding matrix onto its top principal directions.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    /// Row-major n × out_dim projected coordinates.
    pub coords: Vec<f64>,
    pub out_dim: usize,
    /// Fraction of total variance carried by each kept direction,
    /// non-increasing, each in [0,1].
    pub explained: Vec<f64>,
}

impl PcaProjection {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.out_dim..(i + 1) * self.out_dim]
    }

    pub fn n_rows(&self) -> usize {
        self.coords.len() / self.out_dim.max(1)
    }
}

/// Project mean-centered rows onto the top `out_dim` eigenvectors of the
/// sample covariance. Eigenvector signs are fixed deterministically (the
/// largest-magnitude component is made positive).
pub fn pca_project(m: &EmbeddingMatrix, out_dim: usize) -> Result<PcaProjection> {
    let n = m.n_rows();
    let p = m.dim();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if out_dim == 0 || out_dim > p {
        return Err(Error::Config(format!(
            "PCA out_dim must lie in [1, {p}], got {out_dim}"
        )));
    }
    for i in 0..n {
        if m.is_degenerate_row(i) {
            return Err(Error::Degenerate(format!(
                "PCA input contains a zero row (id {})",
                m.ids()[i]
            )));
        }
    }

    let mut mean = vec![0f64; p];
    for row in m.rows() {
        for (a, &v) in mean.iter_mut().zip(row) {
            *a += v as f64;
        }
    }
    for a in &mut mean {
        *a /= n as f64;
    }

    let mut centered = DMatrix::<f64>::zeros(n, p);
    let mut total_sq = 0f64;
    for (i, row) in m.rows().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            centered[(i, j)] = v as f64 - mean[j];
            total_sq += (v as f64) * (v as f64);
        }
    }
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);

    let eig = cov.clone().symmetric_eigen();
    let trace: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    if trace <= total_sq / (n as f64 - 1.0) * 1e-24 + f64::MIN_POSITIVE {
        return Err(Error::Degenerate(
            "PCA input has rank 0 (all rows identical)".into(),
        ));
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut basis = DMatrix::<f64>::zeros(p, out_dim);
    let mut explained = Vec::with_capacity(out_dim);
    for (col, &src) in order.iter().take(out_dim).enumerate() {
        let mut v: DVector<f64> = eig.eigenvectors.column(src).into_owned();
        // Deterministic sign: flip so the largest-|component| is positive.
        let pivot = v
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| {
                a.abs()
                    .partial_cmp(&b.abs())
                    .unwrap()
                    .then(ib.cmp(ia))
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        basis.set_column(col, &v);
        explained.push((eig.eigenvalues[src].max(0.0) / trace).min(1.0));
    }

    let proj = centered * basis;
    let mut coords = Vec::with_capacity(n * out_dim);
    for i in 0..n {
        for j in 0..out_dim {
            coords.push(proj[(i, j)]);
        }
    }
    Ok(PcaProjection {
        coords,
        out_dim,
        explained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Tokenizer;
    use approx::assert_abs_diff_eq;

    fn doc(id: &str, text: &str) -> Document {
        let tok = Tokenizer::default();
        Document {
            id: id.into(),
            text: text.into(),
            tokens: tok.tokenize(text),
            meta: Default::default(),
        }
    }

    #[test]
    fn identical_documents_identical_vectors() {
        let cfg = HashedEmbedderConfig::default();
        let a = embed_document(&doc("a", "the quick brown fox"), &cfg).unwrap();
        let b = embed_document(&doc("b", "the quick brown fox"), &cfg).unwrap();
        assert_eq!(a.vector, b.vector);
        assert!(!a.degenerate);
    }

    #[test]
    fn nonempty_document_has_unit_norm() {
        let cfg = HashedEmbedderConfig::default();
        let e = embed_document(&doc("a", "alpha beta gamma delta"), &cfg).unwrap();
        let norm: f64 = e.vector.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn empty_document_is_degenerate_zero() {
        let cfg = HashedEmbedderConfig::default();
        let e = embed_document(&doc("a", ""), &cfg).unwrap();
        assert!(e.degenerate);
        assert!(e.vector.iter().all(|&v| v == 0.0));
        assert_eq!(e.vector.len(), cfg.dim);
    }

    #[test]
    fn unigram_embedding_is_permutation_invariant() {
        let cfg = HashedEmbedderConfig {
            ngram_orders: vec![1],
            ..Default::default()
        };
        let a = embed_document(&doc("a", "one two three four"), &cfg).unwrap();
        let b = embed_document(&doc("b", "four three two one"), &cfg).unwrap();
        assert_eq!(a.vector, b.vector);
    }

    #[test]
    fn bigram_embedding_sees_order() {
        let cfg = HashedEmbedderConfig {
            ngram_orders: vec![1, 2],
            ..Default::default()
        };
        let a = embed_document(&doc("a", "one two three four"), &cfg).unwrap();
        let b = embed_document(&doc("b", "four three two one"), &cfg).unwrap();
        assert_ne!(a.vector, b.vector);
    }

    #[test]
    fn unnormalized_counts_are_integers() {
        let cfg = HashedEmbedderConfig {
            dim: 16,
            ngram_orders: vec![1],
            seed: 0,
            normalize: false,
        };
        let e = embed_document(&doc("a", "x x"), &cfg).unwrap();
        let sum_abs: f32 = e.vector.iter().map(|v| v.abs()).sum();
        assert_eq!(sum_abs, 2.0, "two identical unigrams in one bucket");
    }

    #[test]
    fn config_validation() {
        let cfg = HashedEmbedderConfig {
            dim: 1,
            ..HashedEmbedderConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = HashedEmbedderConfig {
            ngram_orders: vec![],
            ..HashedEmbedderConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = HashedEmbedderConfig {
            ngram_orders: vec![0],
            ..HashedEmbedderConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn embed_corpus_preserves_order_and_ids() {
        let tok = Tokenizer::default();
        let corpus =
            Corpus::from_texts([("a", "x y"), ("b", ""), ("c", "z")], &tok).unwrap();
        let cfg = HashedEmbedderConfig {
            dim: 8,
            ..Default::default()
        };
        let m = embed_corpus(&corpus, &cfg).unwrap();
        assert_eq!(m.ids(), &["a", "b", "c"]);
        assert!(m.is_degenerate_row(1));
        assert_eq!(m.degenerate_count(), 1);
    }

    #[test]
    fn save_load_round_trip_is_bitwise() {
        let ids = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let rows = vec![
            vec![1.0f32, -2.5, 3.25, 0.125],
            vec![0.0, 0.5, -0.5, 9.75],
            vec![-1.0, 2.0, -3.0, 4.0],
        ];
        let m = EmbeddingMatrix::from_rows(ids, rows, false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        save_embeddings(&m, &path).unwrap();
        let loaded = load_embeddings(&path).unwrap();
        assert_eq!(loaded.ids(), m.ids());
        assert_eq!(loaded.dim(), 4);
        for i in 0..3 {
            let orig: Vec<u32> = m.row(i).iter().map(|v| v.to_bits()).collect();
            let back: Vec<u32> = loaded.row(i).iter().map(|v| v.to_bits()).collect();
            assert_eq!(orig, back, "row {i} must round-trip bitwise");
        }
        // Saving the loaded matrix reproduces the file byte-for-byte.
        let path2 = dir.path().join("emb2.bin");
        save_embeddings(&loaded, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOTMAGIC\x01\x00\x00\x00\x01\x00\x00\x00").unwrap();
        match load_embeddings(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_format_error() {
        let m = EmbeddingMatrix::from_rows(
            vec!["a".into()],
            vec![vec![1.0f32, 2.0, 3.0, 4.0]],
            false,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        save_embeddings(&m, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        // Drop the last 4 bytes of the float payload plus the id section.
        let cut = 8 + 4 + 4 + 4 * 3;
        std::fs::write(&path, &bytes[..cut]).unwrap();
        match load_embeddings(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("truncated")),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn load_infers_normalization() {
        let tok = Tokenizer::default();
        let corpus = Corpus::from_texts([("a", "p q r"), ("b", "s t")], &tok).unwrap();
        let cfg = HashedEmbedderConfig {
            dim: 8,
            ..Default::default()
        };
        let m = embed_corpus(&corpus, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        save_embeddings(&m, &path).unwrap();
        assert!(load_embeddings(&path).unwrap().normalized());
    }

    #[test]
    fn pca_line_data_explains_everything_with_first_axis() {
        // Points exactly on a line through a 5-D space.
        let dir_vec = [0.5f32, -0.25, 1.0, 0.0, 2.0];
        let rows: Vec<Vec<f32>> = (0..40)
            .map(|i| {
                let t = (i as f32 - 20.0) * 0.3 + 1.0;
                dir_vec.iter().map(|&d| d * t + 0.7).collect()
            })
            .collect();
        let ids = (0..40).map(|i| format!("p{i}")).collect();
        let m = EmbeddingMatrix::from_rows(ids, rows, false).unwrap();
        let proj = pca_project(&m, 2).unwrap();
        assert_abs_diff_eq!(proj.explained[0], 1.0, epsilon = 1e-9);
        assert!(proj.explained[1].abs() < 1e-9);
        // Projection columns are mean-centered.
        for j in 0..2 {
            let mean: f64 =
                (0..proj.n_rows()).map(|i| proj.row(i)[j]).sum::<f64>() / proj.n_rows() as f64;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn pca_rejects_rank_zero_and_bad_dims() {
        let rows = vec![vec![1.0f32, 2.0, 3.0]; 5];
        let ids = (0..5).map(|i| format!("p{i}")).collect();
        let m = EmbeddingMatrix::from_rows(ids, rows, false).unwrap();
        assert!(matches!(pca_project(&m, 2), Err(Error::Degenerate(_))));

        let one = EmbeddingMatrix::from_rows(vec!["a".into()], vec![vec![1.0, 0.0]], false)
            .unwrap();
        assert!(pca_project(&one, 1).is_err());

        let two = EmbeddingMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            false,
        )
        .unwrap();
        assert!(pca_project(&two, 3).is_err());
        assert!(pca_project(&two, 0).is_err());
    }

    #[test]
    fn pca_rejects_degenerate_rows() {
        let m = EmbeddingMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.0], vec![0.0, 0.0]],
            false,
        )
        .unwrap();
        assert!(matches!(pca_project(&m, 1), Err(Error::Degenerate(_))));
    }
}
