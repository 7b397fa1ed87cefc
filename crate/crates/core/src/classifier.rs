//! The binary quality classifier: L2-regularized logistic regression trained
//! by deterministic full-batch gradient descent with Armijo backtracking,
//! with the regularization strength chosen on a held-out split.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::hash::derive_seed;

/// Provenance of a trained model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainMeta {
    pub n_per_class: usize,
    pub holdout_accuracy: f64,
    pub iterations: usize,
}

/// Linear log-odds model over embeddings; scores live strictly in (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct QualityClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub train_meta: TrainMeta,
}

/// Training configuration. `n_per_class` rows are sampled from each class
/// with the config seed, so the training set is exactly balanced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_per_class: usize,
    pub lambda_grid: Vec<f64>,
    pub holdout_fraction: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_per_class: 2000,
            lambda_grid: default_lambda_grid(),
            holdout_fraction: 0.2,
            max_iters: 5000,
            tol: 1e-8,
            seed: 0,
        }
    }
}

/// 13 regularization strengths log-spaced over [1e-6, 1e2].
pub fn default_lambda_grid() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-6.0 + 8.0 * i as f64 / 12.0)).collect()
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda grid must be nonempty".into()));
        }
        if self.lambda_grid.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::Config("lambda grid entries must be finite and ≥ 0".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "holdout fraction must lie in (0,1), got {}",
                self.holdout_fraction
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tol must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be ≥ 1".into()));
        }
        let h = (self.holdout_fraction * self.n_per_class as f64).round() as usize;
        if h == 0 || h >= self.n_per_class {
            return Err(Error::Config(format!(
                "n_per_class {} with holdout fraction {} leaves an empty split",
                self.n_per_class, self.holdout_fraction
            )));
        }
        Ok(())
    }
}

/// Numerically stable sigmoid.
#[inline]
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable log(1 + e^u).
#[inline]
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

const SCORE_FLOOR: f64 = f64::MIN_POSITIVE;
const SCORE_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

impl QualityClassifier {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn linear(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score input vector".into()));
        }
        let z = self
            .weights
            .iter()
            .zip(x)
            .fold(self.bias, |acc, (w, v)| acc + w * v);
        Ok(z)
    }

    /// Quality score logistic(wᵀx + b), clamped into the open interval (0,1).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.linear(x)?).clamp(SCORE_FLOOR, SCORE_CEIL))
    }

    /// Log-odds wᵀx + b, the model's estimate of the log density ratio.
    /// Computed from the linear form, never back through the sigmoid.
    pub fn log_odds(&self, x: &[f64]) -> Result<f64> {
        self.linear(x)
    }

    pub fn score_row(&self, m: &EmbeddingMatrix, i: usize) -> Result<f64> {
        self.score(&m.row_f64(i))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            dim: self.weights.len(),
            weights: self.weights.clone(),
            bias: self.bias,
            lambda: self.lambda,
            train_meta: self.train_meta.clone(),
        };
        serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Format(format!("serialize model: {e}")))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(s).map_err(|e| Error::Format(format!("parse model: {e}")))?;
        if file.dim != file.weights.len() {
            return Err(Error::Format(format!(
                "model declares dim {} but has {} weights",
                file.dim,
                file.weights.len()
            )));
        }
        if file.weights.iter().any(|w| !w.is_finite()) || !file.bias.is_finite() {
            return Err(Error::NonFinite("model weights".into()));
        }
        Ok(QualityClassifier {
            weights: file.weights,
            bias: file.bias,
            lambda: file.lambda,
            train_meta: file.train_meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = self.to_json()?;
        atomic_write(path, |w| {
            use std::io::Write as _;
            writeln!(w, "{json}").map_err(|e| Error::io(path, e))
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        QualityClassifier::from_json(&s)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    dim: usize,
    weights: Vec<f64>,
    bias: f64,
    lambda: f64,
    train_meta: TrainMeta,
}

/// One logistic-regression fit at a fixed λ.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Objective value after each iteration; non-increasing by construction.
    pub loss_trace: Vec<f64>,
}

struct Design {
    /// Row-major n×d feature block.
    x: Vec<f64>,
    /// Labels in {−1, +1}.
    y: Vec<f64>,
    n: usize,
    d: usize,
}

impl Design {
    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }
}

/// Objective (mean softplus(−y·z) + (λ/2)‖w‖²; bias unregularized) and its
/// gradient in one data pass. The parameter vector is `w` followed by the
/// bias.
fn value_and_grad(design: &Design, theta: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let d = design.d;
    let (w, b) = (&theta[..d], theta[d]);
    let mut total = 0.0;
    let mut grad = vec![0f64; d + 1];
    for i in 0..design.n {
        let row = design.row(i);
        let z = row.iter().zip(w).fold(b, |acc, (x, wj)| acc + x * wj);
        let y = design.y[i];
        total += softplus(-y * z);
        // d/dz softplus(−y z) = −y·sigmoid(−y z)
        let coef = -y * sigmoid(-y * z);
        for (g, &x) in grad[..d].iter_mut().zip(row) {
            *g += coef * x;
        }
        grad[d] += coef;
    }
    let inv_n = 1.0 / design.n as f64;
    let mut reg = 0.0;
    for (g, &wj) in grad[..d].iter_mut().zip(w) {
        *g = *g * inv_n + lambda * wj;
        reg += wj * wj;
    }
    grad[d] *= inv_n;
    (total * inv_n + 0.5 * lambda * reg, grad)
}

/// Fit one λ by L-BFGS with Armijo backtracking. Deterministic, and the
/// recorded loss trace is non-increasing because only accepted (sufficiently
/// decreasing) steps update the iterate.
fn fit_logistic(design: &Design, lambda: f64, max_iters: usize, tol: f64) -> LogisticFit {
    const ARMIJO_C: f64 = 1e-4;
    const MEMORY: usize = 10;
    // Once accepted steps stop reducing the objective by more than the f64
    // rounding floor of the n-term mean, further iterations only random-walk
    // in noise; a few such steps in a row end the fit.
    const STALL_REL: f64 = 1e-14;
    const STALL_LIMIT: usize = 3;
    let d = design.d;
    let mut theta = vec![0f64; d + 1];
    let (mut f, mut grad) = value_and_grad(design, &theta, lambda);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut stalled = 0usize;
    let mut history: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> =
        std::collections::VecDeque::new();

    for iter in 0..max_iters {
        let g_inf = grad.iter().fold(0f64, |m, g| m.max(g.abs()));
        if g_inf <= tol {
            break;
        }

        // Two-loop recursion over the curvature history.
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, yv, rho) in history.iter().rev() {
            let a = rho * s.iter().zip(&dir).map(|(si, di)| si * di).sum::<f64>();
            for (di, yi) in dir.iter_mut().zip(yv) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, yv, _)) = history.back() {
            let sy: f64 = s.iter().zip(yv).map(|(si, yi)| si * yi).sum();
            let yy: f64 = yv.iter().map(|yi| yi * yi).sum();
            if sy > 0.0 && yy > 0.0 {
                let gamma = sy / yy;
                for di in dir.iter_mut() {
                    *di *= gamma;
                }
            }
        }
        for ((s, yv, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * yv.iter().zip(&dir).map(|(yi, di)| yi * di).sum::<f64>();
            for (di, si) in dir.iter_mut().zip(s) {
                *di += (a - beta) * si;
            }
        }

        // Fall back to steepest descent if curvature noise broke descent.
        let mut dg: f64 = dir.iter().zip(&grad).map(|(di, gi)| di * gi).sum();
        if !(dg < 0.0) {
            dir = grad.iter().map(|g| -g).collect();
            dg = -grad.iter().map(|g| g * g).sum::<f64>();
            history.clear();
        }

        let mut s = 1.0f64;
        let mut accepted = None;
        for _ in 0..60 {
            let theta_try: Vec<f64> =
                theta.iter().zip(&dir).map(|(t, di)| t + s * di).collect();
            let (f_try, g_try) = value_and_grad(design, &theta_try, lambda);
            if f_try <= f + ARMIJO_C * s * dg {
                accepted = Some((theta_try, f_try, g_try));
                break;
            }
            s *= 0.5;
        }
        iterations = iter + 1;
        match accepted {
            Some((theta_new, f_new, g_new)) => {
                let step_vec: Vec<f64> = theta_new
                    .iter()
                    .zip(&theta)
                    .map(|(a, b)| a - b)
                    .collect();
                let y_vec: Vec<f64> =
                    g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
                let sy: f64 = step_vec.iter().zip(&y_vec).map(|(a, b)| a * b).sum();
                if sy > 1e-300 {
                    if history.len() == MEMORY {
                        history.pop_front();
                    }
                    history.push_back((step_vec, y_vec, 1.0 / sy));
                }
                let decrease = f - f_new;
                theta = theta_new;
                f = f_new;
                grad = g_new;
                trace.push(f);
                if decrease <= STALL_REL * (1.0 + f.abs()) {
                    stalled += 1;
                    if stalled >= STALL_LIMIT {
                        break;
                    }
                } else {
                    stalled = 0;
                }
            }
            None => {
                // Line search stalled at numerical precision; nothing to gain.
                trace.push(f);
                break;
            }
        }
    }

    LogisticFit {
        weights: theta[..d].to_vec(),
        bias: theta[d],
        iterations,
        loss_trace: trace,
    }
}

/// Sample `n` distinct row indices from `total` with a seeded shuffle.
fn sample_indices(total: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(n);
    idx
}

/// Train the quality classifier.
///
/// For each λ in the grid, a logistic model is fit on a balanced train split
/// and evaluated on a balanced held-out split; the λ with the highest
/// held-out accuracy wins (ties go to the smallest λ). Deterministic given
/// `cfg.seed`.
pub fn train(
    hq: &EmbeddingMatrix,
    lq: &EmbeddingMatrix,
    cfg: &TrainConfig,
) -> Result<QualityClassifier> {
    cfg.validate()?;
    if hq.dim() != lq.dim() {
        return Err(Error::DimMismatch {
            expected: hq.dim(),
            got: lq.dim(),
        });
    }
    let n = cfg.n_per_class;
    for (name, m) in [("hq", hq), ("lq", lq)] {
        if m.n_rows() < n {
            return Err(Error::InsufficientData(format!(
                "{name} has {} rows, need n_per_class = {n}",
                m.n_rows()
            )));
        }
    }

    let hq_rows = sample_indices(hq.n_rows(), n, derive_seed(cfg.seed, 0));
    let lq_rows = sample_indices(lq.n_rows(), n, derive_seed(cfg.seed, 1));
    for (name, m, rows) in [("hq", hq, &hq_rows), ("lq", lq, &lq_rows)] {
        if let Some(&bad) = rows.iter().find(|&&i| m.is_degenerate_row(i)) {
            return Err(Error::Degenerate(format!(
                "{name} row for id {} is a zero embedding",
                m.ids()[bad]
            )));
        }
    }

    // Per-class holdout split.
    let h = (cfg.holdout_fraction * n as f64).round() as usize;
    let split = |rows: &[usize], stream: u64| -> (Vec<usize>, Vec<usize>) {
        let mut order: Vec<usize> = rows.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, stream)));
        let holdout = order[..h].to_vec();
        let train = order[h..].to_vec();
        (train, holdout)
    };
    let (hq_train, hq_hold) = split(&hq_rows, 2);
    let (lq_train, lq_hold) = split(&lq_rows, 3);

    let d = hq.dim();
    let pack = |hq_idx: &[usize], lq_idx: &[usize]| -> Design {
        let rows = hq_idx.len() + lq_idx.len();
        let mut x = Vec::with_capacity(rows * d);
        let mut y = Vec::with_capacity(rows);
        for &i in hq_idx {
            x.extend(hq.row(i).iter().map(|&v| v as f64));
            y.push(1.0);
        }
        for &i in lq_idx {
            x.extend(lq.row(i).iter().map(|&v| v as f64));
            y.push(-1.0);
        }
        Design { x, y, n: rows, d }
    };
    let train_set = pack(&hq_train, &lq_train);
    let hold_set = pack(&hq_hold, &lq_hold);

    let mut grid = cfg.lambda_grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let fits: Vec<(f64, LogisticFit, f64)> = grid
        .par_iter()
        .map(|&lambda| {
            let fit = fit_logistic(&train_set, lambda, cfg.max_iters, cfg.tol);
            let correct = (0..hold_set.n)
                .filter(|&i| {
                    let z = hold_set
                        .row(i)
                        .iter()
                        .zip(&fit.weights)
                        .fold(fit.bias, |acc, (x, w)| acc + x * w);
                    (z > 0.0) == (hold_set.y[i] > 0.0)
                })
                .count();
            let acc = correct as f64 / hold_set.n as f64;
            (lambda, fit, acc)
        })
        .collect();

    // Grid is ascending, so a strict comparison keeps the smallest λ on ties.
    let mut best: Option<&(f64, LogisticFit, f64)> = None;
    for cand in &fits {
        if best.is_none_or(|b| cand.2 > b.2) {
            best = Some(cand);
        }
    }
    let (lambda, fit, acc) = best.expect("nonempty lambda grid");

    Ok(QualityClassifier {
        weights: fit.weights.clone(),
        bias: fit.bias,
        lambda: *lambda,
        train_meta: TrainMeta {
            n_per_class: n,
            holdout_accuracy: *acc,
            iterations: fit.iterations,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn matrix_from(rows: Vec<Vec<f32>>, prefix: &str) -> EmbeddingMatrix {
        let ids = (0..rows.len()).map(|i| format!("{prefix}{i}")).collect();
        EmbeddingMatrix::from_rows(ids, rows, false).unwrap()
    }

    fn gaussian_rows(n: usize, mean: [f64; 2], seed: u64) -> Vec<Vec<f32>> {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z0: f64 = StandardNormal.sample(&mut rng);
                let z1: f64 = StandardNormal.sample(&mut rng);
                vec![(mean[0] + z0) as f32, (mean[1] + z1) as f32]
            })
            .collect()
    }

    #[test]
    fn separable_classes_reach_perfect_holdout_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let hq_rows: Vec<Vec<f32>> = (0..60)
            .map(|_| vec![2.0 + rng.random::<f32>(), rng.random::<f32>()])
            .collect();
        let lq_rows: Vec<Vec<f32>> = (0..60)
            .map(|_| vec![-2.0 - rng.random::<f32>(), rng.random::<f32>()])
            .collect();
        let cfg = TrainConfig {
            n_per_class: 60,
            lambda_grid: vec![1e-6],
            ..Default::default()
        };
        let model = train(
            &matrix_from(hq_rows, "h"),
            &matrix_from(lq_rows, "l"),
            &cfg,
        )
        .unwrap();
        assert_eq!(model.train_meta.holdout_accuracy, 1.0);
    }

    #[test]
    fn indistinguishable_classes_sit_near_chance() {
        let hq = matrix_from(gaussian_rows(2000, [0.0, 0.0], 11), "h");
        let lq = matrix_from(gaussian_rows(2000, [0.0, 0.0], 12), "l");
        let cfg = TrainConfig {
            n_per_class: 2000,
            ..Default::default()
        };
        let model = train(&hq, &lq, &cfg).unwrap();
        let acc = model.train_meta.holdout_accuracy;
        assert!((acc - 0.5).abs() <= 0.05, "accuracy {acc} too far from 0.5");
    }

    #[test]
    fn gaussian_classes_recover_bayes_direction() {
        // Bayes rule for N((1,0),I) vs N((0,0),I): w = (1,0), b = −0.5.
        let hq = matrix_from(gaussian_rows(5000, [1.0, 0.0], 21), "h");
        let lq = matrix_from(gaussian_rows(5000, [0.0, 0.0], 22), "l");
        let cfg = TrainConfig {
            n_per_class: 5000,
            lambda_grid: vec![1e-6],
            ..Default::default()
        };
        let model = train(&hq, &lq, &cfg).unwrap();
        let norm = (model.weights[0].powi(2) + model.weights[1].powi(2)).sqrt();
        let cosine = model.weights[0] / norm;
        assert!(cosine >= 0.98, "direction cosine {cosine} too small");
        assert!(
            (model.bias + 0.5).abs() <= 0.15,
            "bias {} too far from −0.5",
            model.bias
        );
    }

    #[test]
    fn score_matches_frozen_logistic_value() {
        let model = QualityClassifier {
            weights: vec![1.0, 0.0],
            bias: -0.5,
            lambda: 0.0,
            train_meta: TrainMeta {
                n_per_class: 0,
                holdout_accuracy: 0.0,
                iterations: 0,
            },
        };
        // logistic(1) to 16 digits, computed independently.
        let expected = 0.731_058_578_630_004_9;
        assert_abs_diff_eq!(
            model.score(&[1.5, 0.0]).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_model_scores_half_everywhere() {
        let model = QualityClassifier {
            weights: vec![0.0; 4],
            bias: 0.0,
            lambda: 1.0,
            train_meta: TrainMeta {
                n_per_class: 0,
                holdout_accuracy: 0.0,
                iterations: 0,
            },
        };
        for x in [[1.0, 2.0, -3.0, 0.5], [0.0, 0.0, 0.0, 0.0]] {
            assert_eq!(model.score(&x).unwrap(), 0.5);
            assert_eq!(model.log_odds(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn log_odds_and_score_are_an_inverse_pair() {
        let model = QualityClassifier {
            weights: vec![0.3, -1.2, 2.0],
            bias: 0.7,
            lambda: 0.1,
            train_meta: TrainMeta {
                n_per_class: 0,
                holdout_accuracy: 0.0,
                iterations: 0,
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let s = model.score(&x).unwrap();
            let z = model.log_odds(&x).unwrap();
            assert_abs_diff_eq!(sigmoid(z), s, epsilon = 1e-12);
        }
    }

    #[test]
    fn score_and_log_odds_rank_identically() {
        let model = QualityClassifier {
            weights: vec![0.9, -0.4],
            bias: -0.2,
            lambda: 0.0,
            train_meta: TrainMeta {
                n_per_class: 0,
                holdout_accuracy: 0.0,
                iterations: 0,
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let points: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.random::<f64>() * 6.0 - 3.0, rng.random::<f64>() * 6.0 - 3.0])
            .collect();
        let mut by_score: Vec<usize> = (0..points.len()).collect();
        let mut by_odds = by_score.clone();
        by_score.sort_by(|&a, &b| {
            model
                .score(&points[a])
                .unwrap()
                .partial_cmp(&model.score(&points[b]).unwrap())
                .unwrap()
        });
        by_odds.sort_by(|&a, &b| {
            model
                .log_odds(&points[a])
                .unwrap()
                .partial_cmp(&model.log_odds(&points[b]).unwrap())
                .unwrap()
        });
        assert_eq!(by_score, by_odds);
    }

    #[test]
    fn training_loss_is_non_increasing() {
        let hq = gaussian_rows(200, [0.7, 0.1], 31);
        let lq = gaussian_rows(200, [0.0, 0.0], 32);
        let d = Design {
            x: hq
                .iter()
                .chain(lq.iter())
                .flat_map(|r| r.iter().map(|&v| v as f64))
                .collect(),
            y: std::iter::repeat_n(1.0, 200)
                .chain(std::iter::repeat_n(-1.0, 200))
                .collect(),
            n: 400,
            d: 2,
        };
        let fit = fit_logistic(&d, 1e-3, 500, 1e-10);
        for pair in fit.loss_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-15, "loss increased: {pair:?}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let hq = matrix_from(gaussian_rows(300, [1.0, 0.0], 41), "h");
        let lq = matrix_from(gaussian_rows(300, [0.0, 0.0], 42), "l");
        let cfg = TrainConfig {
            n_per_class: 300,
            ..Default::default()
        };
        let m1 = train(&hq, &lq, &cfg).unwrap();
        let m2 = train(&hq, &lq, &cfg).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&m1.weights), bits(&m2.weights));
        assert_eq!(m1.bias.to_bits(), m2.bias.to_bits());
        assert_eq!(m1.lambda, m2.lambda);
    }

    #[test]
    fn train_rejects_bad_inputs() {
        let a = matrix_from(gaussian_rows(50, [0.0, 0.0], 51), "a");
        let b3 = EmbeddingMatrix::from_rows(
            (0..50).map(|i| format!("b{i}")).collect(),
            (0..50).map(|_| vec![0.1f32, 0.2, 0.3]).collect(),
            false,
        )
        .unwrap();
        let cfg = TrainConfig {
            n_per_class: 50,
            ..Default::default()
        };
        assert!(matches!(
            train(&a, &b3, &cfg),
            Err(Error::DimMismatch { .. })
        ));

        let small = matrix_from(gaussian_rows(10, [0.0, 0.0], 52), "s");
        assert!(matches!(
            train(&a, &small, &cfg),
            Err(Error::InsufficientData(_))
        ));

        let mut rows = gaussian_rows(50, [0.0, 0.0], 53);
        rows[7] = vec![0.0, 0.0];
        let degen = matrix_from(rows, "d");
        assert!(matches!(train(&a, &degen, &cfg), Err(Error::Degenerate(_))));
    }

    #[test]
    fn lambda_ties_break_toward_smaller() {
        // Perfectly separable data: every λ small enough reaches accuracy 1,
        // so the smallest grid value must win.
        let hq_rows: Vec<Vec<f32>> = (0..40).map(|i| vec![3.0 + (i % 5) as f32 * 0.1]).collect();
        let lq_rows: Vec<Vec<f32>> = (0..40).map(|i| vec![-3.0 - (i % 5) as f32 * 0.1]).collect();
        let cfg = TrainConfig {
            n_per_class: 40,
            lambda_grid: vec![1e-3, 1e-4, 1e-2],
            ..Default::default()
        };
        let model = train(
            &matrix_from(hq_rows, "h"),
            &matrix_from(lq_rows, "l"),
            &cfg,
        )
        .unwrap();
        assert_eq!(model.lambda, 1e-4);
        assert_eq!(model.train_meta.holdout_accuracy, 1.0);
    }

    #[test]
    fn model_json_round_trip_and_dim_check() {
        let model = QualityClassifier {
            weights: vec![0.25, -1.5, 3.0],
            bias: 0.125,
            lambda: 0.01,
            train_meta: TrainMeta {
                n_per_class: 10,
                holdout_accuracy: 0.875,
                iterations: 42,
            },
        };
        let json = model.to_json().unwrap();
        let back = QualityClassifier::from_json(&json).unwrap();
        assert_eq!(back, model);

        let tampered = json.replace("\"dim\": 3", "\"dim\": 4");
        assert!(matches!(
            QualityClassifier::from_json(&tampered),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn score_validates_input() {
        let model = QualityClassifier {
            weights: vec![1.0, 2.0],
            bias: 0.0,
            lambda: 0.0,
            train_meta: TrainMeta {
                n_per_class: 0,
                holdout_accuracy: 0.0,
                iterations: 0,
            },
        };
        assert!(matches!(
            model.score(&[1.0]),
            Err(Error::DimMismatch { .. })
        ));
        assert!(matches!(
            model.score(&[f64::NAN, 0.0]),
            Err(Error::NonFinite(_))
        ));
        // Extreme inputs stay strictly inside (0,1).
        let s = model.score(&[1e6, 1e6]).unwrap();
        assert!(s > 0.0 && s < 1.0);
        let s = model.score(&[-1e6, -1e6]).unwrap();
        assert!(s > 0.0 && s < 1.0);
    }
}
