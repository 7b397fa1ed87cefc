//! Analytic sandbox over Gaussian mixtures with known densities.
//!
//! Everything the selection pipeline estimates from data has a closed-form
//! or quadrature-exact counterpart here: Bayes scores, ratio thresholds for
//! a target selection fraction, KL divergences against the ratio-truncated
//! retained density, cluster-based importance resampling, and histogram KL
//! estimates from samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::sigmoid;
use crate::error::{Error, Result};
use crate::hash::derive_seed;

/// Default number of 1-D quadrature points (2^16).
pub const GRID_POINTS_1D: usize = 1 << 16;
/// Default per-axis points of the 2-D tensor grid (2^10).
pub const GRID_POINTS_2D: usize = 1 << 10;
/// How many standard deviations the quadrature box extends past each mean.
const GRID_SIGMAS: f64 = 10.0;

/// One mixture component with diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// A Gaussian mixture with diagonal component covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixtureSpec {
    /// Single 1-D Gaussian.
    pub fn gaussian1(mean: f64, var: f64) -> Self {
        GaussianMixtureSpec {
            components: vec![GaussianComponent {
                weight: 1.0,
                mean: vec![mean],
                var: vec![var],
            }],
        }
    }

    /// Single diagonal Gaussian of any dimension.
    pub fn gaussian(mean: Vec<f64>, var: Vec<f64>) -> Self {
        GaussianMixtureSpec {
            components: vec![GaussianComponent {
                weight: 1.0,
                mean,
                var,
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.first().map(|c| c.mean.len()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config("mixture needs ≥ 1 component".into()));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::Config("mixture dimension must be ≥ 1".into()));
        }
        let mut total = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(Error::Config(format!(
                    "component {i} weight must be positive, got {}",
                    c.weight
                )));
            }
            if c.mean.len() != dim || c.var.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: c.mean.len().max(c.var.len()),
                });
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::NonFinite(format!("component {i} mean")));
            }
            if c.var.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::Domain(format!(
                    "component {i} variance must be positive"
                )));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "component weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    /// Log density, stable under far-tail underflow (log-sum-exp over
    /// components).
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut terms = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let mut lp = c.weight.ln();
            for d in 0..x.len() {
                let z = x[d] - c.mean[d];
                lp += -0.5 * (2.0 * std::f64::consts::PI * c.var[d]).ln()
                    - z * z / (2.0 * c.var[d]);
            }
            terms.push(lp);
        }
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// Mixture mean vector.
    pub fn mean(&self) -> Vec<f64> {
        let dim = self.dim();
        let mut m = vec![0.0; dim];
        for c in &self.components {
            for d in 0..dim {
                m[d] += c.weight * c.mean[d];
            }
        }
        m
    }

    /// `n` i.i.d. seeded samples.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cum: Vec<f64> = self
            .components
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c.weight;
                Some(*acc)
            })
            .collect();
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                let ci = cum.partition_point(|&c| c < u).min(cum.len() - 1);
                let comp = &self.components[ci];
                comp.mean
                    .iter()
                    .zip(&comp.var)
                    .map(|(&m, &v)| {
                        let normal = Normal::new(m, v.sqrt()).expect("validated variance");
                        normal.sample(&mut rng)
                    })
                    .collect()
            })
            .collect()
    }

    /// 1-D convenience sampler.
    pub fn sample_1d(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if self.dim() != 1 {
            return Err(Error::DimMismatch {
                expected: 1,
                got: self.dim(),
            });
        }
        Ok(self.sample(n, seed).into_iter().map(|v| v[0]).collect())
    }
}

/// log p_HQ(x) − log p_LQ(x); the exact log likelihood ratio.
pub fn log_ratio(hq: &GaussianMixtureSpec, lq: &GaussianMixtureSpec, x: &[f64]) -> f64 {
    hq.log_density(x) - lq.log_density(x)
}

/// Bayes-optimal quality score p_HQ/(p_HQ + p_LQ), evaluated through log
/// densities so far-tail underflow cannot produce 0/0.
pub fn bayes_score(hq: &GaussianMixtureSpec, lq: &GaussianMixtureSpec, x: &[f64]) -> f64 {
    sigmoid(log_ratio(hq, lq, x))
}

/// Trapezoid quadrature over a 1-D interval or 2-D tensor box.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    axes: Vec<Axis>,
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Axis {
    fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    fn point(&self, i: usize) -> f64 {
        self.lo + self.step() * i as f64
    }

    fn weight(&self, i: usize) -> f64 {
        let edge = i == 0 || i == self.n - 1;
        self.step() * if edge { 0.5 } else { 1.0 }
    }
}

impl QuadratureGrid {
    pub fn dim1(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!("bad quadrature interval [{lo}, {hi}]")));
        }
        if n < 2 {
            return Err(Error::Config("quadrature needs ≥ 2 points".into()));
        }
        Ok(QuadratureGrid {
            axes: vec![Axis { lo, hi, n }],
        })
    }

    pub fn dim2(b0: (f64, f64), b1: (f64, f64), n_per_axis: usize) -> Result<Self> {
        let a = QuadratureGrid::dim1(b0.0, b0.1, n_per_axis)?;
        let b = QuadratureGrid::dim1(b1.0, b1.1, n_per_axis)?;
        Ok(QuadratureGrid {
            axes: vec![a.axes[0], b.axes[0]],
        })
    }

    /// Build a grid covering every component of every spec out to ±10σ.
    /// Limited to 1-D and 2-D (tensor quadrature).
    pub fn for_specs(specs: &[&GaussianMixtureSpec]) -> Result<Self> {
        let first = specs
            .first()
            .ok_or_else(|| Error::Config("no specs for quadrature bounds".into()))?;
        let dim = first.dim();
        for s in specs {
            s.validate()?;
            if s.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: s.dim(),
                });
            }
        }
        if dim == 0 || dim > 2 {
            return Err(Error::Config(format!(
                "quadrature supports 1-D and 2-D only, got {dim}-D"
            )));
        }
        let mut axes = Vec::with_capacity(dim);
        for d in 0..dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in specs {
                for c in &s.components {
                    let sd = c.var[d].sqrt();
                    lo = lo.min(c.mean[d] - GRID_SIGMAS * sd);
                    hi = hi.max(c.mean[d] + GRID_SIGMAS * sd);
                }
            }
            let n = if dim == 1 { GRID_POINTS_1D } else { GRID_POINTS_2D };
            axes.push(Axis { lo, hi, n });
        }
        Ok(QuadratureGrid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn point_and_weight(&self, flat: usize) -> (Vec<f64>, f64) {
        match self.axes.len() {
            1 => {
                let a = self.axes[0];
                (vec![a.point(flat)], a.weight(flat))
            }
            2 => {
                let (a, b) = (self.axes[0], self.axes[1]);
                let (i, j) = (flat / b.n, flat % b.n);
                (
                    vec![a.point(i), b.point(j)],
                    a.weight(i) * b.weight(j),
                )
            }
            _ => unreachable!("grids are 1-D or 2-D"),
        }
    }

    /// Trapezoid integral of `f`. Parallel over fixed-size blocks with a
    /// sequential final reduction, so the result is deterministic.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        const BLOCK: usize = 8192;
        let total = self.len();
        let blocks = total.div_ceil(BLOCK);
        let partials: Vec<f64> = (0..blocks)
            .into_par_iter()
            .map(|b| {
                let start = b * BLOCK;
                let end = (start + BLOCK).min(total);
                let mut acc = 0.0;
                for flat in start..end {
                    let (x, w) = self.point_and_weight(flat);
                    acc += w * f(&x);
                }
                acc
            })
            .collect();
        partials.iter().sum()
    }
}

/// A density the KL machinery can integrate: either an exact mixture or a
/// mixture truncated to a likelihood-ratio band and renormalized.
#[derive(Debug, Clone)]
pub enum Density {
    Mixture(GaussianMixtureSpec),
    /// base(x) · 1[lo ≤ r(x) < hi] / Z with r(x) = p_hq(x)/p_lq(x).
    RatioBand {
        base: GaussianMixtureSpec,
        hq: GaussianMixtureSpec,
        lq: GaussianMixtureSpec,
        lo: f64,
        hi: f64,
    },
}

impl Density {
    pub fn mixture(spec: &GaussianMixtureSpec) -> Self {
        Density::Mixture(spec.clone())
    }

    /// The retained density after thresholding: p_LQ restricted to r ≥ τ.
    pub fn cqf(hq: &GaussianMixtureSpec, lq: &GaussianMixtureSpec, tau: f64) -> Self {
        Density::RatioBand {
            base: lq.clone(),
            hq: hq.clone(),
            lq: lq.clone(),
            lo: tau,
            hi: f64::INFINITY,
        }
    }

    /// p_HQ restricted to a ratio band [lo, hi) — one "quality bucket" of
    /// the HQ distribution.
    pub fn hq_ratio_band(
        hq: &GaussianMixtureSpec,
        lq: &GaussianMixtureSpec,
        lo: f64,
        hi: f64,
    ) -> Self {
        Density::RatioBand {
            base: hq.clone(),
            hq: hq.clone(),
            lq: lq.clone(),
            lo,
            hi,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Density::Mixture(s) => s.dim(),
            Density::RatioBand { base, .. } => base.dim(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Density::Mixture(s) => s.validate(),
            Density::RatioBand { base, hq, lq, lo, hi } => {
                base.validate()?;
                hq.validate()?;
                lq.validate()?;
                if lo.is_nan() || hi.is_nan() || !(*lo < *hi) {
                    return Err(Error::Domain(format!(
                        "ratio band requires lo < hi, got [{lo}, {hi})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Unnormalized density at x.
    fn unnorm(&self, x: &[f64]) -> f64 {
        match self {
            Density::Mixture(s) => s.density(x),
            Density::RatioBand { base, hq, lq, lo, hi } => {
                let r = log_ratio(hq, lq, x).exp();
                if r >= *lo && r < *hi {
                    base.density(x)
                } else {
                    0.0
                }
            }
        }
    }

    /// Normalizer over the grid: exactly 1 for full mixtures (tail mass
    /// beyond ±10σ is < 1e-12), quadrature-computed for ratio bands.
    fn normalizer(&self, grid: &QuadratureGrid) -> Result<f64> {
        match self {
            Density::Mixture(_) => Ok(1.0),
            Density::RatioBand { .. } => {
                let z = grid.integrate(|x| self.unnorm(x));
                if !(z > 1e-300) || !z.is_finite() {
                    return Err(Error::Degenerate(format!(
                        "ratio band carries no mass on the grid (Z = {z})"
                    )));
                }
                Ok(z)
            }
        }
    }
}

/// KL result: the value plus the p-mass that fell where q is zero.
#[derive(Debug, Clone, Copy)]
pub struct KlOutcome {
    /// KL in nats; +∞ when `unmatched_mass` exceeds 1e-12.
    pub nats: f64,
    /// ∫ p over the region where q = 0.
    pub unmatched_mass: f64,
}

/// ∫ p log(p/q) by trapezoid quadrature. Ratio-band densities are
/// renormalized by their grid-computed Z. If p has non-negligible mass where
/// q vanishes, the result is the +∞ sentinel with the mismatched mass as a
/// diagnostic.
pub fn kl_divergence(p: &Density, q: &Density, grid: &QuadratureGrid) -> Result<KlOutcome> {
    p.validate()?;
    q.validate()?;
    if p.dim() != q.dim() || p.dim() != grid.dim() {
        return Err(Error::DimMismatch {
            expected: grid.dim(),
            got: p.dim().max(q.dim()),
        });
    }
    let zp = p.normalizer(grid)?;
    let zq = q.normalizer(grid)?;

    const BLOCK: usize = 8192;
    let total = grid.len();
    let blocks = total.div_ceil(BLOCK);
    let partials: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * BLOCK;
            let end = (start + BLOCK).min(total);
            let mut kl = 0.0;
            let mut missed = 0.0;
            for flat in start..end {
                let (x, w) = grid.point_and_weight(flat);
                let pv = p.unnorm(&x) / zp;
                if pv <= 1e-300 {
                    continue;
                }
                let qv = q.unnorm(&x) / zq;
                if qv <= 0.0 {
                    missed += w * pv;
                } else {
                    kl += w * pv * (pv.ln() - qv.ln());
                }
            }
            (kl, missed)
        })
        .collect();

    let mut nats = 0.0;
    let mut unmatched_mass = 0.0;
    for (kl, missed) in partials {
        nats += kl;
        unmatched_mass += missed;
    }
    if unmatched_mass > 1e-12 {
        log::warn!(
            "KL support mismatch: p-mass {unmatched_mass:.3e} where q = 0; reporting +inf"
        );
        return Ok(KlOutcome {
            nats: f64::INFINITY,
            unmatched_mass,
        });
    }
    // Quadrature can leave a vanishing negative residue on identical inputs.
    if nats < 0.0 && nats > -1e-9 {
        nats = 0.0;
    }
    Ok(KlOutcome {
        nats,
        unmatched_mass,
    })
}

/// r-value t such that the `spec`-mass of {x : r(x) ≤ t} equals `prob`,
/// where r = p_hq/p_lq. Computed by sorting grid masses by ratio.
pub fn ratio_quantile(
    spec: &GaussianMixtureSpec,
    hq: &GaussianMixtureSpec,
    lq: &GaussianMixtureSpec,
    prob: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&prob) || prob.is_nan() {
        return Err(Error::Domain(format!("quantile prob must be in [0,1], got {prob}")));
    }
    if prob == 0.0 {
        return Ok(0.0);
    }
    if prob == 1.0 {
        return Ok(f64::INFINITY);
    }
    let total_points = grid.len();
    let mut cells: Vec<(f64, f64)> = (0..total_points)
        .into_par_iter()
        .map(|flat| {
            let (x, w) = grid.point_and_weight(flat);
            (log_ratio(hq, lq, &x).exp(), w * spec.density(&x))
        })
        .collect();
    cells.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = cells.iter().map(|(_, m)| m).sum();
    let target = prob * total;
    let mut cum = 0.0;
    for (r, m) in &cells {
        cum += m;
        if cum >= target {
            return Ok(*r);
        }
    }
    Ok(cells.last().map(|(r, _)| *r).unwrap_or(f64::INFINITY))
}

/// Ratio threshold τ with LQ-mass k above it: P_LQ(r ≥ τ) = k.
pub fn cqf_tau_for_fraction(
    hq: &GaussianMixtureSpec,
    lq: &GaussianMixtureSpec,
    k: f64,
    grid: &QuadratureGrid,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&k) || k.is_nan() {
        return Err(Error::Domain(format!("selection fraction must be in [0,1], got {k}")));
    }
    if k == 0.0 {
        return Ok(f64::INFINITY);
    }
    if k == 1.0 {
        return Ok(0.0);
    }
    ratio_quantile(lq, hq, lq, 1.0 - k, grid)
}

/// Edges of `q` equal-mass ratio buckets of the HQ distribution:
/// `q+1` values from 0 to +∞.
pub fn hq_ratio_bucket_edges(
    hq: &GaussianMixtureSpec,
    lq: &GaussianMixtureSpec,
    q: usize,
    grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    if q < 1 {
        return Err(Error::Config("bucket count must be ≥ 1".into()));
    }
    let mut edges = Vec::with_capacity(q + 1);
    edges.push(0.0);
    for i in 1..q {
        edges.push(ratio_quantile(hq, hq, lq, i as f64 / q as f64, grid)?);
    }
    edges.push(f64::INFINITY);
    Ok(edges)
}

/// Fit a single diagonal Gaussian to a density by matching its quadrature
/// mean and per-dimension variance. This is the finite-capacity stand-in
/// for "a model trained on" that distribution: truncated densities get
/// smoothed into a full-support approximant, the way a parametric learner
/// would, which keeps downstream KLs finite.
pub fn moment_fit(d: &Density, grid: &QuadratureGrid) -> Result<GaussianMixtureSpec> {
    d.validate()?;
    if d.dim() != grid.dim() {
        return Err(Error::DimMismatch {
            expected: grid.dim(),
            got: d.dim(),
        });
    }
    let z = match d {
        Density::Mixture(_) => grid.integrate(|x| d.unnorm(x)),
        Density::RatioBand { .. } => d.normalizer(grid)?,
    };
    if !(z > 1e-300) {
        return Err(Error::Degenerate("density has no mass on the grid".into()));
    }
    let dim = d.dim();
    let mut mean = vec![0.0; dim];
    for (j, m) in mean.iter_mut().enumerate() {
        *m = grid.integrate(|x| x[j] * d.unnorm(x)) / z;
    }
    let mut var = vec![0.0; dim];
    for (j, v) in var.iter_mut().enumerate() {
        let mj = mean[j];
        *v = (grid.integrate(|x| (x[j] - mj).powi(2) * d.unnorm(x)) / z).max(1e-12);
    }
    Ok(GaussianMixtureSpec::gaussian(mean, var))
}

/// Gaussian capacity surrogate for the retained (CQF) density at τ.
pub fn cqf_gaussian_surrogate(
    hq: &GaussianMixtureSpec,
    lq: &GaussianMixtureSpec,
    tau: f64,
    grid: &QuadratureGrid,
) -> Result<GaussianMixtureSpec> {
    moment_fit(&Density::cqf(hq, lq, tau), grid)
}

/// k-means cluster model over LQ samples with per-cluster class masses.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub lq_mass: Vec<f64>,
    pub hq_mass: Vec<f64>,
}

/// Output of cluster-based importance resampling.
#[derive(Debug, Clone)]
pub struct CrispResult {
    pub model: ClusterModel,
    /// Per-LQ-sample weight, proportional to hq_mass/lq_mass of its cluster.
    pub weights: Vec<f64>,
    /// Cluster index of each LQ sample.
    pub assignments: Vec<usize>,
    /// |lq_samples| draws with replacement, proportional to weights.
    pub resampled: Vec<Vec<f64>>,
}

fn nearest_centroid(x: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, cent) in centroids.iter().enumerate() {
        let d: f64 = x
            .iter()
            .zip(cent)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Seeded k-means++ initialization.
fn kmeans_pp_init(samples: &[Vec<f64>], c: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = samples.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(c);
    centroids.push(samples[rng.random_range(0..n)].clone());
    let mut dist_sq: Vec<f64> = samples
        .iter()
        .map(|x| {
            x.iter()
                .zip(&centroids[0])
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect();
    while centroids.len() < c {
        let total: f64 = dist_sq.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a centroid; pick uniformly.
            rng.random_range(0..n)
        } else {
            let u: f64 = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in dist_sq.iter().enumerate() {
                cum += d;
                if cum >= u {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        let cent = samples[next].clone();
        for (i, x) in samples.iter().enumerate() {
            let d: f64 = x
                .iter()
                .zip(&cent)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < dist_sq[i] {
                dist_sq[i] = d;
            }
        }
        centroids.push(cent);
    }
    centroids
}

/// Cluster-based importance resampling: k-means (k-means++ init, exactly
/// 100 Lloyd iterations) on the LQ samples, per-cluster weights
/// hq_mass/lq_mass, then resampling with replacement.
pub fn crisp_resample(
    lq_samples: &[Vec<f64>],
    hq_samples: &[Vec<f64>],
    c: usize,
    seed: u64,
) -> Result<CrispResult> {
    if lq_samples.is_empty() || hq_samples.is_empty() {
        return Err(Error::InsufficientData(
            "crisp_resample needs nonempty LQ and HQ samples".into(),
        ));
    }
    if c < 1 || c > lq_samples.len() {
        return Err(Error::Config(format!(
            "cluster count must lie in [1, {}], got {c}",
            lq_samples.len()
        )));
    }
    let dim = lq_samples[0].len();
    if lq_samples.iter().chain(hq_samples).any(|x| x.len() != dim) {
        return Err(Error::DimMismatch { expected: dim, got: 0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut centroids = kmeans_pp_init(lq_samples, c, &mut rng);

    let mut assignments = vec![0usize; lq_samples.len()];
    for _iter in 0..100 {
        assignments = lq_samples
            .par_iter()
            .map(|x| nearest_centroid(x, &centroids))
            .collect();
        let mut sums = vec![vec![0.0; dim]; c];
        let mut counts = vec![0usize; c];
        for (x, &a) in lq_samples.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        for ci in 0..c {
            if counts[ci] > 0 {
                for (cent, s) in centroids[ci].iter_mut().zip(&sums[ci]) {
                    *cent = s / counts[ci] as f64;
                }
            }
            // Empty clusters keep their previous centroid.
        }
    }
    // Final assignment against the converged centroids.
    assignments = lq_samples
        .par_iter()
        .map(|x| nearest_centroid(x, &centroids))
        .collect();

    let mut lq_counts = vec![0usize; c];
    for &a in &assignments {
        lq_counts[a] += 1;
    }
    let hq_assign: Vec<usize> = hq_samples
        .par_iter()
        .map(|x| nearest_centroid(x, &centroids))
        .collect();
    let mut hq_counts = vec![0usize; c];
    for &a in &hq_assign {
        hq_counts[a] += 1;
    }
    let lq_mass: Vec<f64> = lq_counts
        .iter()
        .map(|&n| n as f64 / lq_samples.len() as f64)
        .collect();
    let hq_mass: Vec<f64> = hq_counts
        .iter()
        .map(|&n| n as f64 / hq_samples.len() as f64)
        .collect();

    let cluster_weight: Vec<f64> = lq_mass
        .iter()
        .zip(&hq_mass)
        .map(|(&l, &h)| if l > 0.0 { h / l } else { 0.0 })
        .collect();
    let weights: Vec<f64> = assignments.iter().map(|&a| cluster_weight[a]).collect();
    let total_w: f64 = weights.iter().sum();
    if !(total_w > 0.0) {
        return Err(Error::Degenerate(
            "all resampling weights are zero; the class samples do not overlap".into(),
        ));
    }

    let cum: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let mut draw_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let resampled: Vec<Vec<f64>> = (0..lq_samples.len())
        .map(|_| {
            let u: f64 = draw_rng.random::<f64>() * total_w;
            let i = cum.partition_point(|&cw| cw < u).min(cum.len() - 1);
            lq_samples[i].clone()
        })
        .collect();

    Ok(CrispResult {
        model: ClusterModel {
            centroids,
            lq_mass,
            hq_mass,
        },
        weights,
        assignments,
        resampled,
    })
}

/// Fixed-range 1-D histogram over [lo, hi); samples outside are dropped.
#[derive(Debug, Clone)]
pub struct Histogram1d {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub inside: u64,
    pub dropped: u64,
}

pub fn histogram_1d(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Histogram1d> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!("bad histogram range [{lo}, {hi})")));
    }
    if bins < 1 {
        return Err(Error::Config("histogram needs ≥ 1 bin".into()));
    }
    let mut counts = vec![0u64; bins];
    let mut inside = 0u64;
    let mut dropped = 0u64;
    let scale = bins as f64 / (hi - lo);
    for &x in samples {
        if x >= lo && x < hi {
            let b = ((x - lo) * scale) as usize;
            counts[b.min(bins - 1)] += 1;
            inside += 1;
        } else {
            dropped += 1;
        }
    }
    Ok(Histogram1d {
        lo,
        hi,
        counts,
        inside,
        dropped,
    })
}

impl Histogram1d {
    pub fn bin_edges(&self, b: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + b as f64 * w, self.lo + (b + 1) as f64 * w)
    }

    /// Smoothed bin probability (add-alpha over inside-range counts).
    pub fn smoothed_prob(&self, b: usize, alpha: f64) -> f64 {
        (self.counts[b] as f64 + alpha)
            / (self.inside as f64 + alpha * self.counts.len() as f64)
    }
}

/// Discrete KL between a mixture (binned by quadrature, renormalized over
/// the histogram range) and a smoothed sample histogram. With alpha > 0 the
/// estimate is always finite; with alpha = 0 an empty bin under p-mass
/// yields the +∞ sentinel.
pub fn kl_mixture_vs_histogram(
    p: &GaussianMixtureSpec,
    hist: &Histogram1d,
    alpha: f64,
) -> Result<f64> {
    p.validate()?;
    if p.dim() != 1 {
        return Err(Error::DimMismatch {
            expected: 1,
            got: p.dim(),
        });
    }
    if hist.inside == 0 {
        return Err(Error::Degenerate("histogram has no in-range samples".into()));
    }
    if !(alpha >= 0.0) {
        return Err(Error::Domain(format!("smoothing alpha must be ≥ 0, got {alpha}")));
    }
    let bins = hist.counts.len();
    let mut p_bins = Vec::with_capacity(bins);
    for b in 0..bins {
        let (a, z) = hist.bin_edges(b);
        let grid = QuadratureGrid::dim1(a, z, 65)?;
        p_bins.push(grid.integrate(|x| p.density(x)).max(0.0));
    }
    let p_total: f64 = p_bins.iter().sum();
    if !(p_total > 1e-300) {
        return Err(Error::Degenerate(
            "reference density has no mass on the histogram range".into(),
        ));
    }
    let mut kl = 0.0;
    for b in 0..bins {
        let pv = p_bins[b] / p_total;
        if pv <= 0.0 {
            continue;
        }
        let qv = hist.smoothed_prob(b, alpha);
        if qv <= 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += pv * (pv.ln() - qv.ln());
    }
    Ok(kl.max(0.0))
}

/// Flatten 1-D sample vectors.
pub fn samples_as_1d(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|v| {
            if v.len() == 1 {
                Ok(v[0])
            } else {
                Err(Error::DimMismatch {
                    expected: 1,
                    got: v.len(),
                })
            }
        })
        .collect()
}

/// Declarative sandbox scenario (JSON-friendly).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandboxScenario {
    pub hq: GaussianMixtureSpec,
    pub lq: GaussianMixtureSpec,
    pub k_grid: Vec<f64>,
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sample_size")]
    pub sample_size: usize,
    #[serde(default = "default_deciles")]
    pub deciles: usize,
    #[serde(default = "default_hist_bins")]
    pub hist_bins: usize,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
}

fn default_clusters() -> usize {
    64
}
fn default_sample_size() -> usize {
    100_000
}
fn default_deciles() -> usize {
    10
}
fn default_hist_bins() -> usize {
    128
}
fn default_smoothing() -> f64 {
    1.0
}

/// One output row of a sandbox run.
#[derive(Debug, Clone, Copy)]
pub struct SandboxRow {
    pub k: f64,
    /// Quadrature KL(HQ ‖ Gaussian surrogate of CQF(k)).
    pub kl_hq_cqf: f64,
    /// Quadrature KL(top HQ ratio bucket ‖ surrogate of CQF(k)).
    pub kl_top_decile: f64,
    /// Quadrature KL(bottom HQ ratio bucket ‖ surrogate of CQF(k)).
    pub kl_bottom_decile: f64,
    /// Histogram KL(HQ ‖ cluster-resampled LQ); identical across rows.
    pub kl_crisp: f64,
}

/// Run a full sandbox scenario over the k grid.
pub fn run_sandbox(sc: &SandboxScenario) -> Result<Vec<SandboxRow>> {
    sc.hq.validate()?;
    sc.lq.validate()?;
    if sc.k_grid.is_empty() {
        return Err(Error::Config("sandbox k grid is empty".into()));
    }
    for &k in &sc.k_grid {
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::Domain(format!(
                "sandbox selection fractions must lie in (0,1], got {k}"
            )));
        }
    }
    if sc.hq.dim() != 1 {
        return Err(Error::Config(
            "the packaged sandbox scenario runner is 1-D (histogram comparisons)".into(),
        ));
    }
    let grid = QuadratureGrid::for_specs(&[&sc.hq, &sc.lq])?;
    let edges = hq_ratio_bucket_edges(&sc.hq, &sc.lq, sc.deciles, &grid)?;
    let top = Density::hq_ratio_band(&sc.hq, &sc.lq, edges[sc.deciles - 1], edges[sc.deciles]);
    let bottom = Density::hq_ratio_band(&sc.hq, &sc.lq, edges[0], edges[1]);

    let lq_samples = sc.lq.sample(sc.sample_size, derive_seed(sc.seed, 0));
    let hq_samples = sc.hq.sample(sc.sample_size, derive_seed(sc.seed, 1));
    let crisp = crisp_resample(&lq_samples, &hq_samples, sc.clusters, derive_seed(sc.seed, 2))?;
    let resampled = samples_as_1d(&crisp.resampled)?;
    let axis_lo = grid.axes[0].lo;
    let axis_hi = grid.axes[0].hi;
    let hist = histogram_1d(&resampled, axis_lo, axis_hi, sc.hist_bins)?;
    let kl_crisp = kl_mixture_vs_histogram(&sc.hq, &hist, sc.smoothing)?;

    let hq_density = Density::mixture(&sc.hq);
    sc.k_grid
        .par_iter()
        .map(|&k| {
            let tau = cqf_tau_for_fraction(&sc.hq, &sc.lq, k, &grid)?;
            let surrogate = cqf_gaussian_surrogate(&sc.hq, &sc.lq, tau, &grid)?;
            let q = Density::mixture(&surrogate);
            Ok(SandboxRow {
                k,
                kl_hq_cqf: kl_divergence(&hq_density, &q, &grid)?.nats,
                kl_top_decile: kl_divergence(&top, &q, &grid)?.nats,
                kl_bottom_decile: kl_divergence(&bottom, &q, &grid)?.nats,
                kl_crisp,
            })
        })
        .collect()
}
