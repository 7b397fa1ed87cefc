//! Scaling-law fitting: L(N, D) = E + A/N^α + B/D^β.
//!
//! The fit minimizes a Huber loss between log-predicted and log-observed
//! loss over (log E, log A, log B, α, β), with a multi-start grid and a
//! small projected L-BFGS. Everything is deterministic: starts are
//! enumerated on a fixed grid and ties break toward the earlier start.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One training run: parameter count, token count, final loss (nats/token).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingObservation {
    pub n: f64,
    pub d: f64,
    pub loss: f64,
}

/// Fitted law parameters. All positive; `residual` is the mean Huber
/// objective in log space at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub e: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub residual: f64,
}

/// Fit controls.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Huber transition point on log residuals.
    pub robust_delta: f64,
    /// Starts per axis of the (α, β, E) grid (total starts = cubed).
    pub starts_per_axis: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            robust_delta: 1e-3,
            starts_per_axis: 5,
            max_iters: 300,
            grad_tol: 1e-12,
        }
    }
}

// Box constraints: scales live in [1e-12, 1e12] (log space), exponents in
// (0.01, 1.5) with a hair of clearance so the interval stays open.
const LOG_SCALE_MIN: f64 = -27.631_021_115_928_547; // ln 1e-12
const LOG_SCALE_MAX: f64 = 27.631_021_115_928_547; // ln 1e12
const EXP_MIN: f64 = 0.010_000_001;
const EXP_MAX: f64 = 1.499_999_9;

type Theta = [f64; 5]; // [logE, logA, logB, alpha, beta]

fn project(theta: &mut Theta) {
    for t in theta.iter_mut().take(3) {
        *t = t.clamp(LOG_SCALE_MIN, LOG_SCALE_MAX);
    }
    theta[3] = theta[3].clamp(EXP_MIN, EXP_MAX);
    theta[4] = theta[4].clamp(EXP_MIN, EXP_MAX);
}

fn huber(r: f64, delta: f64) -> f64 {
    let a = r.abs();
    if a <= delta {
        0.5 * r * r
    } else {
        delta * (a - 0.5 * delta)
    }
}

fn huber_deriv(r: f64, delta: f64) -> f64 {
    r.clamp(-delta, delta)
}

/// Precomputed per-observation logs.
struct Prepared {
    ln_n: Vec<f64>,
    ln_d: Vec<f64>,
    ln_loss: Vec<f64>,
}

fn objective(theta: &Theta, prep: &Prepared, delta: f64) -> f64 {
    let [log_e, log_a, log_b, alpha, beta] = *theta;
    let n = prep.ln_n.len() as f64;
    let mut acc = 0.0;
    for i in 0..prep.ln_n.len() {
        let pred = log_e.exp()
            + (log_a - alpha * prep.ln_n[i]).exp()
            + (log_b - beta * prep.ln_d[i]).exp();
        acc += huber(pred.ln() - prep.ln_loss[i], delta);
    }
    acc / n
}

fn objective_grad(theta: &Theta, prep: &Prepared, delta: f64) -> (f64, Theta) {
    let [log_e, log_a, log_b, alpha, beta] = *theta;
    let n = prep.ln_n.len() as f64;
    let e = log_e.exp();
    let mut acc = 0.0;
    let mut grad = [0.0; 5];
    for i in 0..prep.ln_n.len() {
        let ta = (log_a - alpha * prep.ln_n[i]).exp();
        let tb = (log_b - beta * prep.ln_d[i]).exp();
        let pred = e + ta + tb;
        let r = pred.ln() - prep.ln_loss[i];
        acc += huber(r, delta);
        let h = huber_deriv(r, delta) / pred;
        grad[0] += h * e;
        grad[1] += h * ta;
        grad[2] += h * tb;
        grad[3] += h * (-ta * prep.ln_n[i]);
        grad[4] += h * (-tb * prep.ln_d[i]);
    }
    for g in grad.iter_mut() {
        *g /= n;
    }
    (acc / n, grad)
}

fn dot(a: &Theta, b: &Theta) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &Theta) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Projected L-BFGS with Armijo backtracking. Returns (θ, f(θ)).
fn lbfgs(theta0: Theta, prep: &Prepared, delta: f64, opts: &FitOptions) -> (Theta, f64) {
    const MEM: usize = 8;
    let mut theta = theta0;
    project(&mut theta);
    let (mut f, mut g) = objective_grad(&theta, prep, delta);
    let mut mem: Vec<(Theta, Theta, f64)> = Vec::new(); // (s, y, 1/(y·s))

    for _ in 0..opts.max_iters {
        if inf_norm(&g) <= opts.grad_tol {
            break;
        }
        // Two-loop recursion for d = −H·g.
        let mut d = g.map(|x| -x);
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &d);
            for k in 0..5 {
                d[k] -= a * y[k];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.last() {
            let gamma = dot(s, y) / dot(y, y);
            for dk in d.iter_mut() {
                *dk *= gamma;
            }
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for k in 0..5 {
                d[k] += s[k] * (a - b);
            }
        }
        if dot(&g, &d) >= 0.0 {
            d = g.map(|x| -x);
            mem.clear();
        }

        let mut t = 1.0;
        let mut accepted: Option<(Theta, f64, bool)> = None;
        for _ in 0..60 {
            let mut trial = theta;
            for k in 0..5 {
                trial[k] += t * d[k];
            }
            let unclamped = trial;
            project(&mut trial);
            let clamped = trial != unclamped;
            let disp: Theta = std::array::from_fn(|k| trial[k] - theta[k]);
            let pred_decr = dot(&g, &disp);
            if pred_decr < 0.0 {
                let ft = objective(&trial, prep, delta);
                if ft <= f + 1e-4 * pred_decr {
                    accepted = Some((trial, ft, clamped));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, ft, clamped)) = accepted else {
            break;
        };
        let (_, gt) = objective_grad(&trial, prep, delta);
        if clamped {
            mem.clear();
        } else {
            let s: Theta = std::array::from_fn(|k| trial[k] - theta[k]);
            let y: Theta = std::array::from_fn(|k| gt[k] - g[k]);
            let sy = dot(&s, &y);
            if sy > 1e-12 * inf_norm(&s) * inf_norm(&y) && sy > 0.0 {
                if mem.len() == MEM {
                    mem.remove(0);
                }
                mem.push((s, y, 1.0 / sy));
            }
        }
        theta = trial;
        f = ft;
        g = gt;
    }
    (theta, f)
}

/// Closed-form least squares for (A, B) given (E, α, β): initial values
/// only, clamped positive.
fn init_ab(obs: &[ScalingObservation], e: f64, alpha: f64, beta: f64, min_loss: f64) -> (f64, f64) {
    let (mut sxx, mut sxy, mut syy, mut sxt, mut syt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for o in obs {
        let x = o.n.powf(-alpha);
        let y = o.d.powf(-beta);
        let t = (o.loss - e).max(1e-9 * min_loss);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        sxt += x * t;
        syt += y * t;
    }
    let det = sxx * syy - sxy * sxy;
    let (a, b) = if det.abs() > 1e-12 * sxx * syy {
        (
            (syy * sxt - sxy * syt) / det,
            (sxx * syt - sxy * sxt) / det,
        )
    } else {
        let fallback = (sxt + syt) / (sxx + syy + 1e-300);
        (fallback, fallback)
    };
    (a.clamp(1e-12, 1e12), b.clamp(1e-12, 1e12))
}

/// Fit the law to observations. Requires ≥ 6 points spanning ≥ 2 distinct
/// N and ≥ 2 distinct D. Each start is first solved with a quadratic
/// objective, then refined with the Huber objective; the best final
/// objective wins, ties to the earlier start.
pub fn fit(observations: &[ScalingObservation], opts: &FitOptions) -> Result<ScalingFit> {
    if !(opts.robust_delta > 0.0) || opts.starts_per_axis < 1 || opts.max_iters < 1 {
        return Err(Error::Config("invalid fit options".into()));
    }
    if observations.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs ≥ 6 observations, got {}",
            observations.len()
        )));
    }
    for o in observations {
        if !(o.n > 0.0) || !o.n.is_finite() || !(o.d > 0.0) || !o.d.is_finite() {
            return Err(Error::Domain(format!(
                "N and D must be positive and finite, got ({}, {})",
                o.n, o.d
            )));
        }
        if !(o.loss > 0.0) || !o.loss.is_finite() {
            return Err(Error::Domain(format!(
                "loss must be positive and finite, got {}",
                o.loss
            )));
        }
    }
    let distinct = |xs: Vec<u64>| {
        let mut v = xs;
        v.sort_unstable();
        v.dedup();
        v.len()
    };
    if distinct(observations.iter().map(|o| o.n.to_bits()).collect()) < 2 {
        return Err(Error::Degenerate(
            "rank-deficient design: all observations share one N".into(),
        ));
    }
    if distinct(observations.iter().map(|o| o.d.to_bits()).collect()) < 2 {
        return Err(Error::Degenerate(
            "rank-deficient design: all observations share one D".into(),
        ));
    }

    // Canonical order makes the fit independent of input order.
    let mut obs = observations.to_vec();
    obs.sort_by(|x, y| {
        (x.n, x.d, x.loss)
            .partial_cmp(&(y.n, y.d, y.loss))
            .expect("finite by validation")
    });
    let prep = Prepared {
        ln_n: obs.iter().map(|o| o.n.ln()).collect(),
        ln_d: obs.iter().map(|o| o.d.ln()).collect(),
        ln_loss: obs.iter().map(|o| o.loss.ln()).collect(),
    };
    let min_loss = obs.iter().map(|o| o.loss).fold(f64::INFINITY, f64::min);

    let p = opts.starts_per_axis;
    let linspace = |lo: f64, hi: f64| -> Vec<f64> {
        if p == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..p)
                .map(|i| lo + (hi - lo) * i as f64 / (p - 1) as f64)
                .collect()
        }
    };
    let exp_grid = linspace(0.05, 1.2);
    let e_grid: Vec<f64> = linspace(0.05, 0.95)
        .into_iter()
        .map(|frac| frac * min_loss)
        .collect();
    let mut starts: Vec<Theta> = Vec::with_capacity(p * p * p);
    for &alpha in &exp_grid {
        for &beta in &exp_grid {
            for &e in &e_grid {
                let (a, b) = init_ab(&obs, e, alpha, beta, min_loss);
                let mut theta = [e.ln(), a.ln(), b.ln(), alpha, beta];
                project(&mut theta);
                starts.push(theta);
            }
        }
    }

    let results: Vec<(Theta, f64)> = starts
        .par_iter()
        .map(|&start| {
            // Quadratic pre-solve reaches the basin; Huber refines in it.
            let (theta1, _) = lbfgs(start, &prep, 1e9, opts);
            lbfgs(theta1, &prep, opts.robust_delta, opts)
        })
        .collect();
    let (best_theta, best_f) = results
        .into_iter()
        .enumerate()
        .min_by(|(i, (_, fa)), (j, (_, fb))| {
            fa.partial_cmp(fb).unwrap().then(i.cmp(j))
        })
        .map(|(_, r)| r)
        .expect("at least one start");

    let fit = ScalingFit {
        e: best_theta[0].exp(),
        a: best_theta[1].exp(),
        b: best_theta[2].exp(),
        alpha: best_theta[3],
        beta: best_theta[4],
        residual: best_f.max(0.0),
    };
    if !fit.e.is_finite() || !fit.a.is_finite() || !fit.b.is_finite() {
        return Err(Error::NonFinite("scaling fit parameters".into()));
    }
    Ok(fit)
}

/// Evaluate the fitted law. N and D must be positive; +∞ is allowed and
/// collapses the corresponding term to zero.
pub fn predict(fit: &ScalingFit, n: f64, d: f64) -> Result<f64> {
    if !(n > 0.0) || n.is_nan() || !(d > 0.0) || d.is_nan() {
        return Err(Error::Domain(format!(
            "predict needs positive N and D, got ({n}, {d})"
        )));
    }
    Ok(fit.e + fit.a / n.powf(fit.alpha) + fit.b / d.powf(fit.beta))
}

/// The irreducible loss at N = D = ∞: exactly the E field.
pub fn limit_loss(fit: &ScalingFit) -> f64 {
    fit.e
}

/// Generate the loss surface of known parameters on an (N, D) grid —
/// testing/fixture helper.
pub fn synthetic_surface(
    e: f64,
    a: f64,
    alpha: f64,
    b: f64,
    beta: f64,
    ns: &[f64],
    ds: &[f64],
) -> Vec<ScalingObservation> {
    let mut out = Vec::with_capacity(ns.len() * ds.len());
    for &n in ns {
        for &d in ds {
            out.push(ScalingObservation {
                n,
                d,
                loss: e + a / n.powf(alpha) + b / d.powf(beta),
            });
        }
    }
    out
}
