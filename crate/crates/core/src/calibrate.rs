//! Empirical score CDF on the LQ sample and the k → τ threshold conversion.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

/// Empirical cumulative distribution of classifier scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCdf {
    sorted: Vec<f64>,
}

impl ScoreCdf {
    pub fn sample_size(&self) -> usize {
        self.sorted.len()
    }

    pub fn min_score(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max_score(&self) -> f64 {
        *self.sorted.last().unwrap()
    }

    pub fn sorted_scores(&self) -> &[f64] {
        &self.sorted
    }

    /// C(s) = #{samples ≤ s} / n.
    pub fn eval(&self, s: f64) -> f64 {
        let le = self.sorted.partition_point(|&v| v <= s);
        le as f64 / self.sorted.len() as f64
    }
}

/// Fit the empirical CDF from a nonempty score sample in [0,1].
/// (Sigmoid scores land strictly inside; the closed endpoints are
/// accepted so externally produced probability columns round-trip.)
pub fn fit_cdf(scores: &[f64]) -> Result<ScoreCdf> {
    if scores.is_empty() {
        return Err(Error::InsufficientData(
            "cannot fit a CDF from zero scores".into(),
        ));
    }
    if let Some(&bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {bad} in CDF sample")));
    }
    if let Some(&bad) = scores.iter().find(|&&s| !(0.0..=1.0).contains(&s)) {
        return Err(Error::Domain(format!(
            "scores must lie in [0,1], got {bad}"
        )));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ScoreCdf { sorted })
}

/// Convert a selection fraction k into a score threshold τ.
///
/// τ is the ⌈k·n⌉-th largest sampled score, so the inclusive predicate
/// `score ≥ τ` retains at least fraction k of the calibration sample
/// (plus any ties at τ). Edge cases: k = 0 maps to the +∞ sentinel
/// (select nothing); k = 1 maps to the sample minimum (select all).
pub fn threshold_for_fraction(cdf: &ScoreCdf, k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::Domain(format!(
            "selection fraction k must lie in [0,1], got {k}"
        )));
    }
    if k == 0.0 {
        return Ok(f64::INFINITY);
    }
    let n = cdf.sorted.len();
    // The epsilon guards against ties like 0.3·10 = 3.0000000000000004.
    let m = ((k * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    Ok(cdf.sorted[n - m])
}

/// Export (score, C(score)) at 1001 evenly spaced probe points as CSV.
pub fn export_cdf_csv(cdf: &ScoreCdf, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    atomic_write(path, |w| {
        let io = |e: std::io::Error| Error::io(path, e);
        writeln!(w, "score,cdf").map_err(io)?;
        for i in 0..=1000 {
            let s = i as f64 / 1000.0;
            writeln!(w, "{},{}", s, cdf.eval(s)).map_err(io)?;
        }
        Ok(())
    })
}

/// A selection predicate: either top-k via a threshold τ, or an exclusive
/// score band [lo, hi). `k` is carried for provenance when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_float_sentinel")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

/// Resolved selection mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionMode {
    /// Retain score ≥ τ.
    Threshold(f64),
    /// Retain lo ≤ score < hi.
    Exclusive { lo: f64, hi: f64 },
}

impl SelectionSpec {
    /// Top-k spec with a calibrated threshold.
    pub fn top_k(k: f64, tau: f64) -> Self {
        SelectionSpec {
            k: Some(k),
            tau: Some(tau),
            lo: None,
            hi: None,
        }
    }

    /// Threshold-only spec.
    pub fn at_threshold(tau: f64) -> Self {
        SelectionSpec {
            k: None,
            tau: Some(tau),
            lo: None,
            hi: None,
        }
    }

    /// Exclusive band spec.
    pub fn exclusive(lo: f64, hi: f64) -> Self {
        SelectionSpec {
            k: None,
            tau: None,
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    /// Validate and resolve which selection mode this spec encodes.
    pub fn mode(&self) -> Result<SelectionMode> {
        if let Some(k) = self.k {
            if !(0.0..=1.0).contains(&k) {
                return Err(Error::Config(format!("k must lie in [0,1], got {k}")));
            }
        }
        match (self.tau, self.lo, self.hi) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(Error::Config(
                "selection spec sets both tau and exclusive bucket bounds".into(),
            )),
            (Some(tau), None, None) => {
                if tau.is_nan() {
                    return Err(Error::Config("tau must not be NaN".into()));
                }
                Ok(SelectionMode::Threshold(tau))
            }
            (None, Some(lo), Some(hi)) => {
                if !(lo < hi) {
                    return Err(Error::Config(format!(
                        "exclusive selection requires lo < hi, got lo={lo}, hi={hi}"
                    )));
                }
                Ok(SelectionMode::Exclusive { lo, hi })
            }
            (None, _, _) => Err(Error::Config(
                "selection spec needs either tau or both lo and hi".into(),
            )),
        }
    }
}

/// JSON for Option<f64> that survives ±∞ (written as "inf"/"-inf" strings).
mod opt_float_sentinel {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_finite() => Repr::Num(*x).serialize(s),
            Some(x) if x.is_infinite() && *x > 0.0 => Repr::Str("inf".into()).serialize(s),
            Some(x) if x.is_infinite() => Repr::Str("-inf".into()).serialize(s),
            Some(_) => Err(serde::ser::Error::custom("tau must not be NaN")),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let repr = Option::<Repr>::deserialize(d)?;
        match repr {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Str(s)) => match s.as_str() {
                "inf" | "+inf" => Ok(Some(f64::INFINITY)),
                "-inf" => Ok(Some(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!(
                    "bad float sentinel {other:?}"
                ))),
            },
        }
    }
}
