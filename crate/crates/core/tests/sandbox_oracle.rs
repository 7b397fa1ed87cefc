//! Cross-check of the sandbox quadrature pipeline against closed forms.
//!
//! For HQ = N(1,1), LQ = N(0,1) the whole selection pipeline is analytic:
//! the ratio r(x) = exp(x − 1/2) is monotone in x, so retaining LQ-fraction k
//! truncates the standard normal at c = Φ⁻¹(1−k); the moment surrogate is the
//! truncated normal's (mean, variance); and KL between Gaussians is
//! ln(σ₂/σ₁) + (σ₁² + (μ₁−μ₂)²)/(2σ₂²) − 1/2. The table below was computed
//! from those formulas with an independent implementation (scipy), then
//! frozen. The quadrature path must reproduce it.

use qfilter_core::synthlab::{run_sandbox, GaussianMixtureSpec, SandboxScenario};

/// (k, KL(HQ ‖ Gaussian surrogate of the k-selection)) from the closed form.
const EXPECTED: [(f64, f64); 19] = [
    (0.05, 6.2208180454),
    (0.10, 3.2527291642),
    (0.15, 2.0364178681),
    (0.20, 1.3922246926),
    (0.25, 1.0111452437),
    (0.30, 0.7729418651),
    (0.35, 0.6204077297),
    (0.40, 0.5226994397),
    (0.45, 0.4616899050),
    (0.50, 0.4260256671),
    (0.55, 0.4082346161),
    (0.60, 0.4031947362),
    (0.65, 0.4072665579),
    (0.70, 0.4177710415),
    (0.75, 0.4326537014),
    (0.80, 0.4502445287),
    (0.85, 0.4690432217),
    (0.90, 0.4874146073),
    (0.95, 0.5027219320),
];

fn scenario() -> SandboxScenario {
    SandboxScenario {
        hq: GaussianMixtureSpec::gaussian1(1.0, 1.0),
        lq: GaussianMixtureSpec::gaussian1(0.0, 1.0),
        k_grid: EXPECTED.iter().map(|&(k, _)| k).collect(),
        clusters: 16,
        seed: 3,
        sample_size: 20_000,
        deciles: 10,
        hist_bins: 128,
        smoothing: 1.0,
    }
}

#[test]
fn quadrature_matches_closed_form_truncated_normal_kl() {
    let rows = run_sandbox(&scenario()).unwrap();
    assert_eq!(rows.len(), EXPECTED.len());
    for (row, &(k, want)) in rows.iter().zip(&EXPECTED) {
        assert_eq!(row.k, k);
        let err = (row.kl_hq_cqf - want).abs();
        // Trapezoid error at the truncation jump is O(grid step) ≈ 1e-4.
        assert!(
            err <= 5e-3_f64.max(5e-3 * want),
            "k={k}: quadrature {} vs closed form {want} (err {err})",
            row.kl_hq_cqf
        );
    }
}

#[test]
fn u_shape_has_a_strict_interior_minimum() {
    let rows = run_sandbox(&scenario()).unwrap();
    let kls: Vec<f64> = rows.iter().map(|r| r.kl_hq_cqf).collect();
    let (imin, &min) = kls
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    assert!(imin > 0 && imin < kls.len() - 1, "minimum sits at an endpoint");
    assert!(min < kls[0] && min < kls[kls.len() - 1]);
    // The closed form puts the minimum at k = 0.60.
    assert_eq!(rows[imin].k, 0.60, "minimum at k = {}", rows[imin].k);
}

#[test]
fn decile_rows_bracket_the_full_hq_row() {
    let rows = run_sandbox(&scenario()).unwrap();
    for row in &rows {
        // Both band KLs are finite and the crisp column is constant.
        assert!(row.kl_top_decile.is_finite());
        assert!(row.kl_bottom_decile.is_finite());
        assert_eq!(row.kl_crisp, rows[0].kl_crisp);
    }
    // At small k the selection sits in the top ratio band: the top decile is
    // closer to the selection surrogate than the bottom decile is.
    let first = &rows[0];
    assert!(
        first.kl_top_decile < first.kl_bottom_decile,
        "top {} vs bottom {}",
        first.kl_top_decile,
        first.kl_bottom_decile
    );
    // At k near 1 the selection is almost all of LQ, which the bottom band
    // resembles more than the extreme top band does.
    let last = rows.last().unwrap();
    assert!(
        last.kl_bottom_decile < last.kl_top_decile,
        "bottom {} vs top {}",
        last.kl_bottom_decile,
        last.kl_top_decile
    );
}
