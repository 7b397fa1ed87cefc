//! Cross-checks `pca_project` against an independent cyclic Jacobi
//! eigensolver written from scratch in this file: same covariance, different
//! algorithm, so agreement is evidence of correctness rather than of shared
//! bugs.

// Matrix math with one index across several arrays; see the same allow in
// the library root.
#![allow(clippy::needless_range_loop)]

use qfilter_core::embed::{pca_project, EmbeddingMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns), unsorted.
fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0f64; p]; p];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _sweep in 0..200 {
        let mut off = 0f64;
        for i in 0..p {
            for j in (i + 1)..p {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() < 1e-13 {
            break;
        }
        for i in 0..p {
            for j in (i + 1)..p {
                if m[i][j].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[j][j] - m[i][i]) / (2.0 * m[i][j]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let mik = m[i][k];
                    let mjk = m[j][k];
                    m[i][k] = c * mik - s * mjk;
                    m[j][k] = s * mik + c * mjk;
                }
                for row in m.iter_mut() {
                    let ki = row[i];
                    let kj = row[j];
                    row[i] = c * ki - s * kj;
                    row[j] = s * ki + c * kj;
                }
                for row in v.iter_mut() {
                    let ki = row[i];
                    let kj = row[j];
                    row[i] = c * ki - s * kj;
                    row[j] = s * ki + c * kj;
                }
            }
        }
    }

    let eigenvalues: Vec<f64> = (0..p).map(|i| m[i][i]).collect();
    (eigenvalues, v)
}

/// Random low-ish rank embedding matrix with anisotropic structure so the
/// spectrum is well separated.
fn random_matrix(n: usize, p: usize, seed: u64) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Latent factors with decaying scales push variance into a few directions.
    let factors: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![0f64; p];
        for (f, factor) in factors.iter().enumerate() {
            let scale = 4.0 / (1.0 + f as f64);
            let z: f64 = rng.random::<f64>() * 2.0 - 1.0;
            for (r, &c) in row.iter_mut().zip(factor) {
                *r += scale * z * c;
            }
        }
        for r in &mut row {
            *r += 0.05 * (rng.random::<f64>() * 2.0 - 1.0);
        }
        rows.push(row.iter().map(|&x| x as f32).collect::<Vec<f32>>());
    }
    let ids = (0..n).map(|i| format!("r{i:04}")).collect();
    EmbeddingMatrix::from_rows(ids, rows, false).unwrap()
}

fn covariance(m: &EmbeddingMatrix) -> Vec<Vec<f64>> {
    let n = m.n_rows();
    let p = m.dim();
    let mut mean = vec![0f64; p];
    for row in m.rows() {
        for (a, &x) in mean.iter_mut().zip(row) {
            *a += x as f64;
        }
    }
    for a in &mut mean {
        *a /= n as f64;
    }
    let mut cov = vec![vec![0f64; p]; p];
    for row in m.rows() {
        let c: Vec<f64> = row
            .iter()
            .zip(&mean)
            .map(|(&x, &mu)| x as f64 - mu)
            .collect();
        for i in 0..p {
            for j in 0..p {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    for r in cov.iter_mut() {
        for x in r.iter_mut() {
            *x /= n as f64 - 1.0;
        }
    }
    cov
}

#[test]
fn explained_variance_matches_jacobi_spectrum() {
    let m = random_matrix(300, 12, 11);
    let proj = pca_project(&m, 5).unwrap();

    let cov = covariance(&m);
    let (mut eig, _) = jacobi_eigen(&cov);
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let trace: f64 = eig.iter().map(|&l| l.max(0.0)).sum();

    assert_eq!(proj.explained.len(), 5);
    for (got, lam) in proj.explained.iter().zip(&eig) {
        let want = lam.max(0.0) / trace;
        assert!(
            (got - want).abs() < 1e-9,
            "explained {got} vs jacobi {want}"
        );
    }
    // Non-increasing, all in [0, 1].
    for w in proj.explained.windows(2) {
        assert!(w[0] >= w[1] - 1e-15);
    }
    assert!(proj.explained.iter().all(|&e| (0.0..=1.0).contains(&e)));
}

#[test]
fn projected_coordinates_match_jacobi_basis() {
    let m = random_matrix(180, 9, 23);
    let out_dim = 4;
    let proj = pca_project(&m, out_dim).unwrap();

    let cov = covariance(&m);
    let (eig, vecs) = jacobi_eigen(&cov);
    let p = cov.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig[b].partial_cmp(&eig[a]).unwrap());

    // Rebuild the projection with the Jacobi basis under the same sign
    // convention (largest-|component| positive).
    let n = m.n_rows();
    let mut mean = vec![0f64; p];
    for row in m.rows() {
        for (a, &x) in mean.iter_mut().zip(row) {
            *a += x as f64;
        }
    }
    for a in &mut mean {
        *a /= n as f64;
    }

    for (col, &src) in order.iter().take(out_dim).enumerate() {
        let mut basis: Vec<f64> = (0..p).map(|r| vecs[r][src]).collect();
        let pivot = basis
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.abs().partial_cmp(&b.abs()).unwrap().then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .unwrap();
        if basis[pivot] < 0.0 {
            for b in &mut basis {
                *b = -*b;
            }
        }
        for (i, row) in m.rows().enumerate() {
            let want: f64 = row
                .iter()
                .zip(&mean)
                .zip(&basis)
                .map(|((&x, &mu), &b)| (x as f64 - mu) * b)
                .sum();
            let got = proj.row(i)[col];
            assert!(
                (got - want).abs() < 1e-8,
                "row {i} col {col}: {got} vs jacobi {want}"
            );
        }
    }
}

#[test]
fn top_direction_maximizes_projected_variance() {
    let m = random_matrix(250, 10, 5);
    let proj = pca_project(&m, 3).unwrap();
    let n = proj.n_rows();

    let col_var = |c: usize| -> f64 {
        let mean: f64 = (0..n).map(|i| proj.row(i)[c]).sum::<f64>() / n as f64;
        (0..n).map(|i| (proj.row(i)[c] - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)
    };
    let v0 = col_var(0);
    let v1 = col_var(1);
    let v2 = col_var(2);
    assert!(v0 >= v1 && v1 >= v2, "variances not sorted: {v0} {v1} {v2}");

    // Column variances are exactly the eigenvalues of the covariance.
    let cov = covariance(&m);
    let (mut eig, _) = jacobi_eigen(&cov);
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    assert!((v0 - eig[0]).abs() / eig[0] < 1e-9, "{v0} vs {}", eig[0]);
    assert!((v1 - eig[1]).abs() / eig[1] < 1e-9, "{v1} vs {}", eig[1]);

    // Projecting onto any other unit direction never beats the top one.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let p = m.dim();
    let mut mean = vec![0f64; p];
    for row in m.rows() {
        for (a, &x) in mean.iter_mut().zip(row) {
            *a += x as f64;
        }
    }
    for a in &mut mean {
        *a /= m.n_rows() as f64;
    }
    for _ in 0..32 {
        let mut dir: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        for d in &mut dir {
            *d /= norm;
        }
        let coords: Vec<f64> = m
            .rows()
            .map(|row| {
                row.iter()
                    .zip(&mean)
                    .zip(&dir)
                    .map(|((&x, &mu), &d)| (x as f64 - mu) * d)
                    .sum()
            })
            .collect();
        let mu: f64 = coords.iter().sum::<f64>() / coords.len() as f64;
        let var: f64 =
            coords.iter().map(|c| (c - mu).powi(2)).sum::<f64>() / (coords.len() as f64 - 1.0);
        assert!(var <= v0 * (1.0 + 1e-9), "random direction beat PCA: {var} > {v0}");
    }
}
