//! Dense-oracle checks for the iterative solvers: nalgebra's dense
//! eigendecomposition and SVD are the independent reference path.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use sip_core::spectral::{
    lanczos_eig, orthonormality_defect, prefix_correlation, spectral_norm, truncated_svd, DenseOp,
    LinOp, NormConfig, OrderMode, SolverConfig, SparseMatrix,
};

fn random_sparse_symmetric(n: usize, avg_degree: usize, seed: u64) -> SparseMatrix<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut triples = Vec::new();
    let edges = n * avg_degree / 2;
    for _ in 0..edges {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let w = rng.random_range(-1.0..1.0);
        triples.push((i, j, w));
        triples.push((j, i, w));
    }
    for i in 0..n {
        triples.push((i, i, rng.random_range(-0.5..0.5)));
    }
    SparseMatrix::from_triples(n, n, &triples)
}

fn random_dense(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn sparse_to_nalgebra(m: &SparseMatrix<f64>) -> DMatrix<f64> {
    let dense = m.to_dense();
    to_nalgebra(&dense)
}

/// Largest principal angle between the column spans, via the singular values
/// of U1^T U2.
fn max_principal_angle(u1: &Array2<f64>, u2: &Array2<f64>) -> f64 {
    let prod = to_nalgebra(u1).transpose() * to_nalgebra(u2);
    let svd = prod.svd(false, false);
    let min_cos = svd
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    min_cos.min(1.0).acos()
}

#[test]
fn lanczos_matches_dense_eigensolver() {
    let n = 200;
    let d = 16;
    for seed in [1u64, 2, 3] {
        let m = random_sparse_symmetric(n, 10, seed);
        let dense = sparse_to_nalgebra(&m);
        let eig = dense.clone().symmetric_eigen();
        let mut dense_vals: Vec<(f64, usize)> = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();

        for order in [OrderMode::DescendingAlgebraic, OrderMode::DescendingMagnitude] {
            match order {
                OrderMode::DescendingAlgebraic => {
                    dense_vals.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap())
                }
                OrderMode::DescendingMagnitude => {
                    dense_vals.sort_by(|a, b| b.0.abs().partial_cmp(&a.0.abs()).unwrap())
                }
                _ => unreachable!(),
            }
            let cfg = SolverConfig {
                tol: 1e-10,
                max_kdim: n,
                seed,
            };
            let pairs = lanczos_eig(&m, d, order, &cfg).expect("converges");
            let scale = dense_vals[0].0.abs().max(1.0);
            for j in 0..d {
                assert!(
                    (pairs.values[j] - dense_vals[j].0).abs() <= 1e-8 * scale,
                    "seed {} order {:?} value {}: {} vs {}",
                    seed,
                    order,
                    j,
                    pairs.values[j],
                    dense_vals[j].0
                );
            }
            // Subspace agreement via principal angles.
            let mut dense_sub = Array2::<f64>::zeros((n, d));
            for (col, &(_, src)) in dense_vals.iter().take(d).enumerate() {
                for row in 0..n {
                    dense_sub[(row, col)] = eig.eigenvectors[(row, src)];
                }
            }
            let angle = max_principal_angle(&pairs.vectors, &dense_sub);
            assert!(
                angle < 1e-6,
                "seed {} order {:?}: principal angle {}",
                seed,
                order,
                angle
            );
            assert!(orthonormality_defect(pairs.vectors.view()) <= 1e-8);
            // Residual invariant directly on the operator.
            for j in 0..d {
                let v: Vec<f64> = pairs.vectors.column(j).to_vec();
                let mut r = m.apply(&v);
                for (ri, &vi) in r.iter_mut().zip(&v) {
                    *ri -= pairs.values[j] * vi;
                }
                let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(rn <= 1e-8 * scale.max(1.0), "residual {}", rn);
            }
        }
    }
}

#[test]
fn truncated_svd_matches_dense_oracle() {
    let d = 16;
    for seed in [5u64, 6] {
        let m = random_dense(150, 150, seed);
        let cfg = SolverConfig {
            tol: 1e-10,
            max_kdim: 150,
            seed,
        };
        let svd = truncated_svd(&DenseOp(m.view()), d, &cfg).expect("converges");
        let dense_svd = to_nalgebra(&m).svd(true, true);
        let mut s: Vec<f64> = dense_svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let scale = s[0].max(1.0);
        for j in 0..d {
            assert!(
                (svd.sigma[j] - s[j]).abs() <= 1e-8 * scale,
                "sigma {}: {} vs {}",
                j,
                svd.sigma[j],
                s[j]
            );
        }
        assert!(orthonormality_defect(svd.u.view()) <= 1e-8);
        assert!(orthonormality_defect(svd.v.view()) <= 1e-8);
        // Triplet residual: ||M v - sigma u||.
        for j in 0..d {
            let v: Vec<f64> = svd.v.column(j).to_vec();
            let mut r = DenseOp(m.view()).apply(&v);
            for (ri, u) in r.iter_mut().zip(svd.u.column(j).iter()) {
                *ri -= svd.sigma[j] * u;
            }
            let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(rn <= 1e-7 * scale, "triplet residual {}", rn);
        }
    }
}

#[test]
fn svd_of_symmetric_equals_abs_eigenvalues() {
    let m = random_sparse_symmetric(120, 8, 9);
    let cfg = SolverConfig {
        tol: 1e-12,
        max_kdim: 120,
        seed: 9,
    };
    let d = 10;
    let eig = lanczos_eig(&m, d, OrderMode::DescendingMagnitude, &cfg).unwrap();
    let svd = truncated_svd(&m, d, &cfg).unwrap();
    for j in 0..d {
        assert!(
            (svd.sigma[j] - eig.values[j].abs()).abs() <= 1e-8,
            "{} vs {}",
            svd.sigma[j],
            eig.values[j]
        );
    }
}

#[test]
fn spectral_norm_matches_dense_sigma_max() {
    for seed in [11u64, 12, 13] {
        let m = random_dense(80, 60, seed);
        let est = spectral_norm(
            &DenseOp(m.view()),
            &NormConfig {
                tol: 1e-9,
                max_iter: 3000,
                seed,
                warm_start: None,
            },
        );
        let dense_svd = to_nalgebra(&m).svd(false, false);
        let sigma_max = dense_svd
            .singular_values
            .iter()
            .fold(0.0f64, |a, &b| a.max(b));
        assert!(
            (est.value - sigma_max).abs() <= 1e-6 * sigma_max,
            "seed {}: {} vs {}",
            seed,
            est.value,
            sigma_max
        );
    }
}

#[test]
fn spectral_norm_dominates_random_probes() {
    let m = random_dense(64, 64, 21);
    let est = spectral_norm(&DenseOp(m.view()), &NormConfig::default());
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    for _ in 0..50 {
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = DenseOp(m.view()).apply(&x);
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(est.value * (1.0 + 1e-6) >= ny / nx);
    }
}

#[test]
fn prefix_correlation_of_independent_noise_is_small() {
    let n = 1000;
    let d = 8;
    let a = random_dense(n, d, 31);
    let b = random_dense(n + 50, d, 32);
    let r = prefix_correlation(a.view(), b.view()).unwrap();
    // Direct-formula oracle on one column.
    let col = 3;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let x = a[(i, col)];
        let y = b[(i, col)];
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    let nf = n as f64;
    let oracle =
        ((sab - sa * sb / nf) / ((saa - sa * sa / nf).sqrt() * (sbb - sb * sb / nf).sqrt())).abs();
    assert!((r.values[col] - oracle).abs() < 1e-12);
    for (j, &v) in r.values.iter().enumerate() {
        assert!(v < 0.1, "column {} correlation {} for independent noise", j, v);
    }
}

#[test]
fn lanczos_sign_convention_is_stable_across_seeds() {
    let m = random_sparse_symmetric(60, 6, 40);
    let p1 = lanczos_eig(&m, 4, OrderMode::DescendingAlgebraic, &SolverConfig::with_seed(1))
        .unwrap();
    let p2 = lanczos_eig(&m, 4, OrderMode::DescendingAlgebraic, &SolverConfig::with_seed(99))
        .unwrap();
    // Simple spectrum: canonical signs make whole vectors agree across seeds.
    for j in 0..4 {
        for i in 0..60 {
            assert!(
                (p1.vectors[(i, j)] - p2.vectors[(i, j)]).abs() < 1e-6,
                "entry ({}, {})",
                i,
                j
            );
        }
    }
}

#[test]
fn nonconvergence_reports_error() {
    let m = random_sparse_symmetric(200, 10, 50);
    let cfg = SolverConfig {
        tol: 1e-14,
        max_kdim: 20,
        seed: 1,
    };
    let err = lanczos_eig(&m, 16, OrderMode::DescendingAlgebraic, &cfg).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("converge"), "unexpected error: {}", msg);
}
