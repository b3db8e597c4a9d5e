use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sbm_core::solver::{relative_residual, solve, SolverMethod, Preconditioner, SolverConfig, SolverError};
use sbm_core::sparse::CsrMatrix;

/// Random non-symmetric, strictly diagonally dominant sparse matrix.
fn random_system(n: usize, seed: u64) -> (CsrMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        let mut off = 0.0;
        for _ in 0..6 {
            let j = rng.gen_range(0..n);
            if j != i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                off += v.abs();
                t.push((i, j, v));
            }
        }
        t.push((i, i, off + rng.gen_range(0.5..2.0)));
    }
    let b = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (CsrMatrix::from_triplets(n, n, &t), b)
}

fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let rows = a.to_dense();
    DMatrix::from_fn(a.nrows, a.ncols, |i, j| rows[i][j])
}

#[test]
fn bicgstab_matches_dense_lu() {
    let (a, b) = random_system(200, 7);
    let exact = dense(&a).lu().solve(&DVector::from_vec(b.clone())).unwrap();
    for pc in [Preconditioner::Jacobi, Preconditioner::Ilu0, Preconditioner::None] {
        for degree in [1, 2, 4] {
            let cfg = SolverConfig {
                tol: 1e-12,
                preconditioner: pc,
                degree,
                ..Default::default()
            };
            let (x, rep) = solve(&a, &b, &cfg).unwrap();
            assert!(rep.converged && rep.relative_residual <= 1e-12);
            let err = x.iter().zip(exact.iter()).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
            assert!(err < 1e-8, "{pc:?} degree {degree}: {err:e}");
        }
    }
}

#[test]
fn direct_matches_dense_lu_and_rejects_singular() {
    let (a, b) = random_system(300, 23);
    let exact = dense(&a).lu().solve(&DVector::from_vec(b.clone())).unwrap();
    let cfg = SolverConfig {
        method: SolverMethod::Direct,
        tol: 1e-13,
        ..Default::default()
    };
    let (x, rep) = solve(&a, &b, &cfg).unwrap();
    assert!(rep.converged && rep.relative_residual <= 1e-13);
    let err = x.iter().zip(exact.iter()).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    assert!(err < 1e-11, "{err:e}");

    // two identical rows
    let s = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 1.0), (1, 1, 2.0), (2, 2, 1.0)]);
    assert!(solve(&s, &[1.0, 1.0, 1.0], &cfg).is_err());
}

#[test]
fn matvec_matches_dense_product() {
    let (a, _) = random_system(300, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<f64> = (0..300).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let y = a.matvec(&x).unwrap();
    let yd = dense(&a) * DVector::from_vec(x.clone());
    for (p, q) in y.iter().zip(yd.iter()) {
        assert!((p - q).abs() < 1e-13);
    }
    assert_eq!(a.matvec(&vec![0.0; 300]).unwrap(), vec![0.0; 300]);
    assert!(a.matvec(&[1.0, 2.0]).is_err());
}

#[test]
fn converged_report_is_true_residual() {
    let (a, b) = random_system(150, 5);
    let (x, rep) = solve(&a, &b, &SolverConfig::default()).unwrap();
    assert_eq!(relative_residual(&a, &x, &b).unwrap(), rep.relative_residual);
    assert!(rep.relative_residual <= 1e-10);
}

#[test]
fn solves_are_bitwise_deterministic() {
    let (a, b) = random_system(500, 19);
    let cfg = SolverConfig::default();
    let (x1, r1) = solve(&a, &b, &cfg).unwrap();
    let (x2, r2) = solve(&a, &b, &cfg).unwrap();
    assert_eq!(x1, x2);
    assert_eq!(r1.iterations, r2.iterations);
}

#[test]
fn cg_on_spd_laplacian() {
    let n = 64;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0));
        if i > 0 {
            t.push((i, i - 1, -1.0));
            t.push((i - 1, i, -1.0));
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &t);
    let b = vec![1.0; n];
    let cfg = SolverConfig {
        method: SolverMethod::Cg,
        tol: 1e-12,
        max_iter: Some(1000),
        ..Default::default()
    };
    let (x, rep) = solve(&a, &b, &cfg).unwrap();
    assert!(rep.converged);
    // u'' = -1 with zero ends: x_i = (i+1)(n-i)/2
    for (i, v) in x.iter().enumerate() {
        let e = ((i + 1) * (n - i)) as f64 / 2.0;
        assert!((v - e).abs() < 1e-8 * e);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let a = CsrMatrix::identity(3);
    let b = [1.0, 1.0, 1.0];
    for cfg in [
        SolverConfig { tol: 0.0, ..Default::default() },
        SolverConfig { tol: 1.0, ..Default::default() },
        SolverConfig { max_iter: Some(0), ..Default::default() },
        SolverConfig { degree: 0, ..Default::default() },
    ] {
        assert!(matches!(solve(&a, &b, &cfg), Err(SolverError::InvalidConfig(_))));
    }
    assert!(matches!(solve(&a, &[1.0], &SolverConfig::default()), Err(SolverError::Dimension(_))));
}
