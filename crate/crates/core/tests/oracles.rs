//! Dense linear algebra, data preprocessing and simulation checked against
//! nalgebra and closed forms.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sysid_core::data::{embed_output_history, normalize, pod_project};
use sysid_core::linalg::{
    block_tridiag_solve, max_eig, min_eig, qr_least_squares, svd, sym_eig, BlockTridiagonal, Cholesky, Mat, SymMat,
};
use sysid_core::model::{BasisSpec, Degrees, ModelParameters};
use sysid_core::simulate::{j_perf, solve_implicit, NewtonOptions};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_mat(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

fn to_na(a: &Mat) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

fn random_spd(r: &mut ChaCha8Rng, n: usize) -> Mat {
    let l = random_mat(r, n, n);
    l.matmul(&l.transpose()).add(&Mat::identity(n).scaled(0.1))
}

#[test]
fn eigenvalues_match_nalgebra() {
    let mut r = rng(1);
    for _ in 0..50 {
        let n = r.random_range(1..=9);
        let a = random_mat(&mut r, n, n).symmetrized();
        let (vals, vecs) = sym_eig(&a);
        let mut oracle: Vec<f64> = to_na(&a).symmetric_eigen().eigenvalues.iter().cloned().collect();
        oracle.sort_by(f64::total_cmp);
        for (v, o) in vals.iter().zip(&oracle) {
            assert!((v - o).abs() <= 1e-10 * (1.0 + o.abs()), "{v} vs {o}");
        }
        // A V = V Λ
        let av = a.matmul(&vecs);
        let vl = vecs.matmul(&Mat::diag(&vals));
        assert!(av.sub(&vl).max_abs() <= 1e-10);
        let s = SymMat::from_full(&a);
        assert!((min_eig(&s) - oracle[0]).abs() <= 1e-10 * (1.0 + oracle[0].abs()));
        assert!((max_eig(&s) - oracle[n - 1]).abs() <= 1e-10 * (1.0 + oracle[n - 1].abs()));
    }
}

#[test]
fn cholesky_matches_nalgebra() {
    let mut r = rng(2);
    for _ in 0..50 {
        let n = r.random_range(1..=10);
        let a = random_spd(&mut r, n);
        let b: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let ch = Cholesky::new(&a).unwrap();
        let x = ch.solve(&b);
        let na = to_na(&a).cholesky().unwrap();
        let xo = na.solve(&DVector::from_column_slice(&b));
        for (p, q) in x.iter().zip(xo.iter()) {
            assert!((p - q).abs() <= 1e-9 * (1.0 + q.abs()));
        }
        let ld: f64 = 2.0 * na.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        assert!((ch.log_det() - ld).abs() <= 1e-10 * (1.0 + ld.abs()));
    }
    let not_pd = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
    assert!(Cholesky::new(&not_pd).is_err());
}

#[test]
fn singular_values_match_nalgebra() {
    let mut r = rng(3);
    for _ in 0..30 {
        let (m, n) = (r.random_range(1..=12), r.random_range(1..=12));
        let a = random_mat(&mut r, m, n);
        let s = svd(&a);
        let mut oracle: Vec<f64> = to_na(&a).singular_values().iter().cloned().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        for (v, o) in s.sigma.iter().zip(&oracle) {
            assert!((v - o).abs() <= 1e-10 * (1.0 + o), "{v} vs {o}");
        }
        let rebuilt = s.u.matmul(&Mat::diag(&s.sigma)).matmul(&s.v.transpose());
        assert!(rebuilt.sub(&a).max_abs() <= 1e-10);
    }
}

#[test]
fn least_squares_matches_nalgebra() {
    let mut r = rng(4);
    for _ in 0..30 {
        let n = r.random_range(1..=6);
        let m = n + r.random_range(0..10);
        let a = random_mat(&mut r, m, n);
        let b: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..1.0)).collect();
        let (rr, q, rest) = qr_least_squares(&a, &b);
        let na = to_na(&a);
        let nb = DVector::from_column_slice(&b);
        let xo = na.clone().svd(true, true).solve(&nb, 1e-14).unwrap();
        let res_o = (&na * &xo - &nb).norm();
        assert!((rest - res_o).abs() <= 1e-10 * (1.0 + res_o));
        // R x = q at the oracle minimizer.
        let rx = rr.matvec(xo.as_slice());
        for (p, t) in rx.iter().zip(&q) {
            assert!((p - t).abs() <= 1e-9);
        }
    }
}

#[test]
fn block_tridiagonal_matches_dense_solve() {
    let mut r = rng(5);
    for _ in 0..30 {
        let k = r.random_range(1..=4);
        let nb = r.random_range(1..=8);
        let offdiag: Vec<Mat> = (1..nb).map(|_| random_mat(&mut r, k, k).scaled(0.3)).collect();
        let diag: Vec<Mat> = (0..nb).map(|_| random_spd(&mut r, k).add(&Mat::identity(k).scaled(2.0))).collect();
        let bt = BlockTridiagonal::new(k, diag, offdiag).unwrap();
        let rhs: Vec<f64> = (0..k * nb).map(|_| r.random_range(-1.0..1.0)).collect();
        let x = block_tridiag_solve(&bt, &rhs).unwrap();
        let xo = to_na(&bt.assemble()).lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
        for (p, q) in x.iter().zip(xo.iter()) {
            assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }
    }
}

#[test]
fn pod_energy_matches_svd_oracle() {
    let mut r = rng(6);
    let s = random_mat(&mut r, 20, 50);
    let pod = pod_project(&s, 3).unwrap();
    let sv: Vec<f64> = {
        let mut v: Vec<f64> = to_na(&s).singular_values().iter().cloned().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    };
    let total: f64 = sv.iter().map(|v| v * v).sum();
    let kept: f64 = sv[..3].iter().map(|v| v * v).sum();
    assert!((pod.energy_ratio - kept / total).abs() <= 1e-10);
    // Orthonormal basis.
    let g = pod.basis.tr_matmul(&pod.basis);
    assert!(g.sub(&Mat::identity(3)).max_abs() <= 1e-10);

    let full = pod_project(&s, 20).unwrap();
    assert!((full.energy_ratio - 1.0).abs() <= 1e-10);
    let rebuilt = full.basis.matmul(&Mat::from_fn(20, 50, |i, t| full.states[t][i]));
    assert!(rebuilt.sub(&s).frobenius_norm() <= 1e-10 * s.frobenius_norm());
}

#[test]
fn embedding_examples() {
    let y: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64, 10.0 * t as f64]).collect();
    let u: Vec<Vec<f64>> = (0..6).map(|t| vec![-(t as f64)]).collect();
    let d = embed_output_history(&y, &u, 3, 2).unwrap();
    assert_eq!(d.len(), 4);
    assert_eq!(d.x[0], vec![2.0, 20.0, 1.0, 10.0, 0.0, 0.0]);
    assert_eq!(d.u[0], vec![-2.0, -1.0]);
    for (t, x) in d.x.iter().enumerate() {
        assert_eq!(&x[..2], d.y[t].as_slice());
    }
    assert!(embed_output_history(&y[..2], &u[..2], 3, 1).is_err());
    assert!(embed_output_history(&y, &u, 0, 1).is_err());
}

#[test]
fn normalization_statistics() {
    let mut r = rng(7);
    let u: Vec<Vec<f64>> = (0..40).map(|_| vec![3.0 + 2.0 * r.random_range(-1.0..1.0)]).collect();
    let y: Vec<Vec<f64>> = (0..40).map(|_| vec![-5.0 + 0.1 * r.random_range(-1.0..1.0), 7.0]).collect();
    let d = sysid_core::data::DataSet::new(u, y, vec![]).unwrap();
    let n = normalize(&d);
    let col: Vec<f64> = n.y.iter().map(|v| v[0]).collect();
    let mean = col.iter().sum::<f64>() / 40.0;
    let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 40.0;
    assert!(mean.abs() <= 1e-12);
    assert!((var - 1.0).abs() <= 1e-12);
    // The constant channel is left alone and reported.
    assert!(n.y.iter().all(|v| v[1] == 7.0));
    assert_eq!(n.scale.warnings.len(), 1);
}

#[test]
fn implicit_solve_matches_bisection() {
    // e(x) = x³ + x
    let basis = BasisSpec::new(1, 1, 1, Degrees { e: 3, fx: 1, fu: 1, gx: 1, gu: 1 }, false).unwrap();
    let mut params = ModelParameters::zeros(basis, 1e-3).unwrap();
    let e = params.basis.e_offset();
    for (k, mono) in params.basis.e_mono.clone().iter().enumerate() {
        if mono.as_slice() == [1] || mono.as_slice() == [3] {
            params.theta[e + k] = 1.0;
        }
    }
    for z in [10.0, -3.5, 0.0, 1e3] {
        let (mut lo, mut hi) = (-20.0f64, 20.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid * mid + mid < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let sol = solve_implicit(&params, &[z], &[0.0], &NewtonOptions::default()).unwrap();
        assert!((sol.x[0] - lo).abs() <= 1e-10 * (1.0 + lo.abs()), "z={z}: {} vs {lo}", sol.x[0]);
    }
}

#[test]
fn j_perf_matches_one_pass_formula() {
    let mut r = rng(8);
    for _ in 0..20 {
        let len = r.random_range(2..50);
        let p = r.random_range(1..4);
        let yd: Vec<Vec<f64>> = (0..len).map(|_| (0..p).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<Vec<f64>> = yd.iter().map(|v| v.iter().map(|a| a + r.random_range(-0.1..0.1)).collect()).collect();
        // Welford-style running sums per channel.
        let (mut num, mut den) = (0.0, 0.0);
        for c in 0..p {
            let (mut mean, mut m2) = (0.0, 0.0);
            for (k, v) in yd.iter().enumerate() {
                let d = v[c] - mean;
                mean += d / (k + 1) as f64;
                m2 += d * (v[c] - mean);
            }
            den += m2;
            num += y.iter().zip(&yd).map(|(a, b)| (a[c] - b[c]).powi(2)).sum::<f64>();
        }
        let oracle = 100.0 * (num / den).sqrt();
        let v = j_perf(&y, &yd).unwrap();
        assert!((v - oracle).abs() <= 1e-10 * oracle.max(1.0));
    }
}
