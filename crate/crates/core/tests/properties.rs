//! Randomized invariants of the numerical kernels and data handling.

use proptest::prelude::*;
use sysid_core::data::{denormalize, embed_output_history, normalize, DataSet};
use sysid_core::linalg::{
    block_tridiag_solve, concave_quad_bound, dot, min_eig, sup_concave_quadratic, BlockTridiagonal, Mat, SymMat,
};
use sysid_core::model::{BasisSpec, Degrees, ModelParameters, Part};
use sysid_core::simulate::j_perf;

fn vec_of(n: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, n)
}

/// `L Lᵀ + εI` from a random factor.
fn spd(n: usize) -> impl Strategy<Value = SymMat> {
    (vec_of(n * n, 1.0), 0.05..1.0f64).prop_map(move |(l, eps)| {
        let l = Mat::from_row_slice(n, n, &l);
        SymMat::from_full(&l.matmul(&l.transpose()).add(&Mat::identity(n).scaled(eps)))
    })
}

fn seq(len: usize, w: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(vec_of(w, 3.0), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quad_bound_never_below_concave_value(
        (p, b, c) in (1usize..5).prop_flat_map(|n| (spd(n), vec_of(n, 2.0), vec_of(n, 2.0)))
    ) {
        let bound = concave_quad_bound(&b, &c, &p).unwrap();
        let pinv_c = sysid_core::linalg::Cholesky::from_sym(&p).unwrap().solve(&c);
        let exact = -dot(&c, &pinv_c);
        prop_assert!(bound >= exact - 1e-10 * (1.0 + exact.abs()));
        // Tight at c = Pb.
        let pb = p.mul_vec(&b);
        let tight = concave_quad_bound(&b, &pb, &p).unwrap();
        prop_assert!((tight + p.quad_form(&b)).abs() <= 1e-10 * (1.0 + tight.abs()));
    }

    #[test]
    fn sup_of_concave_quadratic(
        (p, b, c, probes) in (1usize..5).prop_flat_map(|n| {
            (spd(n), vec_of(n, 2.0), -3.0..3.0f64, prop::collection::vec(vec_of(n, 5.0), 10))
        })
    ) {
        let q = p.scaled(-1.0);
        let (sup, arg) = sup_concave_quadratic(&q, &b, c).unwrap();
        let f = |d: &[f64]| q.quad_form(d) + 2.0 * dot(&b, d) + c;
        prop_assert!((f(&arg) - sup).abs() <= 1e-9 * (1.0 + sup.abs()));
        for d in &probes {
            prop_assert!(f(d) <= sup + 1e-9 * (1.0 + sup.abs()));
        }
        prop_assert!(sup_concave_quadratic(&p, &b, c).is_err());
    }

    #[test]
    fn block_tridiagonal_residual(k in 1usize..4, nb in 1usize..7, raw in vec_of(200, 1.0), rhs in vec_of(28, 1.0)) {
        let mut it = raw.into_iter().cycle();
        let mut take = |s: f64| Mat::from_fn(k, k, |_, _| s * it.next().unwrap());
        let offdiag: Vec<Mat> = (1..nb).map(|_| take(0.3)).collect();
        let diag: Vec<Mat> = (0..nb)
            .map(|_| {
                let a = take(1.0);
                a.matmul(&a.transpose()).add(&Mat::identity(k).scaled(2.0))
            })
            .collect();
        let bt = BlockTridiagonal::new(k, diag, offdiag).unwrap();
        let rhs = &rhs[..k * nb];
        let x = block_tridiag_solve(&bt, rhs).unwrap();
        let r = bt.mul_vec(&x);
        for (a, b) in r.iter().zip(rhs) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn model_maps_are_linear_in_theta(
        d in 1u32..4,
        t1 in vec_of(200, 1.0),
        t2 in vec_of(200, 1.0),
        a in -2.0..2.0f64,
        x in vec_of(2, 1.5),
        u in vec_of(1, 1.5),
    ) {
        let basis = BasisSpec::new(2, 1, 1, Degrees::uniform(d), true).unwrap();
        let nt = basis.num_theta();
        prop_assume!(nt <= 200);
        let (t1, t2) = (&t1[..nt], &t2[..nt]);
        let mix: Vec<f64> = t1.iter().zip(t2).map(|(p, q)| a * p + q).collect();
        let maps = basis.theta_maps(&x, &u).unwrap();
        for part in [Part::E, Part::F, Part::G] {
            let (v1, v2, vm) = (maps.value(part, t1), maps.value(part, t2), maps.value(part, &mix));
            for i in 0..vm.len() {
                prop_assert!((vm[i] - (a * v1[i] + v2[i])).abs() <= 1e-10 * (1.0 + vm[i].abs()));
            }
            let (j1, j2, jm) = (maps.jacobian(part, t1), maps.jacobian(part, t2), maps.jacobian(part, &mix));
            prop_assert!(jm.sub(&j1.scaled(a).add(&j2)).max_abs() <= 1e-10 * (1.0 + jm.max_abs()));
            // The dense map agrees with direct evaluation.
            let dense = maps.value_map(part, nt).matvec(&mix);
            for i in 0..vm.len() {
                prop_assert!((dense[i] - vm[i]).abs() <= 1e-10 * (1.0 + vm[i].abs()));
            }
        }
    }

    #[test]
    fn jacobians_match_finite_differences(
        d in 1u32..4,
        theta in vec_of(200, 1.0),
        x in vec_of(2, 1.0),
        u in vec_of(1, 1.0),
    ) {
        let basis = BasisSpec::new(2, 1, 1, Degrees::uniform(d), true).unwrap();
        let nt = basis.num_theta();
        prop_assume!(nt <= 200);
        let params = ModelParameters::new(basis, theta[..nt].to_vec(), SymMat::identity(2), 1e-3).unwrap();
        let h = 1e-6;
        let je = params.jac_e(&x).unwrap();
        let jf = params.jac_f(&x, &u).unwrap();
        let jg = params.jac_g(&x, &u).unwrap();
        for j in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(p, q)| (p - q) / (2.0 * h)).collect::<Vec<_>>();
            let de = fd(params.eval_e(&xp).unwrap(), params.eval_e(&xm).unwrap());
            let df = fd(params.eval_f(&xp, &u).unwrap(), params.eval_f(&xm, &u).unwrap());
            let dg = fd(params.eval_g(&xp, &u).unwrap(), params.eval_g(&xm, &u).unwrap());
            for (jac, col) in [(&je, &de), (&jf, &df), (&jg, &dg)] {
                for (i, v) in col.iter().enumerate() {
                    prop_assert!((jac[(i, j)] - v).abs() <= 1e-6 * (1.0 + v.abs()), "{} vs {}", jac[(i, j)], v);
                }
            }
        }
    }

    #[test]
    fn j_perf_is_scale_invariant(y in seq(20, 2), noise in seq(20, 2), g in 0.01..100.0f64) {
        let yd: Vec<Vec<f64>> = y.iter().enumerate().map(|(t, v)| v.iter().map(|a| a + t as f64 * 0.1).collect()).collect();
        let ys: Vec<Vec<f64>> = yd.iter().zip(&noise).map(|(a, n)| a.iter().zip(n).map(|(p, q)| p + 0.1 * q).collect()).collect();
        let scale = |s: &[Vec<f64>]| s.iter().map(|v| v.iter().map(|a| g * a).collect()).collect::<Vec<Vec<f64>>>();
        let a = j_perf(&ys, &yd).unwrap();
        let b = j_perf(&scale(&ys), &scale(&yd)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        prop_assert!(a >= 0.0);
        prop_assert_eq!(j_perf(&yd, &yd).unwrap(), 0.0);
    }

    #[test]
    fn normalize_round_trip(u in seq(15, 2), y in seq(15, 1), x in seq(15, 3), shift in -50.0..50.0f64) {
        let y: Vec<Vec<f64>> = y.iter().map(|v| vec![v[0] * 7.0 + shift]).collect();
        let d = DataSet::new(u, y, x).unwrap();
        let back = denormalize(&normalize(&d));
        for (a, b) in back.y.iter().flatten().chain(back.u.iter().flatten()).chain(back.x.iter().flatten())
            .zip(d.y.iter().flatten().chain(d.u.iter().flatten()).chain(d.x.iter().flatten()))
        {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn embedding_covers_history(len in 3usize..30, p in 1usize..3, lag in 1usize..4, ilag in 1usize..4, raw in seq(30, 3)) {
        let y: Vec<Vec<f64>> = raw[..len].iter().map(|v| v[..p].to_vec()).collect();
        let u: Vec<Vec<f64>> = raw[..len].iter().map(|v| vec![v[2]]).collect();
        let drop = lag.max(ilag) - 1;
        match embed_output_history(&y, &u, lag, ilag) {
            Ok(d) => {
                prop_assert_eq!(d.len(), len - drop);
                for (t, x) in d.x.iter().enumerate() {
                    prop_assert_eq!(x.len(), lag * p);
                    for j in 0..lag {
                        prop_assert_eq!(&x[j * p..(j + 1) * p], y[t + drop - j].as_slice());
                    }
                    prop_assert_eq!(&d.u[t][..], &u[t + drop + 1 - ilag..=t + drop].iter().rev().flatten().copied().collect::<Vec<_>>()[..]);
                }
            }
            Err(_) => prop_assert!(len < drop + 2),
        }
    }
}

#[test]
fn min_eig_of_spd_is_positive() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    runner.run(&(1usize..6).prop_flat_map(spd), |p| {
        prop_assert!(min_eig(&p) > 0.0);
        Ok(())
    }).unwrap();
}
