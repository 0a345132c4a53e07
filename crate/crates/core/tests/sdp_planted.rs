//! Solver accuracy on randomly generated SDPs with a planted, strictly
//! complementary primal-dual optimum.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sysid_core::sdp::{solve, BlockBuilder, SdpProblem, SolveStatus, SolverOptions};

fn random_orthogonal(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

/// Returns the problem and the planted optimal value.
pub fn planted(seed: u64) -> (SdpProblem, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_blocks = rng.random_range(1..=4);
    let dims: Vec<usize> = (0..n_blocks).map(|_| rng.random_range(2..=8)).collect();
    let svec: usize = dims.iter().map(|k| k * (k + 1) / 2).sum();
    // Fewer variables than dual degrees of freedom keeps the dual strictly
    // feasible; the first coefficient is the identity, so the primal is too.
    let n_vars = rng.random_range(3..=40).min(svec - 1);
    let mut p = SdpProblem::new();
    let x0 = p.add_vars("x", n_vars);
    let xstar: Vec<f64> = (0..n_vars).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut c = vec![0.0; n_vars];
    for (b, &k) in dims.iter().enumerate() {
        let q = random_orthogonal(&mut rng, k);
        let r = rng.random_range(1..k);
        let sd: Vec<f64> = (0..k).map(|i| if i < r { rng.random_range(0.5..2.0) } else { 0.0 }).collect();
        let zd: Vec<f64> = (0..k).map(|i| if i >= r { rng.random_range(0.5..2.0) } else { 0.0 }).collect();
        let s = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sd)) * q.transpose();
        let z = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(zd)) * q.transpose();
        let fs: Vec<DMatrix<f64>> = (0..n_vars)
            .map(|i| {
                if i == 0 {
                    return DMatrix::identity(k, k);
                }
                let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
                (&a + a.transpose()) * 0.5
            })
            .collect();
        let mut f0 = s.clone();
        for (i, f) in fs.iter().enumerate() {
            f0 -= f * xstar[i];
            c[i] += f.dot(&z);
        }
        let mut bb = BlockBuilder::new(k);
        for i in 0..k {
            for j in 0..=i {
                bb.add_constant(i, j, f0[(i, j)]);
                for (v, f) in fs.iter().enumerate() {
                    bb.add_term(i, j, x0 + v, f[(i, j)]);
                }
            }
        }
        p.add_block(bb.finish(format!("block{b}")));
    }
    for (i, ci) in c.iter().enumerate() {
        p.add_objective(x0 + i, *ci);
    }
    let obj = c.iter().zip(&xstar).map(|(a, b)| a * b).sum();
    (p, obj)
}

#[test]
fn planted_suite_matches_optimum() {
    for seed in 0..20 {
        let (p, obj) = planted(seed);
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}: {:?} after {} iterations", sol.status, sol.iterations);
        assert!(
            (sol.objective - obj).abs() <= 1e-6 * (1.0 + obj.abs()),
            "seed {seed}: {} vs planted {}",
            sol.objective,
            obj
        );
    }
}

