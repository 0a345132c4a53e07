//! Simulation of implicit models and the error measures computed from it.
//!
//! Each step solves `e(x⁺) = f(x, u)` by Newton's method with Armijo
//! backtracking on `½‖e(x) − z‖²`. The Newton direction `−E⁻¹r` is a descent
//! direction whenever `E` is nonsingular, which well-posedness guarantees; if
//! `E` is numerically singular a damped residual step `x ← x − α(e(x) − z)`
//! with `α = μ/L̂²` is taken instead.

use alloc::vec::Vec;

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, sqrt, Cholesky, Lu};
use crate::model::ModelParameters;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Relative residual tolerance, `‖e(x) − z‖ ≤ tol·(1 + ‖z‖)`.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100, armijo: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImplicitSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub fallback_steps: usize,
}

fn residual(params: &ModelParameters, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let mut r = params.eval_e(x)?;
    r.iter_mut().zip(z).for_each(|(a, b)| *a -= b);
    Ok(r)
}

/// Root of `e(x) = z` starting from `x_init`.
pub fn solve_implicit(params: &ModelParameters, z: &[f64], x_init: &[f64], opts: &NewtonOptions) -> Result<ImplicitSolution> {
    let target = opts.tol * (1.0 + norm2(z));
    let mut x = x_init.to_vec();
    let mut r = residual(params, &x, z)?;
    let mut merit = 0.5 * dot(&r, &r);
    let mut fallback_steps = 0;
    let mut lhat: f64 = 0.0;
    for it in 0..=opts.max_iter {
        let rn = norm2(&r);
        if rn <= target {
            return Ok(ImplicitSolution { x, iterations: it, residual: rn, fallback_steps });
        }
        if it == opts.max_iter || !rn.is_finite() {
            break;
        }
        let e = params.jac_e(&x)?;
        lhat = lhat.max(e.spectral_norm());
        let step = Lu::new(&e).ok().map(|lu| lu.solve(&r)).filter(|d| d.iter().all(|v| v.is_finite()));
        let mut accepted = false;
        if let Some(d) = step {
            // Directional derivative of the merit along −d is −‖r‖².
            let slope = -dot(&r, &r);
            let mut alpha = 1.0;
            for _ in 0..40 {
                let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - alpha * b).collect();
                let rn2 = residual(params, &xn, z)?;
                let mn = 0.5 * dot(&rn2, &rn2);
                if mn.is_finite() && mn <= merit + opts.armijo * alpha * slope {
                    x = xn;
                    r = rn2;
                    merit = mn;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if !accepted {
            let alpha = params.mu / (lhat * lhat).max(params.mu);
            x.iter_mut().zip(&r).for_each(|(a, b)| *a -= alpha * b);
            r = residual(params, &x, z)?;
            merit = 0.5 * dot(&r, &r);
            fallback_steps += 1;
        }
    }
    Err(Error::NoConvergence { step: 0, residual: norm2(&r) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub newton_iters: Vec<usize>,
    /// Largest relative implicit-equation residual over all steps.
    pub max_residual: f64,
}

/// Runs the model over `u_seq` from `x0`; `x` and `y` have one entry per input.
pub fn simulate(params: &ModelParameters, x0: &[f64], u_seq: &[Vec<f64>], opts: &NewtonOptions) -> Result<SimResult> {
    if x0.len() != params.basis.n || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial state has the wrong length or is not finite".into()));
    }
    let len = u_seq.len();
    let mut xs = Vec::with_capacity(len);
    let mut ys = Vec::with_capacity(len);
    let mut iters = Vec::with_capacity(len.saturating_sub(1));
    let mut max_residual: f64 = 0.0;
    let mut x = x0.to_vec();
    for (t, u) in u_seq.iter().enumerate() {
        ys.push(params.eval_g(&x, u)?);
        if t + 1 < len {
            let z = params.eval_f(&x, u)?;
            let sol = solve_implicit(params, &z, &x, opts).map_err(|e| match e {
                Error::NoConvergence { residual, .. } => Error::NoConvergence { step: t + 1, residual },
                other => other,
            })?;
            max_residual = max_residual.max(sol.residual / (1.0 + norm2(&z)));
            iters.push(sol.iterations);
            xs.push(core::mem::replace(&mut x, sol.x));
        } else {
            xs.push(x.clone());
        }
    }
    Ok(SimResult { x: xs, y: ys, newton_iters: iters, max_residual })
}

/// `Σ_t |y(t) − ỹ(t)|²` simulating from `x(0) = x̃(0)`.
pub fn simulation_error(params: &ModelParameters, data: &DataSet) -> Result<f64> {
    data.require_states()?;
    let sim = simulate(params, &data.x[0], &data.u, &NewtonOptions::default())?;
    Ok(sum_sq_diff(&sim.y, &data.y))
}

fn sum_sq_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>()).sum()
}

/// Percent normalized simulation error
/// `100·‖ỹ − y‖ / ‖ỹ − mean(ỹ)‖` over all samples and channels.
pub fn j_perf(y: &[Vec<f64>], y_data: &[Vec<f64>]) -> Result<f64> {
    if y.len() != y_data.len() || y.is_empty() {
        return Err(Error::DimensionMismatch("trajectories differ in length".into()));
    }
    let p = y_data[0].len();
    let len = y_data.len() as f64;
    let mean: Vec<f64> = (0..p).map(|c| y_data.iter().map(|v| v[c]).sum::<f64>() / len).collect();
    let den: f64 = y_data.iter().map(|v| v.iter().zip(&mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>()).sum();
    if den == 0.0 {
        return Err(Error::ConstantData);
    }
    Ok(100.0 * sqrt(sum_sq_diff(y, y_data)) / sqrt(den))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub state_gap: Vec<f64>,
    pub output_gap: Vec<f64>,
    pub output_gap_partial_sums: Vec<f64>,
    pub output_gap_total: f64,
    /// `max_ρ |E(x_ρ)(x₂ − x₁)|²_{P⁻¹}` over 11 points `x_ρ` on the segment.
    pub storage_bound: f64,
    /// Share of the total output gap accumulated over the last tenth.
    pub tail_fraction: f64,
}

impl ProbeReport {
    /// The storage bound holds up to a relative slack.
    pub fn bound_holds(&self, slack: f64) -> bool {
        self.output_gap_total <= self.storage_bound * (1.0 + slack) + 1e-12
    }
}

/// Simulates two initial conditions under one input and compares them with
/// the contraction storage bound.
pub fn stability_probe(params: &ModelParameters, x1: &[f64], x2: &[f64], u_seq: &[Vec<f64>]) -> Result<ProbeReport> {
    let opts = NewtonOptions::default();
    let a = simulate(params, x1, u_seq, &opts)?;
    let b = simulate(params, x2, u_seq, &opts)?;
    let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    let state_gap: Vec<f64> = a.x.iter().zip(&b.x).map(|(p, q)| sq(p, q)).collect();
    let output_gap: Vec<f64> = a.y.iter().zip(&b.y).map(|(p, q)| sq(p, q)).collect();
    let partial: Vec<f64> = output_gap
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let total = partial.last().copied().unwrap_or(0.0);
    let tail_start = output_gap.len() - output_gap.len() / 10;
    let tail: f64 = output_gap[tail_start..].iter().sum();
    let chol = Cholesky::from_sym(&params.p_mat)?;
    let d: Vec<f64> = x2.iter().zip(x1).map(|(p, q)| p - q).collect();
    let mut storage_bound: f64 = 0.0;
    for k in 0..=10 {
        let rho = k as f64 / 10.0;
        let xr: Vec<f64> = x1.iter().zip(&d).map(|(p, q)| p + rho * q).collect();
        let ed = params.jac_e(&xr)?.matvec(&d);
        storage_bound = storage_bound.max(dot(&ed, &chol.solve(&ed)));
    }
    Ok(ProbeReport {
        state_gap,
        output_gap,
        output_gap_partial_sums: partial,
        output_gap_total: total,
        storage_bound,
        tail_fraction: if total > 0.0 { tail / total } else { 0.0 },
    })
}

/// Simulates over the inputs of a data set from `x̃(0)`.
pub fn simulate_data(params: &ModelParameters, data: &DataSet) -> Result<SimResult> {
    data.require_states()?;
    simulate(params, &data.x[0], &data.u, &NewtonOptions::default())
}
