//! Primal-dual interior-point method on the homogeneous self-dual embedding.
//!
//! The equality-free problem `min cᵀx  s.t.  S(x) = F₀ + Σ xᵢFᵢ ⪰ 0` is cast in
//! conic form `Ax + s = b` with `A = −[F₁ … F_N]`, `b = F₀`. Iterates
//! `(x, S, Z, τ, κ)` follow Nesterov–Todd scaled Mehrotra predictor-corrector
//! steps. Infeasibility is read off the embedding when `τ → 0`.

use alloc::vec;
use alloc::vec::Vec;

use super::preprocess::preprocess;
use super::problem::{certify, SdpProblem};
use crate::error::Error;
use crate::linalg::{dot, sqrt, svd, sym_eigvals, Cholesky, Mat, SymMat};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    /// Relative dual residual accepted at termination. The dual equation is
    /// reconstructed through W⁻¹ congruences and bottoms out a few orders
    /// above machine precision on badly scaled problems.
    pub dual_tol: f64,
    pub max_iter: usize,
    /// Threshold for the infeasibility certificates.
    pub infeas_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feas_tol: 1e-8, gap_tol: 1e-7, dual_tol: 1e-6, max_iter: 200, infeas_tol: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InfeasibilityKind {
    /// No point satisfies the constraints.
    Primal,
    /// The objective is unbounded below on the feasible set.
    Dual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible(InfeasibilityKind),
    MaxIter,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Primal point on the original (un-reduced) variables.
    pub z: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// Relative duality gap estimate.
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub block_min_eig: Vec<f64>,
    /// Dual matrices, one per block.
    pub dual_blocks: Vec<SymMat>,
    pub iterations: usize,
    /// Primal objective `cᵀx/τ` after each accepted step.
    pub objective_history: Vec<f64>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// One coefficient matrix with its sparsity pattern.
struct Coef {
    var: usize,
    dense: Mat,
    /// Lower-triangle nonzeros `(a, b, value)`, `a ≥ b`.
    nz: Vec<(usize, usize, f64)>,
}

struct Block {
    dim: usize,
    f0: Mat,
    coefs: Vec<Coef>,
}

impl Block {
    /// `Σ xᵢFᵢ` over this block's variables.
    fn apply(&self, x: &[f64]) -> Mat {
        let mut out = Mat::zeros(self.dim, self.dim);
        for c in &self.coefs {
            let v = x[c.var];
            if v == 0.0 {
                continue;
            }
            for &(a, b, f) in &c.nz {
                out[(a, b)] += v * f;
                if a != b {
                    out[(b, a)] += v * f;
                }
            }
        }
        out
    }
}

/// `⟨F, Y⟩` using the sparsity of `F`.
fn inner_sparse(c: &Coef, y: &Mat) -> f64 {
    c.nz.iter().map(|&(a, b, f)| if a == b { f * y[(a, a)] } else { f * (y[(a, b)] + y[(b, a)]) }).sum()
}

/// `W⁻¹ F W⁻¹` for symmetric `W⁻¹`.
fn congruence(winv: &Mat, c: &Coef) -> Mat {
    let k = winv.rows();
    if c.nz.len() <= k {
        let mut out = Mat::zeros(k, k);
        for &(a, b, f) in &c.nz {
            for i in 0..k {
                let wia = winv[(i, a)];
                let wib = winv[(i, b)];
                if wia == 0.0 && wib == 0.0 {
                    continue;
                }
                for j in 0..k {
                    let v = if a == b { wia * winv[(j, a)] } else { wia * winv[(j, b)] + wib * winv[(j, a)] };
                    out[(i, j)] += f * v;
                }
            }
        }
        out
    } else {
        winv.matmul(&c.dense).matmul(winv)
    }
}

fn sym_part(m: &Mat) -> Mat {
    m.symmetrized()
}

/// Nesterov–Todd scaling of one block.
struct Scaling {
    r: Mat,
    rinv: Mat,
    winv: Mat,
    lambda: Vec<f64>,
}

fn nt_scaling(s: &Mat, z: &Mat) -> Option<Scaling> {
    let ls = Cholesky::new(s).ok()?;
    let lz = Cholesky::new(z).ok()?;
    let ls_m = ls.factor();
    let lz_m = lz.factor();
    let d = svd(&lz_m.tr_matmul(ls_m));
    let k = s.rows();
    if d.sigma.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lambda = d.sigma.clone();
    // R = L_s V Λ^{-1/2}
    let vscaled = Mat::from_fn(k, k, |i, j| d.v[(i, j)] / sqrt(lambda[j]));
    let r = ls_m.matmul(&vscaled);
    // R⁻¹ = Λ^{1/2} Vᵀ L_s⁻¹
    let mut rinv = Mat::zeros(k, k);
    for i in 0..k {
        let vi: Vec<f64> = (0..k).map(|r| d.v[(r, i)]).collect();
        // row i of Vᵀ L_s⁻¹ is (L_s⁻ᵀ v_i)ᵀ
        let row = ls.solve_upper(&vi);
        for j in 0..k {
            rinv[(i, j)] = sqrt(lambda[i]) * row[j];
        }
    }
    // W⁻¹ = L_z U Λ⁻¹ Uᵀ L_zᵀ
    let uscaled = Mat::from_fn(k, k, |i, j| d.u[(i, j)] / sqrt(lambda[j]));
    let t = lz_m.matmul(&uscaled);
    let winv = t.matmul(&t.transpose()).symmetrized();
    Some(Scaling { r, rinv, winv, lambda })
}

/// Largest step `α` keeping `X + αΔ ⪰ 0`, given `X ≻ 0`.
fn max_step(x: &Mat, dx: &Mat) -> f64 {
    let l = match Cholesky::new(x) {
        Ok(l) => l,
        Err(_) => return 0.0,
    };
    let k = x.rows();
    // M = L⁻¹ Δ L⁻ᵀ
    let mut tmp = Mat::zeros(k, k);
    for j in 0..k {
        let col = l.solve_lower(&dx.col(j));
        for i in 0..k {
            tmp[(i, j)] = col[i];
        }
    }
    let mut m = Mat::zeros(k, k);
    for i in 0..k {
        let row = l.solve_lower(tmp.row(i));
        for j in 0..k {
            m[(i, j)] = row[j];
        }
    }
    let lmin = sym_eigvals(&m)[0];
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

/// Jordan product `(XY + YX)/2`.
fn jordan(x: &Mat, y: &Mat) -> Mat {
    x.matmul(y).add(&y.matmul(x)).scaled(0.5)
}

fn frob2(ms: &[Mat]) -> f64 {
    ms.iter().map(|m| m.inner(m)).sum()
}

/// Cholesky factor of the Jacobi-scaled normal matrix `DMD`, `D = diag(M)^{-1/2}`,
/// with iterative refinement against `M` itself.
struct Normal {
    chol: Cholesky,
    d: Vec<f64>,
    m: Mat,
}

impl Normal {
    fn solve_scaled(&self, b: &[f64]) -> Vec<f64> {
        let bs: Vec<f64> = b.iter().zip(&self.d).map(|(v, d)| v * d).collect();
        self.chol.solve(&bs).iter().zip(&self.d).map(|(v, d)| v * d).collect()
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve_scaled(b);
        let resid = |x: &[f64]| -> Vec<f64> { self.m.matvec(x).iter().zip(b).map(|(a, b)| b - a).collect() };
        let mut r = resid(&x);
        let mut rn = dot(&r, &r);
        for _ in 0..3 {
            let dx = self.solve_scaled(&r);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let rc = resid(&cand);
            let rcn = dot(&rc, &rc);
            if !(rcn < rn) {
                break;
            }
            x = cand;
            r = rc;
            rn = rcn;
        }
        x
    }
}

fn factor_normal(m: Mat) -> Option<Normal> {
    let n = m.rows();
    let d: Vec<f64> = (0..n).map(|i| if m[(i, i)] > 0.0 { 1.0 / sqrt(m[(i, i)]) } else { 1.0 }).collect();
    let scaled = Mat::from_fn(n, n, |i, j| m[(i, j)] * d[i] * d[j]);
    let (chol, _) = Cholesky::new_dynamic(&scaled, 1e-15).ok()?;
    Some(Normal { chol, d, m })
}

struct Reduced<'a> {
    c: &'a [f64],
    blocks: Vec<Block>,
    n: usize,
}

impl Reduced<'_> {
    /// `(⟨Fᵢ, Yₖ⟩)ᵢ` summed over blocks.
    fn adjoint(&self, ys: &[Mat]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (b, y) in self.blocks.iter().zip(ys) {
            for c in &b.coefs {
                out[c.var] += inner_sparse(c, y);
            }
        }
        out
    }

    fn normal_matrix(&self, winvs: &[Mat]) -> Mat {
        let mut m = Mat::zeros(self.n, self.n);
        for (b, w) in self.blocks.iter().zip(winvs) {
            for (jj, cj) in b.coefs.iter().enumerate() {
                let g = congruence(w, cj);
                for ci in &b.coefs[..=jj] {
                    let v = inner_sparse(ci, &g);
                    m[(ci.var, cj.var)] += v;
                    if ci.var != cj.var {
                        m[(cj.var, ci.var)] += v;
                    }
                }
            }
        }
        m
    }
}

/// Solves `problem` (equalities are eliminated first).
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let failed = |status: SolveStatus| SdpSolution {
        status,
        z: vec![0.0; problem.num_vars],
        objective: f64::NAN,
        dual_objective: f64::NAN,
        gap: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        block_min_eig: Vec::new(),
        dual_blocks: Vec::new(),
        iterations: 0,
        objective_history: Vec::new(),
    };
    let pre = match preprocess(problem) {
        Ok(p) => p,
        Err(Error::InconsistentEqualities { .. }) => return failed(SolveStatus::Infeasible(InfeasibilityKind::Primal)),
        Err(_) => return failed(SolveStatus::NumericalFailure),
    };
    let red = &pre.reduced;

    // Variables that touch no block are either fixed at zero or unbounded.
    let mut used = vec![false; red.num_vars];
    for b in &red.blocks {
        for (k, _) in &b.terms {
            used[*k] = true;
        }
    }
    if (0..red.num_vars).any(|i| !used[i] && red.objective[i] != 0.0) {
        return failed(SolveStatus::Infeasible(InfeasibilityKind::Dual));
    }
    let mut compact = vec![usize::MAX; red.num_vars];
    let mut active: Vec<usize> = Vec::new();
    for i in 0..red.num_vars {
        if used[i] {
            compact[i] = active.len();
            active.push(i);
        }
    }
    let c: Vec<f64> = active.iter().map(|&i| red.objective[i]).collect();
    let blocks: Vec<Block> = red
        .blocks
        .iter()
        .map(|b| Block {
            dim: b.dim,
            f0: b.constant.to_full(),
            coefs: b
                .terms
                .iter()
                .map(|(k, m)| {
                    let mut nz = Vec::new();
                    for a in 0..b.dim {
                        for bb in 0..=a {
                            let v = m.get(a, bb);
                            if v != 0.0 {
                                nz.push((a, bb, v));
                            }
                        }
                    }
                    Coef { var: compact[*k], dense: m.to_full(), nz }
                })
                .collect(),
        })
        .collect();
    let rp = Reduced { c: &c, blocks, n: active.len() };

    let (x, status, iters, zs, history) = run_ipm(&rp, opts, |x| {
        let mut w = vec![0.0; red.num_vars];
        for (k, &i) in active.iter().enumerate() {
            w[i] = x[k];
        }
        let z = pre.recovery.recover(&w);
        certify(problem, &z).map(|r| r.worst_min_eig()).unwrap_or(f64::NEG_INFINITY)
    });

    let mut w = vec![0.0; red.num_vars];
    for (k, &i) in active.iter().enumerate() {
        w[i] = x.x[k];
    }
    let z = pre.recovery.recover(&w);
    let report = certify(problem, &z).expect("recovered point has the problem's dimension");
    SdpSolution {
        status,
        objective: problem.objective_value(&z),
        dual_objective: red.objective_constant + x.dobj,
        gap: x.gap,
        primal_residual: x.pres,
        dual_residual: x.dres,
        block_min_eig: report.block_min_eig,
        dual_blocks: zs.iter().map(SymMat::from_full).collect(),
        iterations: iters,
        objective_history: history.iter().map(|v| v + red.objective_constant).collect(),
        z,
    }
}

struct Iterate {
    x: Vec<f64>,
    pres: f64,
    dres: f64,
    gap: f64,
    dobj: f64,
}

#[allow(clippy::type_complexity)]
fn run_ipm(
    rp: &Reduced<'_>,
    opts: &SolverOptions,
    worst_eig: impl Fn(&[f64]) -> f64,
) -> (Iterate, SolveStatus, usize, Vec<Mat>, Vec<f64>) {
    let n = rp.n;
    let c = rp.c;
    let nb = rp.blocks.len();
    let nu: usize = rp.blocks.iter().map(|b| b.dim).sum();
    let f0: Vec<Mat> = rp.blocks.iter().map(|b| b.f0.clone()).collect();
    let norm_b = sqrt(frob2(&f0));
    let norm_c = sqrt(dot(c, c));
    let mut history = Vec::new();

    if nb == 0 {
        // No constraints: optimal at zero if the objective vanishes.
        let status = if norm_c == 0.0 { SolveStatus::Optimal } else { SolveStatus::Infeasible(InfeasibilityKind::Dual) };
        return (Iterate { x: vec![0.0; n], pres: 0.0, dres: norm_c, gap: 0.0, dobj: 0.0 }, status, 0, Vec::new(), history);
    }

    // Initial point: least-squares primal and dual, shifted into the cone.
    let ident: Vec<Mat> = rp.blocks.iter().map(|b| Mat::identity(b.dim)).collect();
    let m0 = match factor_normal(rp.normal_matrix(&ident)) {
        Some(m) => m,
        None => {
            return (
                Iterate { x: vec![0.0; n], pres: f64::NAN, dres: f64::NAN, gap: f64::NAN, dobj: f64::NAN },
                SolveStatus::NumericalFailure,
                0,
                Vec::new(),
                history,
            )
        }
    };
    let h0 = rp.adjoint(&f0);
    let mut x = m0.solve(&h0.iter().map(|v| -v).collect::<Vec<_>>());
    let mut s: Vec<Mat> = rp.blocks.iter().zip(&f0).map(|(b, f)| f.add(&b.apply(&x))).collect();
    let y = m0.solve(c);
    let mut z: Vec<Mat> = rp.blocks.iter().map(|b| b.apply(&y)).collect();
    shift_into_cone(&mut s);
    shift_into_cone(&mut z);
    let mut tau = 1.0;
    let mut kappa = 1.0;

    let mut best = Iterate { x: x.clone(), pres: f64::INFINITY, dres: f64::INFINITY, gap: f64::INFINITY, dobj: f64::NAN };
    let mut status = SolveStatus::MaxIter;
    let mut iter = 0;
    let mut stalls = 0;
    loop {
        // Residuals.
        let sx: Vec<Mat> = rp.blocks.iter().map(|b| b.apply(&x)).collect();
        let rz: Vec<Mat> = (0..nb).map(|k| s[k].sub(&f0[k].scaled(tau)).sub(&sx[k])).collect();
        let atz = rp.adjoint(&z);
        let rx: Vec<f64> = (0..n).map(|i| c[i] * tau - atz[i]).collect();
        let ctx = dot(c, &x);
        let btz: f64 = (0..nb).map(|k| f0[k].inner(&z[k])).sum();
        let rtau = ctx + btz + kappa;

        let pres = sqrt(frob2(&rz)) / tau / (1.0 + norm_b);
        let dres = sqrt(dot(&rx, &rx)) / tau / (1.0 + norm_c);
        let pobj = ctx / tau;
        let dobj = -btz / tau;
        let gap_abs = (pobj - dobj).abs();
        let gap = gap_abs / pobj.abs().min(dobj.abs()).max(1.0);
        let xhat: Vec<f64> = x.iter().map(|v| v / tau).collect();
        if pres.is_finite() && dres.is_finite() && gap.is_finite() && pres.max(dres).max(gap) <= best.pres.max(best.dres).max(best.gap) {
            best = Iterate { x: xhat.clone(), pres, dres, gap, dobj };
        }
        if pres <= opts.feas_tol && dres <= opts.dual_tol && gap <= opts.gap_tol && worst_eig(&xhat) >= -opts.feas_tol {
            status = SolveStatus::Optimal;
            best = Iterate { x: xhat, pres, dres, gap, dobj };
            break;
        }
        // Infeasibility certificates.
        if btz < 0.0 && sqrt(dot(&atz, &atz)) <= -btz * opts.infeas_tol {
            status = SolveStatus::Infeasible(InfeasibilityKind::Primal);
            break;
        }
        if ctx < 0.0 {
            let ax: Vec<Mat> = (0..nb).map(|k| s[k].sub(&sx[k])).collect();
            if sqrt(frob2(&ax)) <= -ctx * opts.infeas_tol {
                status = SolveStatus::Infeasible(InfeasibilityKind::Dual);
                break;
            }
        }
        if iter >= opts.max_iter {
            break;
        }
        iter += 1;

        let scalings: Option<Vec<Scaling>> = (0..nb).map(|k| nt_scaling(&s[k], &z[k])).collect();
        let Some(sc) = scalings else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let winvs: Vec<Mat> = sc.iter().map(|s| s.winv.clone()).collect();
        let Some(normal) = factor_normal(rp.normal_matrix(&winvs)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        // Quantities shared by predictor and corrector.
        let wf0: Vec<Mat> = (0..nb).map(|k| winvs[k].matmul(&f0[k]).matmul(&winvs[k])).collect();
        let h = rp.adjoint(&wf0);
        // Δτ pivot −cᵀM⁻¹c − ‖F₀ − Σ yᵢFᵢ‖²_W − κ/τ with y = M⁻¹h, evaluated
        // as a residual norm to avoid cancellation between large terms.
        let u = normal.solve(c);
        let yh = normal.solve(&h);
        let dx2: Vec<f64> = (0..n).map(|i| u[i] + yh[i]).collect();
        let qres: f64 = (0..nb)
            .map(|k| {
                let r = f0[k].sub(&rp.blocks[k].apply(&yh));
                r.inner(&winvs[k].matmul(&r).matmul(&winvs[k]))
            })
            .sum();
        let denom = -dot(c, &u) - qres.max(0.0) - kappa / tau;
        let mu = ((0..nb).map(|k| s[k].inner(&z[k])).sum::<f64>() + tau * kappa) / (nu as f64 + 1.0);

        let direction = |eta: f64, ds: &[Mat], dkappa: f64| -> Direction {
            let psi: Vec<Mat> = (0..nb)
                .map(|k| {
                    let lam = &sc[k].lambda;
                    let d = &ds[k];
                    let kd = d.rows();
                    let inv = Mat::from_fn(kd, kd, |i, j| 2.0 * d[(i, j)] / (lam[i] + lam[j]));
                    sym_part(&sc[k].r.matmul(&inv).matmul(&sc[k].r.transpose()))
                })
                .collect();
            let ys: Vec<Mat> = (0..nb)
                .map(|k| winvs[k].matmul(&rz[k].scaled(eta).sub(&psi[k])).matmul(&winvs[k]))
                .collect();
            let g = rp.adjoint(&ys);
            let rhs: Vec<f64> = (0..n).map(|i| -eta * rx[i] + g[i]).collect();
            let dx1 = normal.solve(&rhs);
            let z1: Vec<Mat> = (0..nb)
                .map(|k| {
                    let a = rz[k].scaled(eta).sub(&psi[k]).sub(&rp.blocks[k].apply(&dx1));
                    sym_part(&winvs[k].matmul(&a).matmul(&winvs[k]))
                })
                .collect();
            let f0z1: f64 = (0..nb).map(|k| f0[k].inner(&z1[k])).sum();
            let dtau = (-eta * rtau - dot(c, &dx1) - f0z1 + dkappa / tau) / denom;
            let dx: Vec<f64> = (0..n).map(|i| dx1[i] - dtau * dx2[i]).collect();
            // ΔS from the primal equation keeps the linear residual exact; ΔZ
            // follows from the linearized complementarity.
            let build = |dx: &[f64], dtau: f64| -> (Vec<Mat>, Vec<Mat>) {
                let dsm: Vec<Mat> = (0..nb)
                    .map(|k| {
                        let mut d = rp.blocks[k].apply(dx);
                        d.add_scaled_assign(dtau, &f0[k]);
                        d.add_scaled_assign(-eta, &rz[k]);
                        sym_part(&d)
                    })
                    .collect();
                let dz: Vec<Mat> = (0..nb)
                    .map(|k| sym_part(&winvs[k].matmul(&dsm[k].add(&psi[k])).matmul(&winvs[k]).scaled(-1.0)))
                    .collect();
                (dsm, dz)
            };
            let (dsm, mut dz) = build(&dx, dtau);
            // The congruence with W⁻¹ loses accuracy as μ → 0; a small
            // correction in the range of W⁻¹FᵢW⁻¹ restores the dual equation
            // to working precision.
            for _ in 0..2 {
                let atdz = rp.adjoint(&dz);
                let e1: Vec<f64> = (0..n).map(|i| -atdz[i] + c[i] * dtau + eta * rx[i]).collect();
                let gamma = normal.solve(&e1.iter().map(|v| -v).collect::<Vec<_>>());
                for k in 0..nb {
                    let corr = winvs[k].matmul(&rp.blocks[k].apply(&gamma)).matmul(&winvs[k]);
                    dz[k] = sym_part(&dz[k].sub(&corr));
                }
            }
            // Δκ from the linearized complementarity κΔτ + τΔκ = −dk. The
            // gap equation would give the same value in exact arithmetic but
            // suffers cancellation once κ is tiny.
            let dkap = (-dkappa - kappa * dtau) / tau;
            Direction { dx, ds: dsm, dz, dtau, dkappa: dkap }
        };
        let step_len = |d: &Direction| -> f64 {
            let mut a = f64::INFINITY;
            for k in 0..nb {
                a = a.min(max_step(&s[k], &d.ds[k])).min(max_step(&z[k], &d.dz[k]));
            }
            if d.dtau < 0.0 {
                a = a.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-kappa / d.dkappa);
            }
            a
        };

        // Predictor.
        let ds_aff: Vec<Mat> = sc.iter().map(|s| Mat::diag(&s.lambda.iter().map(|l| l * l).collect::<Vec<_>>())).collect();
        let aff = direction(1.0, &ds_aff, tau * kappa);
        let alpha_aff = step_len(&aff).min(1.0);
        let sigma = {
            let t = 1.0 - alpha_aff;
            (t * t * t).clamp(0.0, 1.0)
        };
        // Corrector.
        let ds_cor: Vec<Mat> = (0..nb)
            .map(|k| {
                let sk = &sc[k];
                let dst = sk.rinv.matmul(&aff.ds[k]).matmul(&sk.rinv.transpose());
                let dzt = sk.r.transpose().matmul(&aff.dz[k]).matmul(&sk.r);
                let mut m = jordan(&dst, &dzt);
                for i in 0..sk.lambda.len() {
                    m[(i, i)] += sk.lambda[i] * sk.lambda[i] - sigma * mu;
                }
                sym_part(&m)
            })
            .collect();
        let dk = tau * kappa + aff.dtau * aff.dkappa - sigma * mu;
        let cor = direction(1.0 - sigma, &ds_cor, dk);
        let alpha = (0.99 * step_len(&cor)).min(1.0);
        if !(alpha > 1e-12) || !alpha.is_finite() {
            stalls += 1;
            if stalls >= 3 {
                status = SolveStatus::NumericalFailure;
                break;
            }
            continue;
        }
        stalls = 0;
        for i in 0..n {
            x[i] += alpha * cor.dx[i];
        }
        for k in 0..nb {
            s[k] = sym_part(&s[k].add(&cor.ds[k].scaled(alpha)));
            z[k] = sym_part(&z[k].add(&cor.dz[k].scaled(alpha)));
        }
        tau += alpha * cor.dtau;
        kappa += alpha * cor.dkappa;
        if !(tau > 0.0) || !(kappa > 0.0) || x.iter().any(|v| !v.is_finite()) {
            status = SolveStatus::NumericalFailure;
            break;
        }
        history.push(dot(c, &x) / tau);
    }
    // On failure `best` is the best iterate seen.
    let zs = z.iter().map(|m| m.scaled(1.0 / tau)).collect();
    (best, status, iter, zs, history)
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<Mat>,
    dz: Vec<Mat>,
    dtau: f64,
    dkappa: f64,
}

fn shift_into_cone(ms: &mut [Mat]) {
    let lmin = ms.iter().map(|m| sym_eigvals(m)[0]).fold(f64::INFINITY, f64::min);
    let alpha = -lmin;
    if alpha >= -1e-8 {
        for m in ms.iter_mut() {
            for i in 0..m.rows() {
                m[(i, i)] += 1.0 + alpha;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::problem::{BlockBuilder, LinearEquality};

    fn problem_2x2() -> SdpProblem {
        let mut p = SdpProblem::new();
        let x = p.add_vars("x", 1);
        p.add_objective(x, 1.0);
        let mut b = BlockBuilder::new(2);
        b.add_term(0, 0, x, 1.0);
        b.add_term(1, 1, x, 1.0);
        b.add_constant(1, 0, 1.0);
        p.add_block(b.finish("lmi"));
        p
    }

    #[test]
    fn analytic_two_by_two() {
        let sol = solve(&problem_2x2(), &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.z[0] - 1.0).abs() < 1e-7, "{}", sol.z[0]);
    }

    #[test]
    fn scalar_nonnegativity() {
        let mut p = SdpProblem::new();
        let x = p.add_vars("x", 1);
        p.add_objective(x, 1.0);
        let mut b = BlockBuilder::new(1);
        b.add_term(0, 0, x, 1.0);
        p.add_block(b.finish("x>=0"));
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.z[0].abs() < 1e-7);
    }

    #[test]
    fn largest_eigenvalue() {
        let s = Mat::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, -1.0]);
        let mut p = SdpProblem::new();
        let t = p.add_vars("t", 1);
        p.add_objective(t, 1.0);
        let mut b = BlockBuilder::new(3);
        for i in 0..3 {
            b.add_term(i, i, t, 1.0);
            for j in 0..=i {
                b.add_constant(i, j, -s[(i, j)]);
            }
        }
        p.add_block(b.finish("tI-S"));
        let sol = solve(&p, &SolverOptions::default());
        let lmax = *sym_eigvals(&s).last().unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.z[0] - lmax).abs() < 1e-7);
    }

    #[test]
    fn infeasible_is_detected() {
        // x ≥ 1 and x ≤ −1.
        let mut p = SdpProblem::new();
        let x = p.add_vars("x", 1);
        p.add_objective(x, 1.0);
        let mut b = BlockBuilder::new(1);
        b.add_term(0, 0, x, 1.0);
        b.add_constant(0, 0, -1.0);
        p.add_block(b.finish("x>=1"));
        let mut b = BlockBuilder::new(1);
        b.add_term(0, 0, x, -1.0);
        b.add_constant(0, 0, -1.0);
        p.add_block(b.finish("x<=-1"));
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible(InfeasibilityKind::Primal));
    }

    #[test]
    fn unbounded_is_detected() {
        let mut p = SdpProblem::new();
        let x = p.add_vars("x", 1);
        p.add_objective(x, -1.0);
        let mut b = BlockBuilder::new(1);
        b.add_term(0, 0, x, 1.0);
        p.add_block(b.finish("x>=0"));
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible(InfeasibilityKind::Dual));
    }

    #[test]
    fn equality_constrained() {
        // min x + y s.t. x = 2, [[y,1],[1,x]] ⪰ 0  →  y = 1/2.
        let mut p = SdpProblem::new();
        let x = p.add_vars("x", 1);
        let y = p.add_vars("y", 1);
        p.add_objective(x, 1.0);
        p.add_objective(y, 1.0);
        let mut b = BlockBuilder::new(2);
        b.add_term(0, 0, y, 1.0);
        b.add_term(1, 1, x, 1.0);
        b.add_constant(1, 0, 1.0);
        p.add_block(b.finish("lmi"));
        p.add_equality(LinearEquality { coeffs: vec![(x, 1.0)], rhs: 2.0 });
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.z[0] - 2.0).abs() < 1e-12 && (sol.z[1] - 0.5).abs() < 1e-7);
    }
}
