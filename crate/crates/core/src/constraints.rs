//! Stability and well-posedness constraints as LMI blocks: pointwise
//! contraction, the single LMI of state-affine models, matrix sum-of-squares
//! certificates, and a sampled a-posteriori check.
//!
//! The contraction condition `F′P⁻¹F + P − E − E′ + G′G ⪯ −μI` is imposed in
//! Schur form
//!
//! ```text
//! [ E + E′ − P − μI   F′   G′ ]
//! [ F                  P    0  ]  ⪰ 0
//! [ G                  0    I  ]
//! ```
//!
//! which is affine in θ and `P` jointly.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::linalg::{min_eig, SymMat};
use crate::model::{BasisSpec, ModelKind, ModelParameters, Part, ThetaMaps};
use crate::poly::{graded_lex, Monomial, PolyAff};
use crate::sdp::{AffExpr, BlockBuilder, LinearEquality, LmiBlockTemplate, SdpProblem};

/// Largest Gram matrix a single SOS certificate may use.
pub const MAX_GRAM_DIM: usize = 200;

/// Contraction block at the point behind `maps`.
pub fn contraction_block(maps: &ThetaMaps, layout: &Layout, mu: f64, label: impl Into<String>) -> LmiBlockTemplate {
    let (n, p) = (maps.n(), maps.p());
    let ts = layout.theta_start;
    let mut b = BlockBuilder::new(2 * n + p);
    for i in 0..n {
        for j in 0..=i {
            let mut e = maps.jac_expr(Part::E, i, j, ts);
            e.add_scaled(1.0, &maps.jac_expr(Part::E, j, i, ts));
            e.add_scaled(-1.0, &layout.p_expr(i, j));
            if i == j {
                e.constant -= mu;
            }
            b.set(i, j, e);
            b.set(n + i, n + j, layout.p_expr(i, j));
        }
        for j in 0..n {
            b.set(n + i, j, maps.jac_expr(Part::F, i, j, ts));
        }
    }
    for i in 0..p {
        for j in 0..n {
            b.set(2 * n + i, j, maps.jac_expr(Part::G, i, j, ts));
        }
        b.add_constant(2 * n + i, 2 * n + i, 1.0);
    }
    b.finish(label)
}

/// The contraction block of a state-affine model at input `u`. Its Jacobians
/// do not depend on `x`, so one block per distinct input covers the whole
/// state space.
pub fn state_affine_stability_block(
    basis: &BasisSpec,
    layout: &Layout,
    u: &[f64],
    mu: f64,
) -> Result<LmiBlockTemplate> {
    if basis.kind() == ModelKind::Polynomial {
        return Err(Error::NotStateAffine);
    }
    let maps = basis.theta_maps(&vec![0.0; basis.n], u)?;
    Ok(contraction_block(&maps, layout, mu, "stability"))
}

/// The inputs at which state-affine stability must be imposed: one arbitrary
/// input if the Jacobians do not depend on `u`, otherwise every distinct
/// sample.
pub fn state_affine_inputs(basis: &BasisSpec, inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if basis.kind() == ModelKind::Linear {
        return vec![vec![0.0; basis.m]];
    }
    let mut seen = BTreeSet::new();
    inputs
        .iter()
        .filter(|u| seen.insert(u.iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
        .cloned()
        .collect()
}

/// Symmetric matrix of polynomials with affine coefficients, stored lower
/// packed.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    pub dim: usize,
    pub nvars: usize,
    entries: Vec<PolyAff>,
}

impl PolyMatrix {
    pub fn zeros(dim: usize, nvars: usize) -> Self {
        Self { dim, nvars, entries: vec![PolyAff::zero(nvars); dim * (dim + 1) / 2] }
    }

    fn idx(i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        r * (r + 1) / 2 + c
    }

    pub fn get(&self, i: usize, j: usize) -> &PolyAff {
        &self.entries[Self::idx(i, j)]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut PolyAff {
        &mut self.entries[Self::idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, p: PolyAff) {
        self.entries[Self::idx(i, j)] = p;
    }

    pub fn add_constant(&mut self, i: usize, j: usize, e: &AffExpr) {
        let nv = self.nvars;
        self.get_mut(i, j).add_term(vec![0; nv], e, 1.0);
    }

    pub fn degree(&self) -> u32 {
        self.entries.iter().map(PolyAff::degree).max().unwrap_or(0)
    }

    /// Numeric value at decision vector `z` and point `v`.
    pub fn eval(&self, z: &[f64], v: &[f64]) -> SymMat {
        SymMat::from_fn(self.dim, |i, j| self.get(i, j).eval(z, v))
    }

    /// The constant-in-`v` block, valid only when every entry has degree 0.
    fn to_block(&self, label: String) -> LmiBlockTemplate {
        let mut b = BlockBuilder::new(self.dim);
        let zero: Monomial = vec![0; self.nvars];
        for i in 0..self.dim {
            for j in 0..=i {
                if let Some(e) = self.get(i, j).terms.get(&zero) {
                    b.set(i, j, e.clone());
                }
            }
        }
        b.finish(label)
    }
}

/// Record of one matrix-SOS certificate added to a problem.
#[derive(Clone, Debug, PartialEq)]
pub struct SosCertificate {
    pub label: String,
    /// First Gram variable; the Gram matrix is stored lower packed.
    pub gram_start: usize,
    pub gram_dim: usize,
    /// Monomial vector of each matrix row.
    pub row_monomials: Vec<Vec<Monomial>>,
    pub num_equalities: usize,
}

impl SosCertificate {
    pub fn num_gram_vars(&self) -> usize {
        self.gram_dim * (self.gram_dim + 1) / 2
    }
}

fn double(m: &[u8]) -> Monomial {
    m.iter().map(|&e| 2 * e).collect()
}

fn add_mono(a: &[u8], b: &[u8]) -> Monomial {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Monomial vector for a row whose diagonal entry is `diag`: all monomials of
/// degree at most half the diagonal degree and at most half its per-variable
/// exponents, then pruned of any `w` whose Gram diagonal would be forced to
/// zero (`2w` absent from `diag` and not a sum of two other candidates).
fn row_monomials(diag: &PolyAff) -> Vec<Monomial> {
    if diag.is_zero() {
        return Vec::new();
    }
    let nv = diag.nvars;
    let h = diag.degree().div_ceil(2);
    let maxexp = diag.max_exponents();
    let mut z: Vec<Monomial> =
        graded_lex(nv, h).into_iter().filter(|m| m.iter().zip(&maxexp).all(|(&e, &mx)| 2 * e <= mx)).collect();
    let present = |m: &Monomial| diag.terms.get(m).is_some_and(|e| !e.is_zero());
    loop {
        let before = z.len();
        let snapshot = z.clone();
        z.retain(|w| {
            let w2 = double(w);
            if present(&w2) {
                return true;
            }
            snapshot.iter().enumerate().any(|(ia, a)| {
                snapshot[ia + 1..].iter().any(|b| a != w && b != w && add_mono(a, b) == w2)
            })
        });
        if z.len() == before {
            return z;
        }
    }
}

/// Adds a certificate that `pm(v) ⪰ 0` for all `v`: a Gram matrix `Q ⪰ 0` over
/// the block monomial vector `diag(z₁, …, z_k)` and one equality per
/// coefficient of every entry. A matrix of degree 0 becomes a plain LMI.
pub fn matrix_sos(problem: &mut SdpProblem, pm: &PolyMatrix, label: &str) -> Result<SosCertificate> {
    if pm.degree() == 0 {
        problem.add_block(pm.to_block(String::from(label)));
        let zero = vec![0; pm.nvars];
        return Ok(SosCertificate {
            label: String::from(label),
            gram_start: problem.num_vars,
            gram_dim: 0,
            row_monomials: vec![vec![zero]; pm.dim],
            num_equalities: 0,
        });
    }
    let rows: Vec<Vec<Monomial>> = (0..pm.dim).map(|i| row_monomials(pm.get(i, i))).collect();
    let offsets: Vec<usize> = rows
        .iter()
        .scan(0, |acc, r| {
            let o = *acc;
            *acc += r.len();
            Some(o)
        })
        .collect();
    let dim: usize = rows.iter().map(Vec::len).sum();
    if dim > MAX_GRAM_DIM {
        return Err(Error::DegreeOverflow(format!("{label}: Gram matrix of size {dim} exceeds {MAX_GRAM_DIM}")));
    }
    let gram_start = problem.add_vars(&format!("gram:{label}"), dim * (dim + 1) / 2);
    let gvar = |r: usize, c: usize| gram_start + r * (r + 1) / 2 + c;

    let mut gram = BlockBuilder::new(dim);
    for r in 0..dim {
        for c in 0..=r {
            gram.set(r, c, AffExpr::var(gvar(r, c)));
        }
    }

    // Each (entry, monomial) pair is one equality: Gram contributions minus
    // the entry's coefficient.
    let mut eqs: BTreeMap<(usize, usize, Monomial), AffExpr> = BTreeMap::new();
    for i in 0..pm.dim {
        for j in 0..=i {
            for (m, e) in &pm.get(i, j).terms {
                if !e.is_zero() {
                    eqs.entry((i, j, m.clone())).or_default().add_scaled(-1.0, e);
                }
            }
            for (ia, a) in rows[i].iter().enumerate() {
                for (jb, b) in rows[j].iter().enumerate() {
                    if i == j && jb > ia {
                        continue;
                    }
                    let coef = if i == j && ia != jb { 2.0 } else { 1.0 };
                    eqs.entry((i, j, add_mono(a, b)))
                        .or_default()
                        .add_term(gvar(offsets[i] + ia, offsets[j] + jb), coef);
                }
            }
        }
    }
    let mut count = 0;
    for e in eqs.values() {
        if e.terms.is_empty() {
            if e.constant.abs() > 0.0 {
                return Err(Error::InconsistentEqualities { residual: e.constant.abs() });
            }
            continue;
        }
        problem.add_equality(LinearEquality::from_expr(e));
        count += 1;
    }
    problem.add_block(gram.finish(format!("gram:{label}")));
    Ok(SosCertificate { label: String::from(label), gram_start, gram_dim: dim, row_monomials: rows, num_equalities: count })
}

/// Which of the `n + m` variables a polynomial matrix actually involves; the
/// rest are dropped before building monomial vectors.
fn compress_vars(pm: &PolyMatrix) -> PolyMatrix {
    let mut used = vec![false; pm.nvars];
    for e in &pm.entries {
        for (u, &x) in used.iter_mut().zip(&e.max_exponents()) {
            *u |= x > 0;
        }
    }
    let keep: Vec<usize> = (0..pm.nvars).filter(|&k| used[k]).collect();
    let mut out = PolyMatrix::zeros(pm.dim, keep.len());
    for (slot, e) in out.entries.iter_mut().zip(&pm.entries) {
        for (m, a) in &e.terms {
            let mm: Monomial = keep.iter().map(|&k| m[k]).collect();
            slot.add_term(mm, a, 1.0);
        }
    }
    out
}

/// `E(x) + E(x)′ − 2μI` as a polynomial matrix in `x`.
pub fn wellposedness_matrix(basis: &BasisSpec, layout: &Layout, mu: f64) -> PolyMatrix {
    let n = basis.n;
    let mut pm = PolyMatrix::zeros(n, basis.n + basis.m);
    for i in 0..n {
        for j in 0..=i {
            let mut e = basis.jac_poly(Part::E, i, j, layout.theta_start);
            e.add_scaled(1.0, &basis.jac_poly(Part::E, j, i, layout.theta_start));
            pm.set(i, j, e);
        }
        pm.add_constant(i, i, &AffExpr::constant(-2.0 * mu));
    }
    compress_vars(&pm)
}

/// Certifies `E(x) + E(x)′ ⪰ 2μI` for every `x`, which makes `e` a bijection.
pub fn wellposedness_sos(problem: &mut SdpProblem, basis: &BasisSpec, layout: &Layout, mu: f64) -> Result<SosCertificate> {
    let pm = wellposedness_matrix(basis, layout, mu);
    matrix_sos(problem, &pm, "wellposedness")
}

/// The Schur-form contraction block as a polynomial matrix in the variables
/// of `(x, u)` it depends on.
pub fn contraction_matrix(basis: &BasisSpec, layout: &Layout, mu: f64) -> PolyMatrix {
    let (n, p) = (basis.n, basis.p);
    let ts = layout.theta_start;
    let nv = basis.n + basis.m;
    let mut pm = PolyMatrix::zeros(2 * n + p, nv);
    for i in 0..n {
        for j in 0..=i {
            let mut e = basis.jac_poly(Part::E, i, j, ts);
            e.add_scaled(1.0, &basis.jac_poly(Part::E, j, i, ts));
            let mut c = layout.p_expr(i, j).scaled(-1.0);
            if i == j {
                c.constant -= mu;
            }
            e.add_term(vec![0; nv], &c, 1.0);
            pm.set(i, j, e);
            pm.add_constant(n + i, n + j, &layout.p_expr(i, j));
        }
        for j in 0..n {
            pm.set(n + i, j, basis.jac_poly(Part::F, i, j, ts));
        }
    }
    for i in 0..p {
        for j in 0..n {
            pm.set(2 * n + i, j, basis.jac_poly(Part::G, i, j, ts));
        }
        pm.add_constant(2 * n + i, 2 * n + i, &AffExpr::constant(1.0));
    }
    compress_vars(&pm)
}

/// Certifies the contraction block for every `(x, u)`.
pub fn contraction_sos(problem: &mut SdpProblem, basis: &BasisSpec, layout: &Layout, mu: f64) -> Result<SosCertificate> {
    let pm = contraction_matrix(basis, layout, mu);
    if pm.degree() == 0 {
        // Same template as the pointwise block, which is constant here.
        let maps = basis.theta_maps(&vec![0.0; basis.n], &vec![0.0; basis.m])?;
        problem.add_block(contraction_block(&maps, layout, mu, "contraction"));
        return Ok(SosCertificate {
            label: String::from("contraction"),
            gram_start: problem.num_vars,
            gram_dim: 0,
            row_monomials: vec![vec![Vec::new()]; pm.dim],
            num_equalities: 0,
        });
    }
    matrix_sos(problem, &pm, "contraction")
}

/// Numeric contraction block of a fitted model at `(x, u)`.
pub fn contraction_block_value(params: &ModelParameters, x: &[f64], u: &[f64]) -> Result<SymMat> {
    let layout = Layout::model_only(&params.basis);
    let maps = params.maps(x, u)?;
    let z = Layout::pack_model(&params.theta, &params.p_mat);
    Ok(contraction_block(&maps, &layout, params.mu, "").eval(&z))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    pub worst_min_eig: f64,
    pub worst_x: Vec<f64>,
    pub worst_u: Vec<f64>,
    pub samples: usize,
}

impl CertificateReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.worst_min_eig >= -tol
    }
}

const PRIMES: [u32; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

/// Worst contraction-block eigenvalue over the given points plus
/// `sample_count` randomly rotated Halton points in the box `x_box × u_box`.
pub fn validate_certificate(
    params: &ModelParameters,
    sample_count: usize,
    x_box: &[(f64, f64)],
    u_box: &[(f64, f64)],
    points: &[(Vec<f64>, Vec<f64>)],
    seed: u64,
) -> Result<CertificateReport> {
    let (n, m) = (params.basis.n, params.basis.m);
    if x_box.len() != n || u_box.len() != m {
        return Err(Error::DimensionMismatch("sampling box does not match the model".into()));
    }
    let dims = n + m;
    if dims > PRIMES.len() {
        return Err(Error::InvalidArgument(format!("{dims} sampling dimensions exceed {}", PRIMES.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
    let bounds: Vec<(f64, f64)> = x_box.iter().chain(u_box).copied().collect();
    let mut report =
        CertificateReport { worst_min_eig: f64::INFINITY, worst_x: vec![0.0; n], worst_u: vec![0.0; m], samples: 0 };
    let mut visit = |x: &[f64], u: &[f64]| -> Result<()> {
        let v = min_eig(&contraction_block_value(params, x, u)?);
        report.samples += 1;
        if v < report.worst_min_eig || v.is_nan() {
            report.worst_min_eig = v;
            report.worst_x = x.to_vec();
            report.worst_u = u.to_vec();
        }
        Ok(())
    };
    for (x, u) in points {
        visit(x, u)?;
    }
    for k in 0..sample_count {
        let pt: Vec<f64> = (0..dims)
            .map(|d| {
                let h = radical_inverse(k as u64 + 1, PRIMES[d]) + shift[d];
                let h = h - (h as u64) as f64;
                bounds[d].0 + h * (bounds[d].1 - bounds[d].0)
            })
            .collect();
        visit(&pt[..n], &pt[n..])?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::model::{quadratic_stability_embed, Degrees};
    use crate::sdp::{solve, SolveStatus, SolverOptions};

    fn scalar(e: u32) -> BasisSpec {
        BasisSpec::new(1, 1, 1, Degrees { e, fx: 1, fu: 1, gx: 1, gu: 1 }, false).unwrap()
    }

    fn scalar_model(e_coeffs: &[f64], f_x: f64, g_x: f64, p: f64, mu: f64) -> ModelParameters {
        let b = scalar(e_coeffs.len() as u32 - 1);
        let mut th = vec![0.0; b.num_theta()];
        th[..e_coeffs.len()].copy_from_slice(e_coeffs);
        th[b.f_offset() + 1] = f_x;
        th[b.g_offset() + 1] = g_x;
        ModelParameters::new(b, th, SymMat::from_packed(1, vec![p]), mu).unwrap()
    }

    #[test]
    fn linear_block_example() {
        let m = scalar_model(&[0.0, 1.0], 0.5, 0.0, 1.0, 0.5);
        let blk = contraction_block_value(&m, &[0.0], &[0.0]).unwrap();
        let want = [[0.5, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((blk.get(i, j) - want[i][j]).abs() < 1e-15);
            }
        }
        assert!(min_eig(&blk) >= 0.0);
    }

    #[test]
    fn identity_dynamics_infeasible() {
        let m = scalar_model(&[0.0, 1.0], 1.0, 0.0, 1.0, 0.1);
        assert!(min_eig(&contraction_block_value(&m, &[0.0], &[0.0]).unwrap()) < 0.0);
    }

    #[test]
    fn polynomial_rejected_for_state_affine() {
        let b = scalar(3);
        let l = Layout::model_only(&b);
        assert!(matches!(state_affine_stability_block(&b, &l, &[0.0], 0.1), Err(Error::NotStateAffine)));
    }

    fn fix_theta(problem: &mut SdpProblem, l: &Layout, theta: &[f64]) {
        for (k, &v) in theta.iter().enumerate() {
            problem.add_equality(LinearEquality { coeffs: vec![(l.theta_start + k, 1.0)], rhs: v });
        }
    }

    fn feasible(problem: &SdpProblem) -> bool {
        let sol = solve(problem, &SolverOptions::default());
        sol.status == SolveStatus::Optimal
    }

    #[test]
    fn wellposedness_cubic_feasible() {
        let b = scalar(3);
        let mut prob = SdpProblem::new();
        let l = Layout::allocate(&mut prob, &b, crate::layout::LayoutRequest { metric: true, ..Default::default() });
        let cert = wellposedness_sos(&mut prob, &b, &l, 0.5).unwrap();
        assert_eq!(cert.row_monomials[0], vec![vec![0u8], vec![1]]);
        let mut th = vec![0.0; b.num_theta()];
        th[1] = 1.0;
        th[3] = 1.0;
        fix_theta(&mut prob, &l, &th);
        prob.add_equality(LinearEquality { coeffs: vec![(l.p_var(0, 0), 1.0)], rhs: 1.0 });
        assert!(feasible(&prob));
    }

    #[test]
    fn wellposedness_square_infeasible() {
        let b = scalar(2);
        let mut prob = SdpProblem::new();
        let l = Layout::allocate(&mut prob, &b, crate::layout::LayoutRequest { metric: true, ..Default::default() });
        wellposedness_sos(&mut prob, &b, &l, 0.1).unwrap();
        let mut th = vec![0.0; b.num_theta()];
        th[2] = 1.0;
        fix_theta(&mut prob, &l, &th);
        prob.add_equality(LinearEquality { coeffs: vec![(l.p_var(0, 0), 1.0)], rhs: 1.0 });
        assert!(!feasible(&prob));
    }

    #[test]
    fn contraction_sos_linear_matches_pointwise() {
        let b = scalar(1);
        let mut prob = SdpProblem::new();
        let l = Layout::allocate(&mut prob, &b, crate::layout::LayoutRequest { metric: true, ..Default::default() });
        contraction_sos(&mut prob, &b, &l, 0.2).unwrap();
        let pointwise = state_affine_stability_block(&b, &l, &[0.0], 0.2).unwrap();
        assert_eq!(prob.blocks[0].terms, pointwise.terms);
        assert_eq!(prob.blocks[0].constant, pointwise.constant);
    }

    #[test]
    fn contraction_sos_cubic() {
        // e = x + x³, f = 0.5x: feasible with P = 1, μ = 0.1.
        let b = scalar(3);
        let mut prob = SdpProblem::new();
        let l = Layout::allocate(&mut prob, &b, crate::layout::LayoutRequest { metric: true, ..Default::default() });
        contraction_sos(&mut prob, &b, &l, 0.1).unwrap();
        let mut th = vec![0.0; b.num_theta()];
        th[1] = 1.0;
        th[3] = 1.0;
        th[b.f_offset() + 1] = 0.5;
        fix_theta(&mut prob, &l, &th);
        prob.add_equality(LinearEquality { coeffs: vec![(l.p_var(0, 0), 1.0)], rhs: 1.0 });
        assert!(feasible(&prob));

        // f = 2x has gain above one: no metric works.
        let mut bad = SdpProblem::new();
        let l = Layout::allocate(&mut bad, &b, crate::layout::LayoutRequest { metric: true, ..Default::default() });
        contraction_sos(&mut bad, &b, &l, 0.1).unwrap();
        th[b.f_offset() + 1] = 2.0;
        fix_theta(&mut bad, &l, &th);
        bad.add_equality(LinearEquality { coeffs: vec![(l.p_var(0, 0), 1.0)], rhs: 1.0 });
        assert!(!feasible(&bad));
    }

    #[test]
    fn validate_is_deterministic() {
        let b = scalar(1);
        let a = Mat::from_row_slice(1, 3, &[0.0, 0.5, 1.0]);
        let g = Mat::from_row_slice(1, 3, &[0.0, 0.3, 0.0]);
        let m = quadratic_stability_embed(&b, &a, &g, &SymMat::from_packed(1, vec![2.0]), 0.1).unwrap();
        let r1 = validate_certificate(&m, 100, &[(-1.0, 1.0)], &[(-1.0, 1.0)], &[], 7).unwrap();
        let r2 = validate_certificate(&m, 100, &[(-1.0, 1.0)], &[(-1.0, 1.0)], &[], 7).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.passes(1e-9));
        assert_eq!(r1.samples, 100);
    }

    #[test]
    fn halton_first_points() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(2, 3) - 2.0 / 3.0).abs() < 1e-15);
    }
}
