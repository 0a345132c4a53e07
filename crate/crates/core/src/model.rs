//! Implicit models `e(x⁺) = f(x, u)`, `y = g(x, u)` whose three maps are linear
//! in one coefficient vector θ over monomial bases.
//!
//! θ is laid out as the `e` block, then `f`, then `g`. Inside a block the
//! coefficient of monomial `k` in output `i` sits at `i·len + k`, with `len` the
//! basis length and monomials in graded lexicographic order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Mat, SymMat};
use crate::poly::{self, graded_lex, mono_deriv, mono_eval, Monomial, Poly, PolyAff};
use crate::sdp::AffExpr;

pub const MAX_STATES: usize = 6;
pub const MAX_DEGREE: u32 = 5;

/// Maximum monomial degrees. `fx`/`gx` bound the state degree and `fu`/`gu`
/// bound the input part; see [`BasisSpec::new`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Degrees {
    pub e: u32,
    pub fx: u32,
    pub fu: u32,
    pub gx: u32,
    pub gu: u32,
}

impl Degrees {
    pub fn uniform(d: u32) -> Self {
        Self { e: d, fx: d, fu: d, gx: d, gu: d }
    }

    pub fn linear() -> Self {
        Self::uniform(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// Affine in `(x, u)`.
    Linear,
    /// Affine in `x` for every fixed `u`.
    StateAffine,
    Polynomial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisSpec {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub degrees: Degrees,
    /// Allow products of inputs in `f` and `g` instead of staying affine in `u`.
    pub full_xu: bool,
    /// Monomials in `x`.
    pub e_mono: Vec<Monomial>,
    /// Monomials in `(x, u)`, `n + m` variables.
    pub f_mono: Vec<Monomial>,
    pub g_mono: Vec<Monomial>,
}

impl BasisSpec {
    /// Builds the three bases.
    ///
    /// Affine in `u` (the default) the `f` basis is `{x^α : |α| ≤ fx}` together
    /// with `{x^α u_j : |α| + 1 ≤ fu}`. With `full_xu` it is every `x^α u^β`
    /// with `|α| ≤ fx`, `|β| ≤ fu` and `|α| + |β| ≤ max(fx, fu)`. The same
    /// rule with `gx`, `gu` gives the `g` basis.
    pub fn new(n: usize, m: usize, p: usize, degrees: Degrees, full_xu: bool) -> Result<Self> {
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::InvalidArgument("state, input and output dimensions must be positive".into()));
        }
        if n > MAX_STATES {
            return Err(Error::DegreeOverflow(format!("n = {n} exceeds the limit {MAX_STATES}")));
        }
        let d = degrees;
        for (name, v) in [("e", d.e), ("fx", d.fx), ("fu", d.fu), ("gx", d.gx), ("gu", d.gu)] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("degree {name} must be at least 1")));
            }
            if v > MAX_DEGREE {
                return Err(Error::DegreeOverflow(format!("degree {name} = {v} exceeds the limit {MAX_DEGREE}")));
            }
        }
        let e_mono = graded_lex(n, d.e);
        let f_mono = xu_basis(n, m, d.fx, d.fu, full_xu);
        let g_mono = xu_basis(n, m, d.gx, d.gu, full_xu);
        Ok(Self { n, m, p, degrees, full_xu, e_mono, f_mono, g_mono })
    }

    pub fn e_len(&self) -> usize {
        self.e_mono.len()
    }

    pub fn f_len(&self) -> usize {
        self.f_mono.len()
    }

    pub fn g_len(&self) -> usize {
        self.g_mono.len()
    }

    pub fn e_offset(&self) -> usize {
        0
    }

    pub fn f_offset(&self) -> usize {
        self.n * self.e_len()
    }

    pub fn g_offset(&self) -> usize {
        self.f_offset() + self.n * self.f_len()
    }

    pub fn num_theta(&self) -> usize {
        self.g_offset() + self.p * self.g_len()
    }

    /// Classified from the monomials present.
    pub fn kind(&self) -> ModelKind {
        let n = self.n;
        let xdeg = |m: &Monomial| m[..n].iter().map(|&e| e as u32).sum::<u32>();
        let state_affine = self.e_mono.iter().all(|m| poly::degree(m) <= 1)
            && self.f_mono.iter().chain(&self.g_mono).all(|m| xdeg(m) <= 1);
        let linear = self.e_mono.iter().chain(&self.f_mono).chain(&self.g_mono).all(|m| poly::degree(m) <= 1);
        if linear {
            ModelKind::Linear
        } else if state_affine {
            ModelKind::StateAffine
        } else {
            ModelKind::Polynomial
        }
    }

    /// Index in `e_mono` of the linear monomial `x_j`.
    pub fn e_linear_index(&self, j: usize) -> usize {
        1 + j
    }

    /// Evaluates all basis functions and their state derivatives at `(x, u)`.
    pub fn theta_maps(&self, x: &[f64], u: &[f64]) -> Result<ThetaMaps> {
        self.check_point(x, u)?;
        let xu: Vec<f64> = x.iter().chain(u).copied().collect();
        let values = |monos: &[Monomial], v: &[f64]| -> (Vec<f64>, Mat) {
            let phi = monos.iter().map(|mo| mono_eval(mo, v)).collect();
            let dphi = Mat::from_fn(monos.len(), self.n, |k, j| mono_deriv(&monos[k], v, j));
            (phi, dphi)
        };
        let (e_phi, e_dphi) = values(&self.e_mono, x);
        let (f_phi, f_dphi) = values(&self.f_mono, &xu);
        let (g_phi, g_dphi) = values(&self.g_mono, &xu);
        Ok(ThetaMaps { basis_n: self.n, p: self.p, offsets: self.offsets(), e_phi, e_dphi, f_phi, f_dphi, g_phi, g_dphi })
    }

    fn offsets(&self) -> [(usize, usize); 3] {
        [(self.e_offset(), self.e_len()), (self.f_offset(), self.f_len()), (self.g_offset(), self.g_len())]
    }

    pub fn check_point(&self, x: &[f64], u: &[f64]) -> Result<()> {
        if x.len() != self.n || u.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "point has x of length {} and u of length {}, basis expects {} and {}",
                x.len(),
                u.len(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }
}

impl BasisSpec {
    fn part_info(&self, part: Part) -> (usize, usize, &[Monomial], bool) {
        match part {
            Part::E => (self.e_offset(), self.e_len(), &self.e_mono, true),
            Part::F => (self.f_offset(), self.f_len(), &self.f_mono, false),
            Part::G => (self.g_offset(), self.g_len(), &self.g_mono, false),
        }
    }

    /// Output `i` of `e`, `f` or `g` as a polynomial in the `n + m` variables
    /// `(x, u)` with coefficients affine in θ stored from `theta_start`.
    pub fn value_poly(&self, part: Part, i: usize, theta_start: usize) -> PolyAff {
        let (off, len, monos, x_only) = self.part_info(part);
        let nv = self.n + self.m;
        let mut out = PolyAff::zero(nv);
        for (k, mo) in monos.iter().enumerate() {
            let mut full = mo.clone();
            if x_only {
                full.resize(nv, 0);
            }
            out.add_term(full, &AffExpr::var(theta_start + off + i * len + k), 1.0);
        }
        out
    }

    /// `∂/∂x_j` of [`BasisSpec::value_poly`].
    pub fn jac_poly(&self, part: Part, i: usize, j: usize, theta_start: usize) -> PolyAff {
        let (off, len, monos, x_only) = self.part_info(part);
        let nv = self.n + self.m;
        let mut out = PolyAff::zero(nv);
        for (k, mo) in monos.iter().enumerate() {
            if mo[j] == 0 {
                continue;
            }
            let mut d = mo.clone();
            if x_only {
                d.resize(nv, 0);
            }
            d[j] -= 1;
            out.add_term(d, &AffExpr::var(theta_start + off + i * len + k), mo[j] as f64);
        }
        out
    }

    /// Output `i` at `(x₀ + δ, u)` as a polynomial in the `n` variables `δ`.
    pub fn value_poly_at(&self, part: Part, i: usize, theta_start: usize, x0: &[f64], u: &[f64]) -> PolyAff {
        let (off, len, monos, _) = self.part_info(part);
        let n = self.n;
        let mut out = PolyAff::zero(n);
        for (k, mo) in monos.iter().enumerate() {
            let uval = if mo.len() > n { mono_eval(&mo[n..], u) } else { 1.0 };
            if uval == 0.0 {
                continue;
            }
            let mut xm = Poly::zero(n);
            xm.add_term(mo[..n].to_vec(), uval);
            let shifted = xm.shifted(x0);
            let var = AffExpr::var(theta_start + off + i * len + k);
            for (m, &c) in &shifted.terms {
                out.add_term(m.clone(), &var, c);
            }
        }
        out
    }
}

fn xu_basis(n: usize, m: usize, dx: u32, du: u32, full: bool) -> Vec<Monomial> {
    graded_lex(n + m, dx.max(du))
        .into_iter()
        .filter(|mo| {
            let ax: u32 = mo[..n].iter().map(|&e| e as u32).sum();
            let bu: u32 = mo[n..].iter().map(|&e| e as u32).sum();
            if full {
                ax <= dx && bu <= du
            } else {
                (bu == 0 && ax <= dx) || (bu == 1 && ax + 1 <= du)
            }
        })
        .collect()
}

/// Basis values `φ` and state derivatives `∂φ/∂x` at one point. Every model
/// quantity at that point is linear in θ through these.
#[derive(Clone, Debug)]
pub struct ThetaMaps {
    basis_n: usize,
    p: usize,
    offsets: [(usize, usize); 3],
    pub e_phi: Vec<f64>,
    pub e_dphi: Mat,
    pub f_phi: Vec<f64>,
    pub f_dphi: Mat,
    pub g_phi: Vec<f64>,
    pub g_dphi: Mat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    E,
    F,
    G,
}

impl ThetaMaps {
    pub fn n(&self) -> usize {
        self.basis_n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    fn part(&self, part: Part) -> (usize, usize, &[f64], &Mat, usize) {
        match part {
            Part::E => (self.offsets[0].0, self.offsets[0].1, &self.e_phi, &self.e_dphi, self.basis_n),
            Part::F => (self.offsets[1].0, self.offsets[1].1, &self.f_phi, &self.f_dphi, self.basis_n),
            Part::G => (self.offsets[2].0, self.offsets[2].1, &self.g_phi, &self.g_dphi, self.p),
        }
    }

    /// Output `i` of `e`, `f` or `g` as an affine expression of θ stored from
    /// decision variable `theta_start`.
    pub fn value_expr(&self, part: Part, i: usize, theta_start: usize) -> AffExpr {
        let (off, len, phi, _, _) = self.part(part);
        let mut e = AffExpr::zero();
        for k in 0..len {
            e.add_term(theta_start + off + i * len + k, phi[k]);
        }
        e
    }

    /// Jacobian entry `(i, j)` of `e`, `f` or `g` with respect to `x`.
    pub fn jac_expr(&self, part: Part, i: usize, j: usize, theta_start: usize) -> AffExpr {
        let (off, len, _, dphi, _) = self.part(part);
        let mut e = AffExpr::zero();
        for k in 0..len {
            e.add_term(theta_start + off + i * len + k, dphi[(k, j)]);
        }
        e
    }

    pub fn value(&self, part: Part, theta: &[f64]) -> Vec<f64> {
        let (off, len, phi, _, rows) = self.part(part);
        (0..rows).map(|i| (0..len).map(|k| theta[off + i * len + k] * phi[k]).sum()).collect()
    }

    pub fn jacobian(&self, part: Part, theta: &[f64]) -> Mat {
        let (off, len, _, dphi, rows) = self.part(part);
        Mat::from_fn(rows, self.basis_n, |i, j| (0..len).map(|k| theta[off + i * len + k] * dphi[(k, j)]).sum())
    }

    /// Dense map `θ ↦ value` with one row per output.
    pub fn value_map(&self, part: Part, num_theta: usize) -> Mat {
        let (off, len, phi, _, rows) = self.part(part);
        let mut m = Mat::zeros(rows, num_theta);
        for i in 0..rows {
            for k in 0..len {
                m[(i, off + i * len + k)] = phi[k];
            }
        }
        m
    }

    /// Dense map `θ ↦ vec(J)` where `J` is the Jacobian stored row-major.
    pub fn jacobian_map(&self, part: Part, num_theta: usize) -> Mat {
        let (off, len, _, dphi, rows) = self.part(part);
        let n = self.basis_n;
        let mut m = Mat::zeros(rows * n, num_theta);
        for i in 0..rows {
            for j in 0..n {
                for k in 0..len {
                    m[(i * n + j, off + i * len + k)] = dphi[(k, j)];
                }
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParameters {
    pub basis: BasisSpec,
    pub theta: Vec<f64>,
    /// Contraction metric.
    pub p_mat: SymMat,
    pub mu: f64,
}

impl ModelParameters {
    pub fn new(basis: BasisSpec, theta: Vec<f64>, p_mat: SymMat, mu: f64) -> Result<Self> {
        if theta.len() != basis.num_theta() {
            return Err(Error::DimensionMismatch(format!(
                "θ has {} entries, basis needs {}",
                theta.len(),
                basis.num_theta()
            )));
        }
        if p_mat.dim() != basis.n {
            return Err(Error::DimensionMismatch(format!("P is {0}×{0}, expected {1}×{1}", p_mat.dim(), basis.n)));
        }
        if !(mu > 0.0) {
            return Err(Error::InvalidArgument(format!("μ must be positive, got {mu}")));
        }
        Ok(Self { basis, theta, p_mat, mu })
    }

    /// All-zero θ with `P = I`.
    pub fn zeros(basis: BasisSpec, mu: f64) -> Result<Self> {
        let nt = basis.num_theta();
        let n = basis.n;
        Self::new(basis, vec![0.0; nt], SymMat::identity(n), mu)
    }

    pub fn kind(&self) -> ModelKind {
        self.basis.kind()
    }

    pub fn maps(&self, x: &[f64], u: &[f64]) -> Result<ThetaMaps> {
        self.basis.theta_maps(x, u)
    }

    pub fn eval_e(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let len = self.basis.e_len();
        Ok((0..self.basis.n)
            .map(|i| self.basis.e_mono.iter().enumerate().map(|(k, mo)| self.theta[i * len + k] * mono_eval(mo, x)).sum())
            .collect())
    }

    pub fn jac_e(&self, x: &[f64]) -> Result<Mat> {
        self.check_x(x)?;
        let len = self.basis.e_len();
        let n = self.basis.n;
        Ok(Mat::from_fn(n, n, |i, j| {
            self.basis.e_mono.iter().enumerate().map(|(k, mo)| self.theta[i * len + k] * mono_deriv(mo, x, j)).sum()
        }))
    }

    pub fn eval_f(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.maps(x, u)?.value(Part::F, &self.theta))
    }

    pub fn eval_g(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.maps(x, u)?.value(Part::G, &self.theta))
    }

    pub fn jac_f(&self, x: &[f64], u: &[f64]) -> Result<Mat> {
        Ok(self.maps(x, u)?.jacobian(Part::F, &self.theta))
    }

    pub fn jac_g(&self, x: &[f64], u: &[f64]) -> Result<Mat> {
        Ok(self.maps(x, u)?.jacobian(Part::G, &self.theta))
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.basis.n {
            return Err(Error::DimensionMismatch(format!("x has length {}, expected {}", x.len(), self.basis.n)));
        }
        Ok(())
    }

    /// Output `i` of `e` as a polynomial in `x`.
    pub fn e_poly(&self, i: usize) -> Poly {
        let len = self.basis.e_len();
        let mut p = Poly::zero(self.basis.n);
        for (k, mo) in self.basis.e_mono.iter().enumerate() {
            p.add_term(mo.clone(), self.theta[i * len + k]);
        }
        p
    }

    /// The contraction matrix `F′P⁻¹F + P − E − E′ + G′G` at `(x, u)`. It must be
    /// `⪯ −μI` for the model to contract at that point.
    pub fn contraction_matrix(&self, x: &[f64], u: &[f64]) -> Result<SymMat> {
        let maps = self.maps(x, u)?;
        let e = maps.jacobian(Part::E, &self.theta);
        let f = maps.jacobian(Part::F, &self.theta);
        let g = maps.jacobian(Part::G, &self.theta);
        let chol = Cholesky::from_sym(&self.p_mat)?;
        let n = self.basis.n;
        let mut pinv_f = Mat::zeros(n, n);
        for j in 0..n {
            let col = chol.solve(&f.col(j));
            for i in 0..n {
                pinv_f[(i, j)] = col[i];
            }
        }
        let q = f.tr_matmul(&pinv_f).add(&self.p_mat.to_full()).sub(&e).sub(&e.transpose()).add(&g.tr_matmul(&g));
        Ok(SymMat::from_full(&q))
    }
}

/// Embeds an explicit model `x⁺ = a(x, u)`, `y = g(x, u)` into the implicit
/// class with `e(x) = Mx`, `f = M·a` and `P = M`; the two models have identical
/// trajectories. `a_coeffs` is `n × f_len` over the `f` basis and `g_coeffs`
/// is `p × g_len`.
pub fn quadratic_stability_embed(
    basis: &BasisSpec,
    a_coeffs: &Mat,
    g_coeffs: &Mat,
    m: &SymMat,
    mu: f64,
) -> Result<ModelParameters> {
    let n = basis.n;
    if a_coeffs.rows() != n || a_coeffs.cols() != basis.f_len() {
        return Err(Error::DimensionMismatch("a coefficients do not match the f basis".into()));
    }
    if g_coeffs.rows() != basis.p || g_coeffs.cols() != basis.g_len() {
        return Err(Error::DimensionMismatch("g coefficients do not match the g basis".into()));
    }
    if m.dim() != n {
        return Err(Error::DimensionMismatch("M has the wrong size".into()));
    }
    Cholesky::from_sym(m)?;
    let mut theta = vec![0.0; basis.num_theta()];
    let el = basis.e_len();
    for i in 0..n {
        for j in 0..n {
            theta[i * el + basis.e_linear_index(j)] = m.get(i, j);
        }
    }
    let ma = m.to_full().matmul(a_coeffs);
    let fl = basis.f_len();
    for i in 0..n {
        for k in 0..fl {
            theta[basis.f_offset() + i * fl + k] = ma[(i, k)];
        }
    }
    let gl = basis.g_len();
    for i in 0..basis.p {
        for k in 0..gl {
            theta[basis.g_offset() + i * gl + k] = g_coeffs[(i, k)];
        }
    }
    ModelParameters::new(basis.clone(), theta, m.clone(), mu)
}
