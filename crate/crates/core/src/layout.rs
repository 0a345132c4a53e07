//! Placement of model unknowns inside an SDP decision vector.
//!
//! The order is θ, then `vech(P)` (lower packed, `(i, j)` with `i ≥ j` at
//! `i(i+1)/2 + j`), then epigraph slacks `s_t`, then the regularization
//! epigraph, then the equation-error epigraph. Gram variables of SOS
//! certificates are appended afterwards by whoever needs them.

use alloc::vec::Vec;

use crate::linalg::SymMat;
use crate::model::BasisSpec;
use crate::sdp::{AffExpr, SdpProblem};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub num_theta: usize,
    pub theta_start: usize,
    pub p_start: Option<usize>,
    pub s_start: usize,
    pub s_count: usize,
    pub reg: Option<usize>,
    pub ee: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LayoutRequest {
    pub metric: bool,
    pub slacks: usize,
    pub regularization: bool,
    pub equation_error: bool,
}

impl Layout {
    pub fn allocate(problem: &mut SdpProblem, basis: &BasisSpec, req: LayoutRequest) -> Self {
        let n = basis.n;
        let theta_start = problem.add_vars("theta", basis.num_theta());
        let p_start = req.metric.then(|| problem.add_vars("P", n * (n + 1) / 2));
        let s_start = problem.add_vars("s", req.slacks);
        let reg = req.regularization.then(|| problem.add_vars("r_reg", 1));
        let ee = req.equation_error.then(|| problem.add_vars("t_ee", 1));
        Self { n, num_theta: basis.num_theta(), theta_start, p_start, s_start, s_count: req.slacks, reg, ee }
    }

    /// Layout for evaluating blocks at a point `[θ, vech P]` without slacks.
    pub fn model_only(basis: &BasisSpec) -> Self {
        let n = basis.n;
        Self {
            n,
            num_theta: basis.num_theta(),
            theta_start: 0,
            p_start: Some(basis.num_theta()),
            s_start: basis.num_theta() + n * (n + 1) / 2,
            s_count: 0,
            reg: None,
            ee: None,
        }
    }

    pub fn p_var(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.p_start.expect("layout has no metric variables") + r * (r + 1) / 2 + c
    }

    pub fn p_expr(&self, i: usize, j: usize) -> AffExpr {
        AffExpr::var(self.p_var(i, j))
    }

    pub fn s_var(&self, t: usize) -> usize {
        debug_assert!(t < self.s_count);
        self.s_start + t
    }

    pub fn theta_of(&self, z: &[f64]) -> Vec<f64> {
        z[self.theta_start..self.theta_start + self.num_theta].to_vec()
    }

    pub fn p_of(&self, z: &[f64]) -> Option<SymMat> {
        let n = self.n;
        self.p_start.map(|s| SymMat::from_packed(n, z[s..s + n * (n + 1) / 2].to_vec()))
    }

    pub fn slacks_of(&self, z: &[f64]) -> Vec<f64> {
        z[self.s_start..self.s_start + self.s_count].to_vec()
    }

    /// Decision vector `[θ, vech P]` for [`Layout::model_only`].
    pub fn pack_model(theta: &[f64], p: &SymMat) -> Vec<f64> {
        theta.iter().chain(p.packed()).copied().collect()
    }
}
