//! Lowering of a fit (objective plus stability constraints) to one SDP, and
//! extraction of the fitted model.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::{
    contraction_block, contraction_sos, state_affine_inputs, state_affine_stability_block, wellposedness_sos,
    SosCertificate,
};
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::layout::{Layout, LayoutRequest};
use crate::linalg::{min_eig, qr_least_squares, SymMat};
use crate::model::{BasisSpec, ModelKind, ModelParameters, ThetaMaps};
use crate::objectives::{local_rie_block, rie_sos_blocks};
use crate::sdp::{solve, AffExpr, BlockBuilder, LinearEquality, SdpProblem, SdpSolution, SolveStatus, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// Least-squares equation error.
    EquationError,
    /// Sum of local RIE epigraph slacks.
    LocalRie,
    /// Sum of SOS-certified RIE slacks.
    SosRie,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintMode {
    /// Contraction LMI at every training point.
    Pointwise,
    /// Contraction certified for all `(x, u)` by matrix SOS.
    Sos,
    /// The single stability LMI of a state-affine model.
    StateAffine,
    /// Only `E + E′ ⪰ 2μI` (equation-error fits, no metric).
    WellPosedness,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub objective: ObjectiveMode,
    pub constraint: ConstraintMode,
    pub mu: f64,
    /// Weight of `tr P + |θ|²`.
    pub rho_reg: f64,
    /// Use every `rie_stride`-th sample for RIE terms.
    pub rie_stride: usize,
    /// Margin of the well-posedness constraint in [`ConstraintMode::WellPosedness`].
    /// Equation error is homogeneous in `(e, f)`, so this margin fixes the
    /// scale of `e` rather than a stability margin.
    pub wellposedness_margin: f64,
    pub solver: SolverOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            objective: ObjectiveMode::LocalRie,
            constraint: ConstraintMode::Pointwise,
            mu: 1e-3,
            rho_reg: 1e-8,
            rie_stride: 1,
            wellposedness_margin: 1.0,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitProblem {
    pub problem: SdpProblem,
    pub layout: Layout,
    pub certificates: Vec<SosCertificate>,
    /// Samples carrying an RIE slack, in slack order.
    pub rie_times: Vec<usize>,
}

fn check_modes(basis: &BasisSpec, data: &DataSet, opts: &FitOptions) -> Result<()> {
    data.require_states()?;
    if data.n() != basis.n || data.m() != basis.m || data.p() != basis.p {
        return Err(Error::DimensionMismatch(format!(
            "data has (n, m, p) = ({}, {}, {}), basis has ({}, {}, {})",
            data.n(),
            data.m(),
            data.p(),
            basis.n,
            basis.m,
            basis.p
        )));
    }
    if !(opts.mu > 0.0) || opts.rho_reg < 0.0 || opts.rie_stride == 0 {
        return Err(Error::InvalidArgument("μ must be positive, ρ_reg nonnegative and the stride positive".into()));
    }
    if opts.constraint == ConstraintMode::WellPosedness && opts.objective != ObjectiveMode::EquationError {
        return Err(Error::ModeConflict("RIE objectives need a contraction metric; well-posedness alone has none".into()));
    }
    if opts.constraint == ConstraintMode::StateAffine && basis.kind() == ModelKind::Polynomial {
        return Err(Error::ModeConflict("state-affine constraint requested for a model that is not state-affine".into()));
    }
    Ok(())
}

/// Builds the SDP for a fit. Decision variables are θ, `vech P` (absent in
/// well-posedness mode), one slack per RIE sample, the regularization and
/// equation-error epigraphs, then Gram variables.
pub fn assemble_fit_problem(basis: &BasisSpec, data: &DataSet, opts: &FitOptions) -> Result<FitProblem> {
    check_modes(basis, data, opts)?;
    let t_max = data.horizon();
    let rie_times: Vec<usize> = match opts.objective {
        ObjectiveMode::EquationError => Vec::new(),
        _ => (0..=t_max).step_by(opts.rie_stride).collect(),
    };
    let metric = opts.constraint != ConstraintMode::WellPosedness;
    let mut problem = SdpProblem::new();
    let layout = Layout::allocate(
        &mut problem,
        basis,
        LayoutRequest {
            metric,
            slacks: rie_times.len(),
            regularization: opts.rho_reg > 0.0,
            equation_error: opts.objective == ObjectiveMode::EquationError,
        },
    );
    let maps: Vec<ThetaMaps> =
        (0..=t_max).map(|t| basis.theta_maps(&data.x[t], &data.u[t])).collect::<Result<_>>()?;
    let mut certificates = Vec::new();

    match opts.objective {
        ObjectiveMode::EquationError => {
            let tv = layout.ee.expect("equation-error epigraph");
            add_equation_error_epigraph(&mut problem, basis, data, &layout, tv)?;
            problem.add_objective(tv, 1.0);
        }
        ObjectiveMode::LocalRie => {
            for (k, &t) in rie_times.iter().enumerate() {
                let next = (t < t_max).then(|| &maps[t + 1]);
                let s = layout.s_var(k);
                problem.add_block(local_rie_block(&maps[t], next, &data.y[t], &layout, s, format!("rie[{t}]")));
                problem.add_objective(s, 1.0);
            }
        }
        ObjectiveMode::SosRie => {
            for (k, &t) in rie_times.iter().enumerate() {
                certificates.push(rie_sos_blocks(&mut problem, basis, &layout, data, t, layout.s_var(k))?);
                problem.add_objective(layout.s_var(k), 1.0);
            }
        }
    }

    match opts.constraint {
        ConstraintMode::Pointwise => {
            for (t, m) in maps.iter().enumerate() {
                problem.add_block(contraction_block(m, &layout, opts.mu, format!("contraction[{t}]")));
            }
        }
        ConstraintMode::Sos => certificates.push(contraction_sos(&mut problem, basis, &layout, opts.mu)?),
        ConstraintMode::StateAffine => {
            for u in state_affine_inputs(basis, &data.u) {
                problem.add_block(state_affine_stability_block(basis, &layout, &u, opts.mu)?);
            }
        }
        ConstraintMode::WellPosedness => {
            certificates.push(wellposedness_sos(&mut problem, basis, &layout, opts.wellposedness_margin)?)
        }
    }

    if let Some(r) = layout.reg {
        add_regularization(&mut problem, &layout, r, opts.rho_reg);
    }
    Ok(FitProblem { problem, layout, certificates, rie_times })
}

/// `t ≥ ‖Aθ − b‖` as `[[t, v′], [v, tI]] ⪰ 0` with the residual compressed by
/// QR to `v = (Rθ − q, ρ₀)`. The norm rather than its square keeps the
/// residual of a consistent system at the solver's gap, not its square root.
fn add_equation_error_epigraph(
    problem: &mut SdpProblem,
    basis: &BasisSpec,
    data: &DataSet,
    layout: &Layout,
    tv: usize,
) -> Result<()> {
    let (a, b) = crate::objectives::ee_system(basis, data)?;
    let (r, q, rest) = qr_least_squares(&a, &b);
    let k = r.rows();
    let mut blk = BlockBuilder::new(k + 2);
    blk.set(0, 0, AffExpr::var(tv));
    for i in 0..k {
        let mut e = AffExpr::constant(-q[i]);
        for j in i..r.cols() {
            e.add_term(layout.theta_start + j, r[(i, j)]);
        }
        blk.set(1 + i, 0, e);
        blk.set(1 + i, 1 + i, AffExpr::var(tv));
    }
    blk.add_constant(k + 1, 0, rest);
    blk.set(k + 1, k + 1, AffExpr::var(tv));
    problem.add_block(blk.finish("equation_error"));
    Ok(())
}

/// `ρ(r + tr P)` with `r ≥ |θ|²` as `[[r, θ′], [θ, I]] ⪰ 0`.
fn add_regularization(problem: &mut SdpProblem, layout: &Layout, r: usize, rho: f64) {
    let nt = layout.num_theta;
    let mut blk = BlockBuilder::new(nt + 1);
    blk.set(0, 0, AffExpr::var(r));
    for k in 0..nt {
        blk.set(1 + k, 0, AffExpr::var(layout.theta_start + k));
        blk.add_constant(1 + k, 1 + k, 1.0);
    }
    problem.add_block(blk.finish("regularization"));
    problem.add_objective(r, rho);
    if layout.p_start.is_some() {
        for i in 0..layout.n {
            problem.add_objective(layout.p_var(i, i), rho);
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub params: ModelParameters,
    /// False when the fit carried no contraction metric; `params.p_mat` is
    /// then the identity placeholder.
    pub has_metric: bool,
    pub solution: SdpSolution,
    /// `Σ s_t` at the optimum (zero for equation-error fits).
    pub slack_sum: f64,
    pub slacks: Vec<f64>,
    pub rie_times: Vec<usize>,
    pub certificates: Vec<SosCertificate>,
    pub num_vars: usize,
    pub num_blocks: usize,
    pub num_equalities: usize,
}

/// Assembles, solves and extracts. A solver status other than optimal is
/// returned in the outcome, not as an error; callers decide how to report it.
pub fn fit(basis: &BasisSpec, data: &DataSet, opts: &FitOptions) -> Result<FitOutcome> {
    let fp = assemble_fit_problem(basis, data, opts)?;
    let sol = solve(&fp.problem, &opts.solver);
    let z = &sol.z;
    let theta = fp.layout.theta_of(z);
    let has_metric = fp.layout.p_start.is_some();
    let mut p = fp.layout.p_of(z).unwrap_or_else(|| SymMat::identity(basis.n));
    if sol.status != SolveStatus::Optimal || min_eig(&p) <= 0.0 {
        // Keep a usable placeholder so the outcome can still be inspected.
        if min_eig(&p) <= 0.0 || !p.is_finite() {
            p = SymMat::identity(basis.n);
        }
    }
    let theta = if theta.iter().all(|v| v.is_finite()) { theta } else { vec![0.0; basis.num_theta()] };
    let params = ModelParameters::new(basis.clone(), theta, p, opts.mu)?;
    let slacks = fp.layout.slacks_of(z);
    Ok(FitOutcome {
        params,
        has_metric,
        slack_sum: slacks.iter().sum(),
        slacks,
        rie_times: fp.rie_times,
        certificates: fp.certificates,
        num_vars: fp.problem.num_vars,
        num_blocks: fp.problem.blocks.len(),
        num_equalities: fp.problem.equalities.len(),
        solution: sol,
    })
}

/// Searches for a metric `P` under which a fixed model satisfies the
/// contraction constraints of `mode` (pointwise at `points`, or SOS). Returns
/// `None` when the search is infeasible.
pub fn find_metric(
    params: &ModelParameters,
    mode: ConstraintMode,
    points: &[(Vec<f64>, Vec<f64>)],
    mu: f64,
    solver: &SolverOptions,
) -> Result<Option<SymMat>> {
    let basis = &params.basis;
    let mut problem = SdpProblem::new();
    let layout = Layout::allocate(&mut problem, basis, LayoutRequest { metric: true, ..Default::default() });
    for (k, &v) in params.theta.iter().enumerate() {
        problem.add_equality(LinearEquality { coeffs: vec![(layout.theta_start + k, 1.0)], rhs: v });
    }
    match mode {
        ConstraintMode::Pointwise => {
            for (i, (x, u)) in points.iter().enumerate() {
                let maps = basis.theta_maps(x, u)?;
                problem.add_block(contraction_block(&maps, &layout, mu, format!("contraction[{i}]")));
            }
        }
        ConstraintMode::Sos => {
            contraction_sos(&mut problem, basis, &layout, mu)?;
        }
        ConstraintMode::StateAffine => {
            let inputs: Vec<Vec<f64>> = points.iter().map(|(_, u)| u.clone()).collect();
            for u in state_affine_inputs(basis, &inputs) {
                problem.add_block(state_affine_stability_block(basis, &layout, &u, mu)?);
            }
        }
        ConstraintMode::WellPosedness => {
            return Err(Error::ModeConflict(String::from("well-posedness does not involve a metric")));
        }
    }
    for i in 0..basis.n {
        problem.add_objective(layout.p_var(i, i), 1.0);
    }
    let sol = solve(&problem, solver);
    if sol.status != SolveStatus::Optimal {
        return Ok(None);
    }
    Ok(layout.p_of(&sol.z).filter(|p| min_eig(p) > 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Degrees;
    use crate::simulate::simulation_error;

    /// `x⁺ = 0.5x + u`, `y = x`, driven by a fixed pseudo-random input.
    fn linear_data(len: usize) -> DataSet {
        let mut x = vec![vec![0.2]];
        let mut u = Vec::new();
        for t in 0..len {
            let ut = ((t * 7919 % 13) as f64 - 6.0) / 6.0;
            u.push(vec![ut]);
            if t + 1 < len {
                x.push(vec![0.5 * x[t][0] + ut]);
            }
        }
        DataSet::new(u, x.clone(), x).unwrap()
    }

    fn linear_basis() -> BasisSpec {
        BasisSpec::new(1, 1, 1, Degrees::linear(), false).unwrap()
    }

    #[test]
    fn block_counts_local_rie_state_affine() {
        let d = linear_data(11);
        let opts = FitOptions { constraint: ConstraintMode::StateAffine, ..Default::default() };
        let fp = assemble_fit_problem(&linear_basis(), &d, &opts).unwrap();
        let count = |prefix: &str| fp.problem.blocks.iter().filter(|b| b.label.starts_with(prefix)).count();
        assert_eq!(count("rie["), 11);
        assert_eq!(count("stability"), 1);
        assert_eq!(fp.rie_times.len(), 11);
    }

    #[test]
    fn stride_subsamples_slacks() {
        let d = linear_data(11);
        let opts = FitOptions { rie_stride: 3, ..Default::default() };
        let fp = assemble_fit_problem(&linear_basis(), &d, &opts).unwrap();
        assert_eq!(fp.rie_times, vec![0, 3, 6, 9]);
        assert_eq!(fp.layout.s_count, 4);
    }

    #[test]
    fn mode_conflicts() {
        let d = linear_data(5);
        let b = linear_basis();
        let bad = FitOptions { constraint: ConstraintMode::WellPosedness, ..Default::default() };
        assert!(matches!(assemble_fit_problem(&b, &d, &bad), Err(Error::ModeConflict(_))));
        let cubic = BasisSpec::new(1, 1, 1, Degrees::uniform(3), false).unwrap();
        let bad = FitOptions { constraint: ConstraintMode::StateAffine, ..Default::default() };
        assert!(matches!(assemble_fit_problem(&cubic, &d, &bad), Err(Error::ModeConflict(_))));
    }

    #[test]
    fn exact_data_fits_exactly() {
        let d = linear_data(30);
        let b = linear_basis();
        for (objective, constraint) in [
            (ObjectiveMode::LocalRie, ConstraintMode::Pointwise),
            (ObjectiveMode::LocalRie, ConstraintMode::StateAffine),
            (ObjectiveMode::EquationError, ConstraintMode::WellPosedness),
        ] {
            let opts = FitOptions { objective, constraint, ..Default::default() };
            let out = fit(&b, &d, &opts).unwrap();
            assert_eq!(out.solution.status, SolveStatus::Optimal, "{objective:?} {constraint:?}");
            let err = simulation_error(&out.params, &d).unwrap();
            assert!(err < 1e-6, "{objective:?} {constraint:?}: {err}");
        }
    }

    #[test]
    fn metric_search_on_contracting_model() {
        let d = linear_data(30);
        let out = fit(&linear_basis(), &d, &FitOptions::default()).unwrap();
        let pts: Vec<_> = (0..d.len()).map(|t| (d.x[t].clone(), d.u[t].clone())).collect();
        let p = find_metric(&out.params, ConstraintMode::Pointwise, &pts, 1e-3, &SolverOptions::default()).unwrap();
        assert!(p.is_some());
        // e = 1, f = 2 cannot contract.
        let mut params = out.params.clone();
        let fo = params.basis.f_offset();
        params.theta[fo + 1] = 2.0;
        params.theta[1] = 1.0;
        let p = find_metric(&params, ConstraintMode::Pointwise, &pts, 1e-3, &SolverOptions::default()).unwrap();
        assert!(p.is_none());
    }
}
