//! Equation errors and the fidelity functionals built on them: the
//! least-squares equation error, the local robust identification error (as an
//! LMI epigraph and in closed form), the lifted bound, the linearized
//! simulation error, and the sum-of-squares form of the robust identification
//! error.
//!
//! All evaluators work on `t = 0..=T`. Perturbations start at `Δ₀ = 0` and
//! follow `E(x̃_{t+1})Δ_{t+1} = F(x̃_t, ũ_t)Δ_t + ε_t`. The local RIE sum has
//! one term per sample; the last one has `ε_T = 0` because no successor state
//! exists, and it is what makes the sum bound the lifted bound from above.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::{matrix_sos, PolyMatrix, SosCertificate};
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::layout::Layout;
use crate::linalg::{block_tridiag_solve, dot, max_eig, sup_concave_quadratic, BlockTridiagonal, Cholesky, Lu, Mat, SymMat};
use crate::model::{BasisSpec, ModelParameters, Part, ThetaMaps};
use crate::poly::{Poly, PolyAff};
use crate::sdp::{AffExpr, BlockBuilder, LmiBlockTemplate, SdpProblem};

/// `ε_t = e(x̃_{t+1}) − f(x̃_t, ũ_t)` for `t < T` and `η_t = ỹ_t − g(x̃_t, ũ_t)`
/// for `t ≤ T`.
#[derive(Clone, Debug, PartialEq)]
pub struct EquationErrors {
    pub eps: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
}

fn check_data(params: &ModelParameters, data: &DataSet) -> Result<()> {
    data.require_states()?;
    let b = &params.basis;
    if data.n() != b.n || data.m() != b.m || data.p() != b.p {
        return Err(Error::DimensionMismatch(format!(
            "data has (n, m, p) = ({}, {}, {}), model has ({}, {}, {})",
            data.n(),
            data.m(),
            data.p(),
            b.n,
            b.m,
            b.p
        )));
    }
    Ok(())
}

pub fn equation_errors(params: &ModelParameters, data: &DataSet) -> Result<EquationErrors> {
    check_data(params, data)?;
    let t_max = data.horizon();
    let mut eps = Vec::with_capacity(t_max);
    let mut eta = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        let g = params.eval_g(&data.x[t], &data.u[t])?;
        eta.push(data.y[t].iter().zip(&g).map(|(a, b)| a - b).collect());
        if t < t_max {
            let e = params.eval_e(&data.x[t + 1])?;
            let f = params.eval_f(&data.x[t], &data.u[t])?;
            eps.push(e.iter().zip(&f).map(|(a, b)| a - b).collect());
        }
    }
    Ok(EquationErrors { eps, eta })
}

/// `Σ|ε_t|² + Σ|η_t|²`.
pub fn j_ee(params: &ModelParameters, data: &DataSet) -> Result<f64> {
    let ee = equation_errors(params, data)?;
    Ok(ee.eps.iter().chain(&ee.eta).map(|v| dot(v, v)).sum())
}

/// The equation error as a linear least-squares residual, `J_EE = ‖Aθ − b‖²`.
pub fn ee_system(basis: &BasisSpec, data: &DataSet) -> Result<(Mat, Vec<f64>)> {
    data.require_states()?;
    let (n, p) = (basis.n, basis.p);
    let t_max = data.horizon();
    let nt = basis.num_theta();
    let rows = n * t_max + p * (t_max + 1);
    let mut a = Mat::zeros(rows, nt);
    let mut b = vec![0.0; rows];
    let mut r = 0;
    let mut next = basis.theta_maps(&data.x[0], &data.u[0])?;
    for t in 0..=t_max {
        let cur = next;
        if t < t_max {
            next = basis.theta_maps(&data.x[t + 1], &data.u[t + 1])?;
            let e = next.value_map(Part::E, nt);
            let f = cur.value_map(Part::F, nt);
            for i in 0..n {
                for k in 0..nt {
                    a[(r, k)] = e[(i, k)] - f[(i, k)];
                }
                r += 1;
            }
        } else {
            next = cur.clone();
        }
        let g = cur.value_map(Part::G, nt);
        for i in 0..p {
            a.row_mut(r).copy_from_slice(g.row(i));
            b[r] = data.y[t][i];
            r += 1;
        }
    }
    Ok((a, b))
}

/// Gradient of [`j_ee`] with respect to θ.
pub fn j_ee_gradient(params: &ModelParameters, data: &DataSet) -> Result<Vec<f64>> {
    check_data(params, data)?;
    let (a, b) = ee_system(&params.basis, data)?;
    let mut r = a.matvec(&params.theta);
    r.iter_mut().zip(&b).for_each(|(v, bb)| *v -= bb);
    Ok(a.tr_matvec(&r).into_iter().map(|v| 2.0 * v).collect())
}

/// Jacobians `E, F, G` at sample `t` and the closed-form local RIE pieces.
struct PointQuad {
    q: SymMat,
    b: Vec<f64>,
    c: f64,
}

fn local_rie_quadratic(params: &ModelParameters, e: &Mat, f: &Mat, g: &Mat, eps: &[f64], eta: &[f64]) -> Result<PointQuad> {
    let n = params.basis.n;
    let chol = Cholesky::from_sym(&params.p_mat)?;
    let pinv_eps = chol.solve(eps);
    let mut pinv_f = Mat::zeros(n, n);
    for j in 0..n {
        let col = chol.solve(&f.col(j));
        for i in 0..n {
            pinv_f[(i, j)] = col[i];
        }
    }
    let q = f.tr_matmul(&pinv_f).add(&params.p_mat.to_full()).sub(e).sub(&e.transpose()).add(&g.tr_matmul(g));
    let mut b = f.tr_matvec(&pinv_eps);
    for (bi, gi) in b.iter_mut().zip(g.tr_matvec(eta)) {
        *bi += gi;
    }
    let c = dot(eps, &pinv_eps) + dot(eta, eta);
    Ok(PointQuad { q: SymMat::from_full(&q), b, c })
}

/// Local RIE term at sample `t`:
/// `sup_Δ |FΔ + ε|²_{P⁻¹} + |Δ|²_P − 2Δ′EΔ + |GΔ + η|²` with all Jacobians at
/// `(x̃_t, ũ_t)`, and `ε_T = 0`.
pub fn eval_local_rie_term(params: &ModelParameters, data: &DataSet, t: usize) -> Result<f64> {
    check_data(params, data)?;
    if t > data.horizon() {
        return Err(Error::InvalidArgument(format!("t = {t} beyond horizon {}", data.horizon())));
    }
    let (x, u) = (&data.x[t], &data.u[t]);
    let maps = params.maps(x, u)?;
    let e = maps.jacobian(Part::E, &params.theta);
    let f = maps.jacobian(Part::F, &params.theta);
    let g = maps.jacobian(Part::G, &params.theta);
    let eps = if t < data.horizon() {
        let en = params.eval_e(&data.x[t + 1])?;
        en.iter().zip(maps.value(Part::F, &params.theta)).map(|(a, b)| a - b).collect()
    } else {
        vec![0.0; params.basis.n]
    };
    let gv = maps.value(Part::G, &params.theta);
    let eta: Vec<f64> = data.y[t].iter().zip(&gv).map(|(a, b)| a - b).collect();
    let pq = local_rie_quadratic(params, &e, &f, &g, &eps, &eta)?;
    Ok(sup_concave_quadratic(&pq.q, &pq.b, pq.c)?.0)
}

/// `Σ_t` of [`eval_local_rie_term`] over `t = 0..=T`.
pub fn local_rie_total(params: &ModelParameters, data: &DataSet) -> Result<f64> {
    (0..=data.horizon()).map(|t| eval_local_rie_term(params, data, t)).sum()
}

/// Affine expressions of `ε_t` (zero when `next` is `None`) and `η_t`.
pub fn equation_error_exprs(
    cur: &ThetaMaps,
    next: Option<&ThetaMaps>,
    y: &[f64],
    theta_start: usize,
) -> (Vec<AffExpr>, Vec<AffExpr>) {
    let eps = (0..cur.n())
        .map(|i| match next {
            Some(nx) => {
                let mut e = nx.value_expr(Part::E, i, theta_start);
                e.add_scaled(-1.0, &cur.value_expr(Part::F, i, theta_start));
                e
            }
            None => AffExpr::zero(),
        })
        .collect();
    let eta = (0..cur.p())
        .map(|i| {
            let mut e = cur.value_expr(Part::G, i, theta_start).scaled(-1.0);
            e.constant += y[i];
            e
        })
        .collect();
    (eps, eta)
}

/// Epigraph block of the local RIE at one sample, with rows ordered
/// `[Δ (n), 1, P⁻¹ part (n), output part (p)]`:
///
/// ```text
/// [ E + E′ − P   0    F′   G′ ]
/// [ 0            s    ε′   η′ ]
/// [ F            ε    P    0  ]  ⪰ 0
/// [ G            η    0    I  ]
/// ```
pub fn local_rie_block(
    cur: &ThetaMaps,
    next: Option<&ThetaMaps>,
    y: &[f64],
    layout: &Layout,
    s_var: usize,
    label: impl Into<String>,
) -> LmiBlockTemplate {
    let (n, p) = (cur.n(), cur.p());
    let ts = layout.theta_start;
    let (eps, eta) = equation_error_exprs(cur, next, y, ts);
    let mut b = BlockBuilder::new(2 * n + p + 1);
    let (one, fr, gr) = (n, n + 1, 2 * n + 1);
    for i in 0..n {
        for j in 0..=i {
            let mut e = cur.jac_expr(Part::E, i, j, ts);
            e.add_scaled(1.0, &cur.jac_expr(Part::E, j, i, ts));
            e.add_scaled(-1.0, &layout.p_expr(i, j));
            b.set(i, j, e);
            b.set(fr + i, fr + j, layout.p_expr(i, j));
        }
        for j in 0..n {
            b.set(fr + i, j, cur.jac_expr(Part::F, i, j, ts));
        }
        b.set(fr + i, one, eps[i].clone());
    }
    b.set(one, one, AffExpr::var(s_var));
    for i in 0..p {
        for j in 0..n {
            b.set(gr + i, j, cur.jac_expr(Part::G, i, j, ts));
        }
        b.set(gr + i, one, eta[i].clone());
        b.add_constant(gr + i, gr + i, 1.0);
    }
    b.finish(label)
}

/// The linearized error dynamics along the data in lifted form. Index `s`
/// of `diag` and `sub` refers to `Δ_{s+1}`.
#[derive(Clone, Debug)]
pub struct LiftedSystem {
    /// `E(x̃_s)` for `s = 1..=T`.
    pub e: Vec<Mat>,
    /// `F(x̃_s, ũ_s)` for `s = 0..T`.
    pub f: Vec<Mat>,
    /// `G(x̃_s, ũ_s)` for `s = 0..=T`.
    pub g: Vec<Mat>,
    pub eps: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
}

impl LiftedSystem {
    pub fn horizon(&self) -> usize {
        self.e.len()
    }

    /// `HΔ⃗` for stacked `Δ⃗ = (Δ₁, …, Δ_T)`, block row `s` being
    /// `E(x̃_{s+1})Δ_{s+1} − F(x̃_s, ũ_s)Δ_s` with `Δ₀ = 0`.
    pub fn h_mul(&self, delta: &[f64]) -> Vec<f64> {
        let n = self.eps.first().map_or(0, Vec::len);
        let t_max = self.horizon();
        let mut out = vec![0.0; n * t_max];
        for s in 0..t_max {
            let mut r = self.e[s].matvec(&delta[s * n..(s + 1) * n]);
            if s > 0 {
                let fd = self.f[s].matvec(&delta[(s - 1) * n..s * n]);
                r.iter_mut().zip(fd).for_each(|(a, b)| *a -= b);
            }
            out[s * n..(s + 1) * n].copy_from_slice(&r);
        }
        out
    }

    /// Solves `HΔ⃗ = ε⃗` forward in time.
    pub fn forward(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.eps.first().map_or(0, Vec::len);
        let mut delta = vec![vec![0.0; n]];
        for s in 0..self.horizon() {
            let mut rhs = self.f[s].matvec(&delta[s]);
            rhs.iter_mut().zip(&self.eps[s]).for_each(|(a, b)| *a += b);
            let lu = Lu::new(&self.e[s]).map_err(|_| Error::SingularE { step: s + 1 })?;
            delta.push(lu.solve(&rhs));
        }
        Ok(delta)
    }
}

pub fn build_lifted(params: &ModelParameters, data: &DataSet) -> Result<LiftedSystem> {
    let ee = equation_errors(params, data)?;
    let t_max = data.horizon();
    let mut e = Vec::with_capacity(t_max);
    let mut f = Vec::with_capacity(t_max);
    let mut g = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        let maps = params.maps(&data.x[t], &data.u[t])?;
        if t > 0 {
            e.push(maps.jacobian(Part::E, &params.theta));
        }
        if t < t_max {
            f.push(maps.jacobian(Part::F, &params.theta));
        }
        g.push(maps.jacobian(Part::G, &params.theta));
    }
    Ok(LiftedSystem { e, f, g, eps: ee.eps, eta: ee.eta })
}

/// `J⁰ = Σ_t |G_tΔ_t + η_t|²` along the forward solution of the linearized
/// error dynamics.
pub fn linearized_sim_error(params: &ModelParameters, data: &DataSet) -> Result<f64> {
    let lifted = build_lifted(params, data)?;
    let delta = lifted.forward()?;
    Ok((0..=lifted.horizon())
        .map(|t| {
            let mut r = lifted.g[t].matvec(&delta[t]);
            r.iter_mut().zip(&lifted.eta[t]).for_each(|(a, b)| *a += b);
            dot(&r, &r)
        })
        .sum())
}

/// The lifted bound `|η⃗|² + w′A⁻¹w` with `A = H + H′ − Ḡ′Ḡ` and
/// `w = Ḡ′η⃗ + ε⃗`, the exact supremum over `Δ⃗` of
/// `Σ|G_tΔ_t + η_t|² − 2Δ⃗′(HΔ⃗ − ε⃗)`.
pub fn eval_lifted_bound(params: &ModelParameters, data: &DataSet) -> Result<f64> {
    let l = build_lifted(params, data)?;
    let eta2: f64 = l.eta.iter().map(|v| dot(v, v)).sum();
    let t_max = l.horizon();
    if t_max == 0 {
        return Ok(eta2);
    }
    let n = params.basis.n;
    let diag: Vec<Mat> = (0..t_max)
        .map(|s| {
            let g = &l.g[s + 1];
            l.e[s].add(&l.e[s].transpose()).sub(&g.tr_matmul(g))
        })
        .collect();
    let offdiag: Vec<Mat> = (1..t_max).map(|s| l.f[s].scaled(-1.0)).collect();
    let a = BlockTridiagonal::new(n, diag, offdiag)?;
    let mut w = vec![0.0; n * t_max];
    for s in 0..t_max {
        let gw = l.g[s + 1].tr_matvec(&l.eta[s + 1]);
        for i in 0..n {
            w[s * n + i] = gw[i] + l.eps[s][i];
        }
    }
    let sol = block_tridiag_solve(&a, &w).map_err(|_| {
        let max_eig = if n * t_max <= 400 { max_eig(&SymMat::from_full(&a.assemble().scaled(-1.0))) } else { f64::NAN };
        Error::NotConcave { max_eig }
    })?;
    Ok(eta2 + dot(&w, &sol))
}

/// SOS form of the robust identification error at sample `t`: certifies for
/// all `x = x̃_t + δ` that
///
/// ```text
/// [ s + 2δ′(e(x) − e(x̃)) − |δ|²_P   (f(x,ũ) − e(x̃₊))′   (g(x,ũ) − ỹ)′ ]
/// [ ·                                P                   0             ]  ⪰ 0
/// [ ·                                0                   I             ]
/// ```
///
/// where `e(x̃₊)` is replaced by `f(x̃, ũ)` at the final sample.
pub fn rie_sos_matrix(
    basis: &BasisSpec,
    layout: &Layout,
    data: &DataSet,
    t: usize,
    s_var: usize,
) -> Result<PolyMatrix> {
    let (n, p) = (basis.n, basis.p);
    let ts = layout.theta_start;
    let (xt, ut) = (&data.x[t], &data.u[t]);
    basis.check_point(xt, ut)?;
    let zero = vec![0u8; n];
    let mut pm = PolyMatrix::zeros(1 + n + p, n);
    let without_constant = |mut q: PolyAff| {
        q.terms.remove(&zero);
        q
    };
    let mut corner = PolyAff::constant(n, AffExpr::var(s_var));
    for i in 0..n {
        let de = without_constant(basis.value_poly_at(Part::E, i, ts, xt, &[]));
        corner.add_scaled(2.0, &de.mul_poly(&Poly::var(n, i)));
        for j in 0..n {
            let mut dd = Poly::zero(n);
            let mut m = zero.clone();
            m[i] += 1;
            m[j] += 1;
            dd.add_term(m, -1.0);
            corner.add_poly_times(&dd, &layout.p_expr(i, j));
        }
    }
    pm.set(0, 0, corner);
    for i in 0..n {
        let fi = basis.value_poly_at(Part::F, i, ts, xt, ut);
        let entry = if t < data.horizon() {
            let mut q = fi;
            let next = basis.theta_maps(&data.x[t + 1], &data.u[t + 1])?;
            q.add_term(zero.clone(), &next.value_expr(Part::E, i, ts), -1.0);
            q
        } else {
            without_constant(fi)
        };
        pm.set(1 + i, 0, entry);
        for j in 0..=i {
            pm.add_constant(1 + i, 1 + j, &layout.p_expr(i, j));
        }
    }
    for i in 0..p {
        let mut gi = basis.value_poly_at(Part::G, i, ts, xt, ut);
        gi.add_term(zero.clone(), &AffExpr::constant(-data.y[t][i]), 1.0);
        pm.set(1 + n + i, 0, gi);
        pm.add_constant(1 + n + i, 1 + n + i, &AffExpr::constant(1.0));
    }
    Ok(pm)
}

pub fn rie_sos_blocks(
    problem: &mut SdpProblem,
    basis: &BasisSpec,
    layout: &Layout,
    data: &DataSet,
    t: usize,
    s_var: usize,
) -> Result<SosCertificate> {
    let pm = rie_sos_matrix(basis, layout, data, t, s_var)?;
    matrix_sos(problem, &pm, &format!("rie_sos[{t}]"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Degrees;

    fn scalar_model(e: f64, f: f64, g: f64, p: f64) -> ModelParameters {
        let b = BasisSpec::new(1, 1, 1, Degrees::linear(), false).unwrap();
        let mut th = vec![0.0; b.num_theta()];
        th[1] = e;
        th[b.f_offset() + 1] = f;
        th[b.g_offset() + 1] = g;
        ModelParameters::new(b, th, SymMat::from_packed(1, vec![p]), 0.1).unwrap()
    }

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&a| vec![a]).collect()
    }

    #[test]
    fn local_rie_scalar_example() {
        // ε₀ = e(x̃₁) − f(x̃₀) = 1 − 0 = 1, η₀ = 0.
        let m = scalar_model(1.0, 0.5, 0.0, 1.0);
        let d = DataSet::new(col(&[0.0, 0.0]), col(&[0.0, 0.0]), col(&[0.0, 1.0])).unwrap();
        let v = eval_local_rie_term(&m, &d, 0).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn lifted_scalar_example() {
        // T = 1, E = 1, F = 0.5, G = 1, ε₀ = 0.1, η = 0: A = 2 − 1 = 1, w = 0.1.
        let m = scalar_model(1.0, 0.5, 1.0, 1.0);
        let x = [0.0, 0.1];
        let d = DataSet::new(col(&[0.0, 0.0]), col(&x), col(&x)).unwrap();
        let ee = equation_errors(&m, &d).unwrap();
        assert!((ee.eps[0][0] - 0.1).abs() < 1e-15);
        assert_eq!(ee.eta, vec![vec![0.0], vec![0.0]]);
        let v = eval_lifted_bound(&m, &d).unwrap();
        assert!((v - 0.01).abs() < 1e-15);
    }

    #[test]
    fn lifted_stencil() {
        let m = scalar_model(1.0, 0.7, 0.0, 1.0);
        let d = DataSet::new(col(&[0.0; 4]), col(&[0.0; 4]), col(&[0.0, 1.0, 0.5, -0.2])).unwrap();
        let l = build_lifted(&m, &d).unwrap();
        let delta = l.forward().unwrap();
        let stacked: Vec<f64> = delta[1..].iter().flatten().copied().collect();
        let h = l.h_mul(&stacked);
        for s in 0..3 {
            assert!((h[s] - l.eps[s][0]).abs() < 1e-12);
        }
    }

    #[test]
    fn ee_system_matches_direct() {
        let m = scalar_model(1.3, 0.4, -0.6, 1.0);
        let d = DataSet::new(col(&[0.3, -1.0, 0.2]), col(&[1.0, 0.5, -0.5]), col(&[0.1, 0.7, -0.4])).unwrap();
        let (a, b) = ee_system(&m.basis, &d).unwrap();
        let mut r = a.matvec(&m.theta);
        r.iter_mut().zip(&b).for_each(|(v, bb)| *v -= bb);
        assert!((dot(&r, &r) - j_ee(&m, &d).unwrap()).abs() < 1e-12);
    }
}
