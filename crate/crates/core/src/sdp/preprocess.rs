//! Elimination of linear equalities by substitution.
//!
//! Rows that own a private column (one that appears in no other equality) are
//! solved for that column directly, which creates no fill. The remaining rows
//! are factorized with a column-pivoted Householder QR; the pivot rule prefers
//! columns that touch few LMI blocks, so Gram-matrix variables are eliminated
//! ahead of model coefficients and the block sparsity of the normal equations
//! survives.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::problem::{LmiBlockTemplate, SdpProblem};
use crate::error::{Error, Result};
use crate::linalg::{norm2, SymMat};

/// Affine map `z = z₀ + T w` from the reduced variables back to the original
/// ones.
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryMap {
    num_reduced: usize,
    /// For each original variable: constant and sparse coefficients on reduced
    /// variables.
    rows: Vec<(f64, Vec<(usize, f64)>)>,
}

impl RecoveryMap {
    pub fn identity(n: usize) -> Self {
        Self { num_reduced: n, rows: (0..n).map(|i| (0.0, vec![(i, 1.0)])).collect() }
    }

    pub fn num_full(&self) -> usize {
        self.rows.len()
    }

    pub fn num_reduced(&self) -> usize {
        self.num_reduced
    }

    pub fn is_identity(&self) -> bool {
        self.num_reduced == self.rows.len()
            && self.rows.iter().enumerate().all(|(i, (c, t))| *c == 0.0 && t.len() == 1 && t[0] == (i, 1.0))
    }

    pub fn recover(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.num_reduced, "reduced vector length mismatch");
        self.rows.iter().map(|(c, t)| c + t.iter().map(|&(k, v)| v * w[k]).sum::<f64>()).collect()
    }

    /// Pulls a gradient-like vector on the original variables back to the
    /// reduced ones (`Tᵀ c`) and returns it with the constant `cᵀz₀`.
    pub fn pull_back(&self, c: &[f64]) -> (Vec<f64>, f64) {
        let mut out = vec![0.0; self.num_reduced];
        let mut constant = 0.0;
        for (ci, (z0, t)) in c.iter().zip(&self.rows) {
            if *ci == 0.0 {
                continue;
            }
            constant += ci * z0;
            for &(k, v) in t {
                out[k] += ci * v;
            }
        }
        (out, constant)
    }
}

/// Equality-free problem plus the map back to the original variables.
#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub reduced: SdpProblem,
    pub recovery: RecoveryMap,
}

const RANK_TOL: f64 = 1e-11;
const CONSISTENCY_TOL: f64 = 1e-9;

/// Removes all equalities from `problem` by substitution.
pub fn preprocess(problem: &SdpProblem) -> Result<Preprocessed> {
    problem.validate()?;
    let n = problem.num_vars;
    if problem.equalities.is_empty() {
        return Ok(Preprocessed { reduced: problem.clone(), recovery: RecoveryMap::identity(n) });
    }

    // Merge duplicate entries in each row and drop exact zeros.
    let mut rows: Vec<(BTreeMap<usize, f64>, f64)> = Vec::new();
    for eq in &problem.equalities {
        let mut m = BTreeMap::new();
        for &(k, v) in &eq.coeffs {
            *m.entry(k).or_insert(0.0) += v;
        }
        m.retain(|_, v| *v != 0.0);
        rows.push((m, eq.rhs));
    }

    let mut block_count = vec![0usize; n];
    for b in &problem.blocks {
        for (k, _) in &b.terms {
            block_count[*k] += 1;
        }
    }
    let mut row_count = vec![0usize; n];
    for (m, _) in &rows {
        for k in m.keys() {
            row_count[*k] += 1;
        }
    }

    // Dependent variable -> expression over original variables.
    let mut phase1: Vec<(usize, f64, Vec<(usize, f64)>)> = Vec::new();
    let mut coupled: Vec<usize> = Vec::new();
    for (r, (m, rhs)) in rows.iter().enumerate() {
        let private: Vec<(usize, f64)> = m.iter().filter(|(k, _)| row_count[**k] == 1).map(|(k, v)| (*k, *v)).collect();
        if private.is_empty() {
            coupled.push(r);
            continue;
        }
        let biggest = private.iter().fold(0.0f64, |a, (_, v)| a.max(v.abs()));
        let (pivot, coef) = private
            .iter()
            .filter(|(_, v)| v.abs() >= 0.1 * biggest)
            .min_by(|a, b| block_count[a.0].cmp(&block_count[b.0]).then(b.1.abs().total_cmp(&a.1.abs())))
            .copied()
            .unwrap();
        let expr = m.iter().filter(|(k, _)| **k != pivot).map(|(k, v)| (*k, -v / coef)).collect();
        phase1.push((pivot, rhs / coef, expr));
    }

    let mut dependent: BTreeMap<usize, (f64, Vec<(usize, f64)>)> = BTreeMap::new();
    if !coupled.is_empty() {
        for (var, c, expr) in eliminate_coupled(&rows, &coupled, &block_count)? {
            dependent.insert(var, (c, expr));
        }
    }
    let phase2_vars: Vec<usize> = dependent.keys().copied().collect();
    for (pivot, _, _) in &phase1 {
        dependent.insert(*pivot, (0.0, Vec::new()));
    }

    // Free variables, numbered in original order.
    let mut reduced_index = vec![usize::MAX; n];
    let mut num_reduced = 0;
    for i in 0..n {
        if !dependent.contains_key(&i) {
            reduced_index[i] = num_reduced;
            num_reduced += 1;
        }
    }

    let mut map_rows: Vec<(f64, Vec<(usize, f64)>)> = (0..n)
        .map(|i| if reduced_index[i] != usize::MAX { (0.0, vec![(reduced_index[i], 1.0)]) } else { (0.0, Vec::new()) })
        .collect();
    // Coupled-phase expressions reference free variables only.
    for v in &phase2_vars {
        let (c, expr) = &dependent[v];
        map_rows[*v] = (*c, expr.iter().map(|&(k, a)| (reduced_index[k], a)).collect());
    }
    // Private-column expressions may reference coupled-phase dependents.
    for (pivot, c, expr) in &phase1 {
        let mut constant = *c;
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for &(k, a) in expr {
            let (kc, kt) = &map_rows[k];
            constant += a * kc;
            for &(j, b) in kt {
                *acc.entry(j).or_insert(0.0) += a * b;
            }
        }
        acc.retain(|_, v| *v != 0.0);
        map_rows[*pivot] = (constant, acc.into_iter().collect());
    }
    let recovery = RecoveryMap { num_reduced, rows: map_rows };

    let mut reduced = SdpProblem::new();
    for i in 0..n {
        if reduced_index[i] != usize::MAX {
            reduced.var_names.push(problem.var_names[i].clone());
        }
    }
    reduced.num_vars = num_reduced;
    let (obj, obj_const) = recovery.pull_back(&problem.objective);
    reduced.objective = obj;
    reduced.objective_constant = problem.objective_constant + obj_const;
    reduced.blocks = problem.blocks.iter().map(|b| substitute_block(b, &recovery)).collect();
    Ok(Preprocessed { reduced, recovery })
}

fn substitute_block(b: &LmiBlockTemplate, map: &RecoveryMap) -> LmiBlockTemplate {
    let mut constant = b.constant.clone();
    let mut terms: BTreeMap<usize, SymMat> = BTreeMap::new();
    for (k, m) in &b.terms {
        let (c, t) = &map.rows[*k];
        if *c != 0.0 {
            constant.add_scaled_assign(*c, m);
        }
        for &(j, a) in t {
            terms.entry(j).or_insert_with(|| SymMat::zeros(b.dim)).add_scaled_assign(a, m);
        }
    }
    LmiBlockTemplate {
        dim: b.dim,
        constant,
        terms: terms.into_iter().filter(|(_, m)| !m.is_zero()).collect(),
        label: b.label.clone(),
    }
}

/// Column-pivoted Householder QR on the coupled rows. Returns, for each pivot
/// variable, its expression in terms of the non-pivot support variables.
#[allow(clippy::type_complexity)]
fn eliminate_coupled(
    rows: &[(BTreeMap<usize, f64>, f64)],
    which: &[usize],
    block_count: &[usize],
) -> Result<Vec<(usize, f64, Vec<(usize, f64)>)>> {
    let mut support: Vec<usize> = which.iter().flat_map(|&r| rows[r].0.keys().copied()).collect();
    support.sort_unstable();
    support.dedup();
    let k = which.len();
    let s = support.len();
    let col_of: BTreeMap<usize, usize> = support.iter().enumerate().map(|(c, v)| (*v, c)).collect();
    // Column-major storage: a[c][r].
    let mut a = vec![vec![0.0; k]; s];
    let mut b = vec![0.0; k];
    for (r, &ri) in which.iter().enumerate() {
        for (v, coef) in &rows[ri].0 {
            a[col_of[v]][r] = *coef;
        }
        b[r] = rows[ri].1;
    }
    let bnorm = norm2(&b);
    let scale = a.iter().fold(0.0f64, |m, c| m.max(norm2(c)));
    let mut perm: Vec<usize> = (0..s).collect();
    let mut rank = 0;
    for j in 0..k.min(s) {
        let norms: Vec<f64> = (j..s).map(|c| norm2(&a[perm[c]][j..])).collect();
        let max_norm = norms.iter().fold(0.0f64, |m, v| m.max(*v));
        if max_norm <= RANK_TOL * scale.max(1e-300) {
            break;
        }
        let best = (j..s)
            .filter(|&c| norms[c - j] >= 0.5 * max_norm)
            .min_by(|&x, &y| {
                block_count[support[perm[x]]]
                    .cmp(&block_count[support[perm[y]]])
                    .then(norms[y - j].total_cmp(&norms[x - j]))
            })
            .unwrap();
        perm.swap(j, best);
        let pc = perm[j];
        // Householder vector for a[pc][j..].
        let x = &a[pc][j..];
        let alpha = {
            let nx = norm2(x);
            if x[0] >= 0.0 {
                -nx
            } else {
                nx
            }
        };
        let mut v: Vec<f64> = x.to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for c in j..s {
                let col = &mut a[perm[c]][j..];
                let d: f64 = col.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>() * 2.0 / vnorm2;
                col.iter_mut().zip(&v).for_each(|(p, q)| *p -= d * q);
            }
            let tail = &mut b[j..];
            let d: f64 = tail.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>() * 2.0 / vnorm2;
            tail.iter_mut().zip(&v).for_each(|(p, q)| *p -= d * q);
        }
        rank = j + 1;
    }
    let residual = norm2(&b[rank..]);
    if residual > CONSISTENCY_TOL * (1.0 + bnorm) {
        return Err(Error::InconsistentEqualities { residual });
    }
    // Back substitution: R11 z_B = c1 − R12 z_N.
    let free: Vec<usize> = perm[rank..].to_vec();
    let mut coeffs = vec![vec![0.0; free.len()]; rank];
    let mut consts = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut c = b[i];
        let mut row: Vec<f64> = free.iter().map(|&f| -a[f][i]).collect();
        for l in i + 1..rank {
            let r_il = a[perm[l]][i];
            c -= r_il * consts[l];
            for (t, q) in row.iter_mut().zip(&coeffs[l]) {
                *t -= r_il * q;
            }
        }
        let d = a[perm[i]][i];
        consts[i] = c / d;
        coeffs[i] = row.into_iter().map(|t| t / d).collect();
    }
    Ok((0..rank)
        .map(|i| {
            let expr = free
                .iter()
                .zip(&coeffs[i])
                .filter(|(_, c)| c.abs() > 1e-15)
                .map(|(&f, &c)| (support[f], c))
                .collect();
            (support[perm[i]], consts[i], expr)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::problem::{BlockBuilder, LinearEquality};

    #[test]
    fn no_equalities_is_identity() {
        let mut p = SdpProblem::new();
        p.add_vars("x", 3);
        let out = preprocess(&p).unwrap();
        assert!(out.recovery.is_identity());
    }

    #[test]
    fn fixed_value_is_reinserted() {
        let mut p = SdpProblem::new();
        let x = p.add_vars("x", 2);
        let mut bb = BlockBuilder::new(1);
        bb.add_term(0, 0, x, 1.0);
        bb.add_term(0, 0, x + 1, 1.0);
        p.add_block(bb.finish("b"));
        p.add_equality(LinearEquality { coeffs: vec![(x, 1.0)], rhs: 2.0 });
        let out = preprocess(&p).unwrap();
        assert_eq!(out.reduced.num_vars, 1);
        assert_eq!(out.recovery.recover(&[5.0]), vec![2.0, 5.0]);
        assert_eq!(out.reduced.blocks[0].constant.get(0, 0), 2.0);
    }

    #[test]
    fn inconsistent_rows_are_detected() {
        let mut p = SdpProblem::new();
        p.add_vars("x", 2);
        p.add_equality(LinearEquality { coeffs: vec![(0, 1.0), (1, 1.0)], rhs: 1.0 });
        p.add_equality(LinearEquality { coeffs: vec![(0, 2.0), (1, 2.0)], rhs: 3.0 });
        assert!(matches!(preprocess(&p), Err(Error::InconsistentEqualities { .. })));
    }

    #[test]
    fn mixed_phases_compose() {
        // Row 0 has a private column (2); rows 1 and 2 only share columns 0, 1.
        let mut p = SdpProblem::new();
        p.add_vars("x", 4);
        p.add_equality(LinearEquality { coeffs: vec![(0, 1.0), (2, 2.0)], rhs: 4.0 });
        p.add_equality(LinearEquality { coeffs: vec![(0, 1.0), (1, 1.0), (3, 1.0)], rhs: 1.0 });
        p.add_equality(LinearEquality { coeffs: vec![(0, 1.0), (1, -1.0), (3, 1.0)], rhs: 0.0 });
        let out = preprocess(&p).unwrap();
        assert_eq!(out.reduced.num_vars, 1);
        for w in [-1.0, 0.0, 2.5] {
            let z = out.recovery.recover(&[w]);
            for e in &p.equalities {
                assert!(e.residual(&z).abs() < 1e-12);
            }
        }
    }
}
