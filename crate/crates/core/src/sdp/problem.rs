use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{min_eig, SymMat};

/// Affine expression `constant + Σ coef·z[var]` over decision variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffExpr {
    pub constant: f64,
    pub terms: BTreeMap<usize, f64>,
}

impl AffExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: BTreeMap::new() }
    }

    pub fn var(index: usize) -> Self {
        Self::term(index, 1.0)
    }

    pub fn term(index: usize, coef: f64) -> Self {
        let mut e = Self::zero();
        e.add_term(index, coef);
        e
    }

    pub fn add_term(&mut self, index: usize, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let slot = self.terms.entry(index).or_insert(0.0);
        *slot += coef;
        if *slot == 0.0 {
            self.terms.remove(&index);
        }
    }

    pub fn add_scaled(&mut self, s: f64, other: &AffExpr) {
        if s == 0.0 {
            return;
        }
        self.constant += s * other.constant;
        for (&k, &v) in &other.terms {
            self.add_term(k, s * v);
        }
    }

    pub fn scaled(&self, s: f64) -> AffExpr {
        let mut e = AffExpr::zero();
        e.add_scaled(s, self);
        e
    }

    /// True if the expression is structurally zero.
    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.is_empty()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&k, &v)| v * z[k]).sum::<f64>()
    }
}

/// A linear equality `Σ coef·z[var] = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearEquality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearEquality {
    /// The equality `expr = 0`.
    pub fn from_expr(expr: &AffExpr) -> Self {
        Self { coeffs: expr.terms.iter().map(|(&k, &v)| (k, v)).collect(), rhs: -expr.constant }
    }

    pub fn residual(&self, z: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(k, v)| v * z[k]).sum::<f64>() - self.rhs
    }
}

/// An affine symmetric matrix constraint `B₀ + Σ zᵢBᵢ ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LmiBlockTemplate {
    pub dim: usize,
    pub constant: SymMat,
    /// Sorted by variable index, without duplicates.
    pub terms: Vec<(usize, SymMat)>,
    pub label: String,
}

impl LmiBlockTemplate {
    pub fn eval(&self, z: &[f64]) -> SymMat {
        let mut out = self.constant.clone();
        for (k, b) in &self.terms {
            out.add_scaled_assign(z[*k], b);
        }
        out
    }

    pub fn coefficient(&self, var: usize) -> Option<&SymMat> {
        self.terms.binary_search_by_key(&var, |(k, _)| *k).ok().map(|i| &self.terms[i].1)
    }

    pub fn min_eig_at(&self, z: &[f64]) -> f64 {
        min_eig(&self.eval(z))
    }
}

/// Builds an LMI block entry by entry as affine expressions.
#[derive(Clone, Debug)]
pub struct BlockBuilder {
    dim: usize,
    entries: Vec<AffExpr>,
}

impl BlockBuilder {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: vec![AffExpr::zero(); dim * (dim + 1) / 2] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn idx(i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        r * (r + 1) / 2 + c
    }

    pub fn entry(&self, i: usize, j: usize) -> &AffExpr {
        &self.entries[Self::idx(i, j)]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut AffExpr {
        &mut self.entries[Self::idx(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, e: AffExpr) {
        self.entries[Self::idx(i, j)] = e;
    }

    pub fn add_constant(&mut self, i: usize, j: usize, c: f64) {
        self.entry_mut(i, j).constant += c;
    }

    pub fn add_term(&mut self, i: usize, j: usize, var: usize, coef: f64) {
        self.entry_mut(i, j).add_term(var, coef);
    }

    pub fn finish(self, label: impl Into<String>) -> LmiBlockTemplate {
        let dim = self.dim;
        let mut constant = SymMat::zeros(dim);
        let mut terms: BTreeMap<usize, SymMat> = BTreeMap::new();
        for i in 0..dim {
            for j in 0..=i {
                let e = &self.entries[Self::idx(i, j)];
                constant.set(i, j, e.constant);
                for (&k, &v) in &e.terms {
                    terms.entry(k).or_insert_with(|| SymMat::zeros(dim)).set(i, j, v);
                }
            }
        }
        LmiBlockTemplate { dim, constant, terms: terms.into_iter().collect(), label: label.into() }
    }
}

/// Semidefinite program `min cᵀz` subject to affine LMI blocks and linear
/// equalities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SdpProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub blocks: Vec<LmiBlockTemplate>,
    pub equalities: Vec<LinearEquality>,
    pub var_names: Vec<String>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `count` variables named `name[i]` and returns the first index.
    pub fn add_vars(&mut self, name: &str, count: usize) -> usize {
        let start = self.num_vars;
        for i in 0..count {
            self.var_names.push(if count == 1 { String::from(name) } else { format!("{name}[{i}]") });
        }
        self.num_vars += count;
        self.objective.resize(self.num_vars, 0.0);
        start
    }

    pub fn add_block(&mut self, block: LmiBlockTemplate) {
        self.blocks.push(block);
    }

    pub fn add_equality(&mut self, eq: LinearEquality) {
        self.equalities.push(eq);
    }

    pub fn add_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] += coef;
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(z).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Structural checks: variable indices in range, term matrices sized to
    /// their block.
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars || self.var_names.len() != self.num_vars {
            return Err(Error::DimensionMismatch("objective or name table length".into()));
        }
        for b in &self.blocks {
            if b.constant.dim() != b.dim {
                return Err(Error::DimensionMismatch(format!("block {} constant", b.label)));
            }
            for (k, m) in &b.terms {
                if *k >= self.num_vars || m.dim() != b.dim {
                    return Err(Error::DimensionMismatch(format!("block {} term {k}", b.label)));
                }
            }
            if b.terms.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(Error::InvalidArgument(format!("block {} terms not sorted", b.label)));
            }
        }
        for e in &self.equalities {
            if e.coeffs.iter().any(|(k, _)| *k >= self.num_vars) {
                return Err(Error::DimensionMismatch("equality variable index".into()));
            }
        }
        Ok(())
    }
}

/// A-posteriori feasibility report for a candidate point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CertifyReport {
    pub block_min_eig: Vec<f64>,
    pub equality_residuals: Vec<f64>,
}

impl CertifyReport {
    pub fn worst_min_eig(&self) -> f64 {
        self.block_min_eig.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_equality_residual(&self) -> f64 {
        self.equality_residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.worst_min_eig() >= -tol && self.max_equality_residual() <= tol
    }
}

/// Evaluates every block and equality at `z`, independently of any solver.
pub fn certify(problem: &SdpProblem, z: &[f64]) -> Result<CertifyReport> {
    if z.len() != problem.num_vars {
        return Err(Error::DimensionMismatch(format!("z has {} entries, problem has {}", z.len(), problem.num_vars)));
    }
    Ok(CertifyReport {
        block_min_eig: problem.blocks.iter().map(|b| b.min_eig_at(z)).collect(),
        equality_residuals: problem.equalities.iter().map(|e| e.residual(z)).collect(),
    })
}
