//! Monomials and sparse multivariate polynomials, with real or affine
//! (decision-variable dependent) coefficients.
//!
//! Monomial order is graded lexicographic: ascending total degree, and within
//! one degree descending exponent vectors, so for two variables the order is
//! `1, x₁, x₂, x₁², x₁x₂, x₂², …`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::powi;
use crate::sdp::AffExpr;

/// Exponent vector, one entry per variable.
pub type Monomial = Vec<u8>;

pub fn degree(m: &[u8]) -> u32 {
    m.iter().map(|&e| e as u32).sum()
}

/// All monomials in `nvars` variables of total degree at most `max_deg`.
pub fn graded_lex(nvars: usize, max_deg: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=max_deg {
        let mut cur = vec![0u8; nvars];
        of_degree(nvars, 0, d, &mut cur, &mut out);
    }
    out
}

fn of_degree(nvars: usize, pos: usize, rem: u32, cur: &mut Monomial, out: &mut Vec<Monomial>) {
    if nvars == 0 {
        if rem == 0 {
            out.push(cur.clone());
        }
        return;
    }
    if pos == nvars - 1 {
        cur[pos] = rem as u8;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    for e in (0..=rem).rev() {
        cur[pos] = e as u8;
        of_degree(nvars, pos + 1, rem - e, cur, out);
    }
    cur[pos] = 0;
}

pub fn mono_eval(m: &[u8], v: &[f64]) -> f64 {
    m.iter().zip(v).fold(1.0, |acc, (&e, &x)| if e == 0 { acc } else { acc * powi(x, e as u32) })
}

/// ∂/∂v_k of the monomial.
pub fn mono_deriv(m: &[u8], v: &[f64], k: usize) -> f64 {
    if m[k] == 0 {
        return 0.0;
    }
    let mut acc = m[k] as f64;
    for (i, (&e, &x)) in m.iter().zip(v).enumerate() {
        let e = if i == k { e - 1 } else { e };
        if e > 0 {
            acc *= powi(x, e as u32);
        }
    }
    acc
}

fn mono_mul(a: &[u8], b: &[u8]) -> Monomial {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Sparse polynomial with real coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    pub nvars: usize,
    pub terms: BTreeMap<Monomial, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The variable `v_k`.
    pub fn var(nvars: usize, k: usize) -> Self {
        let mut m = vec![0; nvars];
        m[k] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(m, 1.0);
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(m).or_insert(0.0);
        *slot += c;
    }

    pub fn add_scaled(&mut self, s: f64, other: &Poly) {
        for (m, &c) in &other.terms {
            self.add_term(m.clone(), s * c);
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                out.add_term(mono_mul(a, b), ca * cb);
            }
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().filter(|(_, &c)| c != 0.0).map(|(m, _)| degree(m)).max().unwrap_or(0)
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        self.terms.iter().map(|(m, &c)| c * mono_eval(m, v)).sum()
    }

    /// Substitutes `v_k ← v_k + shift_k`, expanding binomially.
    pub fn shifted(&self, shift: &[f64]) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, &c) in &self.terms {
            let mut acc = Poly::constant(self.nvars, c);
            for k in 0..self.nvars {
                if m[k] == 0 {
                    continue;
                }
                let mut lin = Poly::var(self.nvars, k);
                lin.add_term(vec![0; self.nvars], shift[k]);
                for _ in 0..m[k] {
                    acc = acc.mul(&lin);
                }
            }
            out.add_scaled(1.0, &acc);
        }
        out
    }
}

/// Polynomial whose coefficients are affine expressions in decision variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolyAff {
    pub nvars: usize,
    pub terms: BTreeMap<Monomial, AffExpr>,
}

impl PolyAff {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, e: AffExpr) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], &e, 1.0);
        p
    }

    pub fn from_poly(p: &Poly) -> Self {
        let mut out = Self::zero(p.nvars);
        for (m, &c) in &p.terms {
            out.add_term(m.clone(), &AffExpr::constant(c), 1.0);
        }
        out
    }

    pub fn add_term(&mut self, m: Monomial, e: &AffExpr, s: f64) {
        self.terms.entry(m).or_default().add_scaled(s, e);
    }

    pub fn add_scaled(&mut self, s: f64, other: &PolyAff) {
        for (m, e) in &other.terms {
            self.add_term(m.clone(), e, s);
        }
    }

    /// Adds `p · e` for a real polynomial `p` and affine `e`.
    pub fn add_poly_times(&mut self, p: &Poly, e: &AffExpr) {
        for (m, &c) in &p.terms {
            self.add_term(m.clone(), e, c);
        }
    }

    /// Product with a real polynomial.
    pub fn mul_poly(&self, p: &Poly) -> PolyAff {
        let mut out = PolyAff::zero(self.nvars);
        for (a, e) in &self.terms {
            for (b, &c) in &p.terms {
                out.add_term(mono_mul(a, b), e, c);
            }
        }
        out
    }

    /// Highest degree with a structurally nonzero coefficient.
    pub fn degree(&self) -> u32 {
        self.terms.iter().filter(|(_, e)| !e.is_zero()).map(|(m, _)| degree(m)).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|e| e.is_zero())
    }

    /// Largest exponent of each variable over structurally nonzero terms.
    pub fn max_exponents(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.nvars];
        for (m, e) in &self.terms {
            if e.is_zero() {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(m) {
                *o = (*o).max(x);
            }
        }
        out
    }

    pub fn eval(&self, z: &[f64], v: &[f64]) -> f64 {
        self.terms.iter().map(|(m, e)| e.eval(z) * mono_eval(m, v)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_two_vars() {
        let m = graded_lex(2, 2);
        let want: Vec<Monomial> = vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]];
        assert_eq!(m, want);
    }

    #[test]
    fn graded_lex_counts() {
        // C(n+d, d)
        assert_eq!(graded_lex(3, 3).len(), 20);
        assert_eq!(graded_lex(6, 5).len(), 462);
        assert_eq!(graded_lex(1, 4).len(), 5);
    }

    #[test]
    fn deriv_matches_difference() {
        let m = vec![2, 1, 3];
        let v = [0.7, -1.3, 0.4];
        for k in 0..3 {
            let h = 1e-6;
            let mut a = v;
            let mut b = v;
            a[k] += h;
            b[k] -= h;
            let fd = (mono_eval(&m, &a) - mono_eval(&m, &b)) / (2.0 * h);
            assert!((fd - mono_deriv(&m, &v, k)).abs() < 1e-8);
        }
    }

    #[test]
    fn shift_expands() {
        // (x+2)² = x² + 4x + 4
        let mut p = Poly::zero(1);
        p.add_term(vec![2], 1.0);
        let s = p.shifted(&[2.0]);
        assert_eq!(s.terms.get(&vec![0]), Some(&4.0));
        assert_eq!(s.terms.get(&vec![1]), Some(&4.0));
        assert_eq!(s.terms.get(&vec![2]), Some(&1.0));
    }

    #[test]
    fn affine_poly_product() {
        let mut a = PolyAff::zero(1);
        a.add_term(vec![1], &AffExpr::var(0), 1.0);
        let p = Poly::var(1, 0);
        let q = a.mul_poly(&p);
        assert_eq!(q.degree(), 2);
        assert_eq!(q.eval(&[3.0], &[2.0]), 12.0);
    }
}
