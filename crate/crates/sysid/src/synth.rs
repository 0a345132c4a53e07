//! Synthetic systems and inputs for benchmarks and acceptance runs.

use rand::Rng;
use rand_distr::StandardNormal;
use sysid_core::data::DataSet;
use sysid_core::linalg::{Mat, SymMat};
use sysid_core::model::{quadratic_stability_embed, BasisSpec, Degrees, ModelParameters, Part};
use sysid_core::poly::Monomial;
use sysid_core::simulate::{simulate, NewtonOptions};
use sysid_core::{Error, Result};

pub fn gaussian_mat<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random `n × n` matrix rescaled to spectral norm `radius`, which bounds its
/// spectral radius by the same value.
pub fn random_stable_matrix<R: Rng>(rng: &mut R, n: usize, radius: f64) -> Mat {
    let a = gaussian_mat(rng, n, n);
    let s = a.spectral_norm();
    if s == 0.0 {
        return Mat::zeros(n, n);
    }
    a.scaled(radius / s)
}

/// Solves `A′MA − M = −Q` by summing `Σ (A′)ᵏQAᵏ`; requires `‖A‖ < 1`.
pub fn discrete_lyapunov(a: &Mat, q: &Mat) -> Mat {
    let mut m = q.clone();
    let mut term = q.clone();
    for _ in 0..10_000 {
        term = a.transpose().matmul(&term).matmul(a);
        m = m.add(&term);
        if term.max_abs() <= 1e-17 * m.max_abs() {
            break;
        }
    }
    m.symmetrized()
}

/// Index of monomial `mono` in the basis of `part`.
pub fn mono_index(basis: &BasisSpec, part: Part, mono: &[u8]) -> Option<usize> {
    let list = match part {
        Part::E => &basis.e_mono,
        Part::F => &basis.f_mono,
        Part::G => &basis.g_mono,
    };
    list.iter().position(|m| m.as_slice() == mono)
}

/// Adds `value` to the coefficient of `mono` in output `i` of `part`.
pub fn add_coeff(params: &mut ModelParameters, part: Part, i: usize, mono: &[u8], value: f64) -> Result<()> {
    let b = &params.basis;
    let k = mono_index(b, part, mono)
        .ok_or_else(|| Error::InvalidArgument(format!("monomial {mono:?} is not in the {part:?} basis")))?;
    let (off, len) = match part {
        Part::E => (b.e_offset(), b.e_len()),
        Part::F => (b.f_offset(), b.f_len()),
        Part::G => (b.g_offset(), b.g_len()),
    };
    params.theta[off + i * len + k] += value;
    Ok(())
}

fn unit(nvars: usize, k: usize) -> Monomial {
    let mut m = vec![0u8; nvars];
    m[k] = 1;
    m
}

/// Explicit linear system `x⁺ = Ax + Bu`, `y = Cx + Du` embedded in `basis`
/// with `M` from the Lyapunov equation `A′MA − M = −I − C′C`, so its
/// contraction block equals `(1 − μ)I`.
pub fn embed_linear(basis: &BasisSpec, a: &Mat, b: &Mat, c: &Mat, d: &Mat, mu: f64) -> Result<ModelParameters> {
    let (n, m, p) = (basis.n, basis.m, basis.p);
    let nv = n + m;
    let mut a_coeffs = Mat::zeros(n, basis.f_len());
    let mut g_coeffs = Mat::zeros(p, basis.g_len());
    for i in 0..n {
        for j in 0..nv {
            let k = mono_index(basis, Part::F, &unit(nv, j)).expect("f basis contains linear terms");
            a_coeffs[(i, k)] = if j < n { a[(i, j)] } else { b[(i, j - n)] };
        }
    }
    for i in 0..p {
        for j in 0..nv {
            let k = mono_index(basis, Part::G, &unit(nv, j)).expect("g basis contains linear terms");
            g_coeffs[(i, k)] = if j < n { c[(i, j)] } else { d[(i, j - n)] };
        }
    }
    let q = Mat::identity(n).add(&c.tr_matmul(c));
    let msym = SymMat::from_full(&discrete_lyapunov(a, &q));
    quadratic_stability_embed(basis, &a_coeffs, &g_coeffs, &msym, mu)
}

/// Random stable linear model with spectral norm of `A` at most `radius`.
pub fn stable_linear<R: Rng>(rng: &mut R, n: usize, m: usize, p: usize, radius: f64, mu: f64) -> Result<ModelParameters> {
    let basis = BasisSpec::new(n, m, p, Degrees::linear(), false)?;
    let a = random_stable_matrix(rng, n, radius);
    let b = gaussian_mat(rng, n, m);
    let c = gaussian_mat(rng, p, n);
    let d = Mat::zeros(p, m);
    embed_linear(&basis, &a, &b, &c, &d, mu)
}

/// Degrees of the contracting cubic family: cubic `e`, affine `f` and `g`.
pub fn cubic_degrees() -> Degrees {
    Degrees { e: 3, fx: 1, fu: 1, gx: 1, gu: 1 }
}

/// A stable linear model embedded with `e(x) = Mx`, then made nonlinear by
/// adding `∇φ` to `e` for the convex quartic
/// `φ(x) = (a/4)|x|⁴ + Σ (bᵢ/4)xᵢ⁴`. The Hessian of `φ` is PSD, so `E + E′`
/// only grows and the contraction block stays `⪰ (1 − μ)I` everywhere.
/// Explicit polynomial maps of degree above one cannot be globally
/// contracting, so the nonlinearity sits in `e`.
pub fn contracting_cubic<R: Rng>(
    rng: &mut R,
    n: usize,
    m: usize,
    p: usize,
    radius: f64,
    mu: f64,
) -> Result<ModelParameters> {
    let basis = BasisSpec::new(n, m, p, cubic_degrees(), false)?;
    let a = random_stable_matrix(rng, n, radius);
    let b = gaussian_mat(rng, n, m);
    let c = gaussian_mat(rng, p, n);
    let d = Mat::zeros(p, m);
    let mut params = embed_linear(&basis, &a, &b, &c, &d, mu)?;
    add_convex_quartic_gradient(&mut params, rng.random_range(0.2..1.0), &(0..n).map(|_| rng.random_range(0.0..0.5)).collect::<Vec<_>>())?;
    Ok(params)
}

/// Adds `∇φ` with `φ(x) = (a/4)|x|⁴ + Σ (bᵢ/4)xᵢ⁴` to `e`.
pub fn add_convex_quartic_gradient(params: &mut ModelParameters, a: f64, b: &[f64]) -> Result<()> {
    let n = params.basis.n;
    for i in 0..n {
        // ∂/∂xᵢ (a/4)(Σxⱼ²)² = a|x|²xᵢ
        for j in 0..n {
            let mut mono = vec![0u8; n];
            mono[i] += 1;
            mono[j] += 2;
            add_coeff(params, Part::E, i, &mono, a)?;
        }
        let mut mono = vec![0u8; n];
        mono[i] = 3;
        add_coeff(params, Part::E, i, &mono, b[i])?;
    }
    Ok(())
}

/// Random piecewise-constant input: levels uniform in `[−amp, amp]`, each held
/// for `hold` samples.
pub fn piecewise_input<R: Rng>(rng: &mut R, len: usize, m: usize, amp: f64, hold: usize) -> Vec<Vec<f64>> {
    let hold = hold.max(1);
    let mut out = Vec::with_capacity(len);
    let mut level = vec![0.0; m];
    for t in 0..len {
        if t % hold == 0 {
            level = (0..m).map(|_| rng.random_range(-amp..=amp)).collect();
        }
        out.push(level.clone());
    }
    out
}

/// Simulates `params` from `x0` and records states as the surrogate
/// sequence, so the model is exactly in range of its own basis.
pub fn dataset_from_model(params: &ModelParameters, x0: &[f64], u: Vec<Vec<f64>>) -> Result<DataSet> {
    let sim = simulate(params, x0, &u, &NewtonOptions::default())?;
    DataSet::new(u, sim.y, sim.x)
}

/// Stable linear state with a saturating output, `y = s·tanh(Cx/s)`. Not in
/// any polynomial model class.
#[derive(Clone, Debug)]
pub struct Wiener {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub saturation: f64,
}

impl Wiener {
    pub fn random<R: Rng>(rng: &mut R, n: usize, radius: f64, saturation: f64) -> Self {
        let a = random_stable_matrix(rng, n, radius);
        let b = gaussian_mat(rng, n, 1);
        let c = gaussian_mat(rng, 1, n);
        let mut w = Self { a, b, c, saturation };
        // Unit DC gain keeps amplitudes comparable across draws.
        let g = w.dc_gain();
        if g.abs() > 1e-9 {
            w.c = w.c.scaled(1.0 / g);
        }
        w
    }

    fn dc_gain(&self) -> f64 {
        let n = self.a.rows();
        let ia = Mat::identity(n).sub(&self.a);
        let x = sysid_core::linalg::solve(&ia, &self.b.col(0)).unwrap_or_else(|_| vec![0.0; n]);
        self.c.matvec(&x)[0]
    }

    pub fn output(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.a.rows();
        let mut x = vec![0.0; n];
        let s = self.saturation;
        u.iter()
            .map(|ut| {
                let y = s * (self.c.matvec(&x)[0] / s).tanh();
                let mut nx = self.a.matvec(&x);
                nx.iter_mut().zip(self.b.col(0)).for_each(|(v, bj)| *v += bj * ut[0]);
                x = nx;
                vec![y]
            })
            .collect()
    }
}
