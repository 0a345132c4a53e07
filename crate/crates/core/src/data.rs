//! Aligned input/output/surrogate-state sequences and the transformations that
//! produce them: output-history embedding, POD projection and normalization.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{sqrt, svd, Mat};

/// Per-channel affine map `v ↦ (v − offset) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelScale {
    pub offset: f64,
    pub scale: f64,
}

impl ChannelScale {
    pub fn identity() -> Self {
        Self { offset: 0.0, scale: 1.0 }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.offset) / self.scale
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.scale + self.offset
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scale {
    pub u: Vec<ChannelScale>,
    pub y: Vec<ChannelScale>,
    pub x: Vec<ChannelScale>,
    /// Channels left unscaled because they were constant.
    pub warnings: Vec<String>,
}

impl Scale {
    pub fn identity(m: usize, p: usize, n: usize) -> Self {
        Self {
            u: vec![ChannelScale::identity(); m],
            y: vec![ChannelScale::identity(); p],
            x: vec![ChannelScale::identity(); n],
            warnings: Vec::new(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.u.iter().chain(&self.y).chain(&self.x).all(|c| c.offset == 0.0 && c.scale == 1.0)
    }
}

/// Sequences `ũ`, `ỹ`, `x̃` over `t = 0..=T`, all of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSet {
    pub u: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Surrogate states; empty until an embedding or projection fills it.
    pub x: Vec<Vec<f64>>,
    pub scale: Scale,
}

impl DataSet {
    pub fn new(u: Vec<Vec<f64>>, y: Vec<Vec<f64>>, x: Vec<Vec<f64>>) -> Result<Self> {
        let len = u.len();
        if y.len() != len || (!x.is_empty() && x.len() != len) {
            return Err(Error::DimensionMismatch(format!(
                "sequence lengths u={}, y={}, x={}",
                len,
                y.len(),
                x.len()
            )));
        }
        if len < 2 {
            return Err(Error::InsufficientData(format!("need at least 2 samples, got {len}")));
        }
        let check = |seq: &[Vec<f64>], name: &str| -> Result<()> {
            let w = seq.first().map_or(0, |v| v.len());
            for (t, v) in seq.iter().enumerate() {
                if v.len() != w {
                    return Err(Error::DimensionMismatch(format!("{name}[{t}] has {} channels, expected {w}", v.len())));
                }
                if v.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidArgument(format!("{name}[{t}] is not finite")));
                }
            }
            Ok(())
        };
        check(&u, "u")?;
        check(&y, "y")?;
        check(&x, "x")?;
        let (m, p, n) = (u[0].len(), y[0].len(), x.first().map_or(0, |v| v.len()));
        Ok(Self { u, y, x, scale: Scale::identity(m, p, n) })
    }

    /// Horizon `T`; sequences hold `T + 1` samples.
    pub fn horizon(&self) -> usize {
        self.u.len() - 1
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn m(&self) -> usize {
        self.u[0].len()
    }

    pub fn p(&self) -> usize {
        self.y[0].len()
    }

    pub fn n(&self) -> usize {
        self.x.first().map_or(0, |v| v.len())
    }

    pub fn has_states(&self) -> bool {
        !self.x.is_empty()
    }

    pub fn require_states(&self) -> Result<()> {
        if self.has_states() {
            Ok(())
        } else {
            Err(Error::InvalidArgument("data set has no surrogate states".into()))
        }
    }

    /// Componentwise bounding box of the surrogate states.
    pub fn state_box(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.n()];
        for x in &self.x {
            for (bi, &v) in b.iter_mut().zip(x) {
                bi.0 = bi.0.min(v);
                bi.1 = bi.1.max(v);
            }
        }
        b
    }

    pub fn input_box(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.m()];
        for u in &self.u {
            for (bi, &v) in b.iter_mut().zip(u) {
                bi.0 = bi.0.min(v);
                bi.1 = bi.1.max(v);
            }
        }
        b
    }

    /// Samples `t₀..t₀+len`.
    pub fn window(&self, t0: usize, len: usize) -> Result<DataSet> {
        if t0 + len > self.len() || len < 2 {
            return Err(Error::InsufficientData(format!("window {t0}+{len} of {} samples", self.len())));
        }
        let x = if self.has_states() { self.x[t0..t0 + len].to_vec() } else { Vec::new() };
        let mut d = DataSet::new(self.u[t0..t0 + len].to_vec(), self.y[t0..t0 + len].to_vec(), x)?;
        d.scale = self.scale.clone();
        Ok(d)
    }
}

/// Stacks output history into surrogate states
/// `x̃(t) = [ỹ(t)′, …, ỹ(t−lag+1)′]′` and input history into
/// `ũ(t) = [u(t)′, …, u(t−input_lag+1)′]′`. The first `max(lag, input_lag) − 1`
/// samples are dropped so no pre-history is invented.
pub fn embed_output_history(y: &[Vec<f64>], u: &[Vec<f64>], lag: usize, input_lag: usize) -> Result<DataSet> {
    if lag == 0 || input_lag == 0 {
        return Err(Error::InvalidArgument("lags must be at least 1".into()));
    }
    if y.len() != u.len() {
        return Err(Error::DimensionMismatch(format!("u has {} samples, y has {}", u.len(), y.len())));
    }
    let drop = lag.max(input_lag) - 1;
    if y.len() < drop + 2 {
        return Err(Error::InsufficientData(format!("{} samples cannot support lag {}", y.len(), drop + 1)));
    }
    let stack = |seq: &[Vec<f64>], t: usize, k: usize| -> Vec<f64> {
        (0..k).flat_map(|j| seq[t - j].iter().copied()).collect::<Vec<_>>()
    };
    let range = drop..y.len();
    let xs = range.clone().map(|t| stack(y, t, lag)).collect();
    let us = range.clone().map(|t| stack(u, t, input_lag)).collect();
    let ys = range.map(|t| y[t].clone()).collect();
    DataSet::new(us, ys, xs)
}

#[derive(Clone, Debug)]
pub struct PodProjection {
    /// `N × n`, orthonormal columns.
    pub basis: Mat,
    /// One projected state per snapshot column.
    pub states: Vec<Vec<f64>>,
    /// Captured energy `Σ_{i≤n} σᵢ² / Σ σᵢ²`.
    pub energy_ratio: f64,
    pub singular_values: Vec<f64>,
}

/// Proper orthogonal decomposition of a snapshot matrix whose columns are
/// high-order states.
pub fn pod_project(snapshots: &Mat, n: usize) -> Result<PodProjection> {
    let (rows, cols) = (snapshots.rows(), snapshots.cols());
    if n == 0 || n > rows.min(cols) {
        return Err(Error::InvalidArgument(format!("cannot keep {n} modes of a {rows}×{cols} snapshot matrix")));
    }
    if !snapshots.is_finite() {
        return Err(Error::InvalidArgument("snapshot matrix is not finite".into()));
    }
    let s = svd(snapshots);
    let sigma = &s.sigma;
    if sigma[0] == 0.0 || sigma[n - 1] / sigma[0] < 1e-12 {
        return Err(Error::RankDeficient { ratio: if sigma[0] == 0.0 { 0.0 } else { sigma[n - 1] / sigma[0] } });
    }
    let basis = Mat::from_fn(rows, n, |i, j| s.u[(i, j)]);
    let proj = basis.tr_matmul(snapshots);
    let states = (0..cols).map(|t| (0..n).map(|i| proj[(i, t)]).collect()).collect();
    let total: f64 = sigma.iter().map(|v| v * v).sum();
    let kept: f64 = sigma[..n].iter().map(|v| v * v).sum();
    Ok(PodProjection { basis, states, energy_ratio: kept / total, singular_values: sigma.clone() })
}

fn channel_scales(seq: &[Vec<f64>], name: &str, warnings: &mut Vec<String>) -> Vec<ChannelScale> {
    let w = seq.first().map_or(0, |v| v.len());
    let len = seq.len() as f64;
    (0..w)
        .map(|c| {
            let mean = seq.iter().map(|v| v[c]).sum::<f64>() / len;
            let rms = sqrt(seq.iter().map(|v| (v[c] - mean) * (v[c] - mean)).sum::<f64>() / len);
            if rms <= 1e-12 * (1.0 + mean.abs()) {
                warnings.push(format!("{name}{} is constant; left unscaled", c + 1));
                ChannelScale::identity()
            } else {
                ChannelScale { offset: mean, scale: rms }
            }
        })
        .collect()
}

fn map_seq(seq: &[Vec<f64>], sc: &[ChannelScale], f: impl Fn(&ChannelScale, f64) -> f64) -> Vec<Vec<f64>> {
    seq.iter().map(|v| v.iter().zip(sc).map(|(&a, s)| f(s, a)).collect()).collect()
}

/// Maps every channel to zero mean and unit RMS. Constant channels keep the
/// identity map and are listed in `scale.warnings`. The returned data set
/// records the scale relative to the raw data.
pub fn normalize(data: &DataSet) -> DataSet {
    let mut warnings = Vec::new();
    let u = channel_scales(&data.u, "u", &mut warnings);
    let y = channel_scales(&data.y, "y", &mut warnings);
    let x = channel_scales(&data.x, "x", &mut warnings);
    let scale = Scale { u, y, x, warnings };
    apply_scale(data, &scale)
}

/// Applies a scale computed elsewhere, such as on training data.
pub fn apply_scale(data: &DataSet, scale: &Scale) -> DataSet {
    DataSet {
        u: map_seq(&data.u, &scale.u, ChannelScale::apply),
        y: map_seq(&data.y, &scale.y, ChannelScale::apply),
        x: map_seq(&data.x, &scale.x, ChannelScale::apply),
        scale: scale.clone(),
    }
}

/// Undoes [`normalize`].
pub fn denormalize(data: &DataSet) -> DataSet {
    let s = &data.scale;
    DataSet {
        u: map_seq(&data.u, &s.u, ChannelScale::invert),
        y: map_seq(&data.y, &s.y, ChannelScale::invert),
        x: map_seq(&data.x, &s.x, ChannelScale::invert),
        scale: Scale::identity(s.u.len(), s.y.len(), s.x.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&a| vec![a]).collect()
    }

    #[test]
    fn embed_lag_two() {
        let d = embed_output_history(&col(&[1.0, 2.0, 3.0]), &col(&[0.0, 0.0, 0.0]), 2, 1).unwrap();
        assert_eq!(d.x, vec![vec![2.0, 1.0], vec![3.0, 2.0]]);
        assert_eq!(d.y, col(&[2.0, 3.0]));
    }

    #[test]
    fn embed_lag_one_is_identity() {
        let y = col(&[1.0, 5.0, -2.0]);
        let d = embed_output_history(&y, &col(&[0.0; 3]), 1, 1).unwrap();
        assert_eq!(d.x, y);
    }

    #[test]
    fn embed_input_lag() {
        let d = embed_output_history(&col(&[1.0, 2.0, 3.0, 4.0]), &col(&[10.0, 20.0, 30.0, 40.0]), 1, 3).unwrap();
        assert_eq!(d.u, vec![vec![30.0, 20.0, 10.0], vec![40.0, 30.0, 20.0]]);
        assert_eq!(d.x, col(&[3.0, 4.0]));
    }

    #[test]
    fn embed_too_short() {
        assert!(matches!(
            embed_output_history(&col(&[1.0, 2.0]), &col(&[0.0, 0.0]), 2, 1),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn normalize_two_point_channel() {
        let d = DataSet::new(col(&[0.0, 2.0]), col(&[1.0, 1.0]), Vec::new()).unwrap();
        let nd = normalize(&d);
        assert_eq!(nd.scale.u[0], ChannelScale { offset: 1.0, scale: 1.0 });
        assert_eq!(nd.u, col(&[-1.0, 1.0]));
        assert_eq!(nd.scale.warnings.len(), 1);
        assert_eq!(denormalize(&nd), d);
    }

    #[test]
    fn pod_rank_one() {
        let a = Mat::from_fn(4, 3, |i, j| (i as f64 + 1.0) * (j as f64 - 0.5));
        let p = pod_project(&a, 1).unwrap();
        assert!((p.energy_ratio - 1.0).abs() < 1e-12);
        let rec = p.basis.matmul(&Mat::from_fn(1, 3, |_, j| p.states[j][0]));
        assert!(rec.sub(&a).max_abs() < 1e-12);
        assert!(matches!(pod_project(&a, 2), Err(Error::RankDeficient { .. })));
    }
}
