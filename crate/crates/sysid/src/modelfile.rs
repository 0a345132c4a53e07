//! Text model files. A `key = value` header describes the basis, the data
//! preprocessing and the certified region; the coefficients follow one per
//! line with 17 significant digits so a save/load round trip is bit-exact.
//!
//! ```text
//! sysid-model 1
//! n = 2
//! ...
//! [theta]
//! 1.0000000000000000e0
//! ...
//! [metric]
//! 1.0000000000000000e0 0.0000000000000000e0
//! 0.0000000000000000e0 1.0000000000000000e0
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sysid_core::data::{ChannelScale, Scale};
use sysid_core::linalg::SymMat;
use sysid_core::model::{BasisSpec, Degrees, ModelParameters};

use crate::csvio::fmt_f64_17;
use crate::error::{Error, Result, Stage};

const MAGIC: &str = "sysid-model 1";

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub params: ModelParameters,
    /// False when no contraction metric was found; `params.p_mat` is then a
    /// placeholder identity.
    pub has_metric: bool,
    /// Output history length used for the surrogate states, 0 when the data
    /// carried its own `x` columns.
    pub lag: usize,
    pub input_lag: usize,
    /// Normalization applied to raw data before it reaches the model.
    pub scale: Scale,
    /// Region the model was fitted on, in normalized coordinates.
    pub x_box: Vec<(f64, f64)>,
    pub u_box: Vec<(f64, f64)>,
}

pub fn to_text(mf: &ModelFile) -> String {
    let b = &mf.params.basis;
    let d = &b.degrees;
    let mut s = String::new();
    let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
    kv("n", b.n.to_string());
    kv("m", b.m.to_string());
    kv("p", b.p.to_string());
    kv("deg_e", d.e.to_string());
    kv("deg_fx", d.fx.to_string());
    kv("deg_fu", d.fu.to_string());
    kv("deg_gx", d.gx.to_string());
    kv("deg_gu", d.gu.to_string());
    kv("full_xu", b.full_xu.to_string());
    kv("mu", fmt_f64_17(mf.params.mu));
    kv("lag", mf.lag.to_string());
    kv("input_lag", mf.input_lag.to_string());
    kv("metric", mf.has_metric.to_string());
    let pair = |a: f64, b: f64| format!("{} {}", fmt_f64_17(a), fmt_f64_17(b));
    for (prefix, bx) in [("box_x", &mf.x_box), ("box_u", &mf.u_box)] {
        for (i, (lo, hi)) in bx.iter().enumerate() {
            kv(&format!("{prefix}{}", i + 1), pair(*lo, *hi));
        }
    }
    for (prefix, chans) in [("scale_u", &mf.scale.u), ("scale_y", &mf.scale.y), ("scale_x", &mf.scale.x)] {
        for (i, c) in chans.iter().enumerate() {
            kv(&format!("{prefix}{}", i + 1), pair(c.offset, c.scale));
        }
    }
    let mut out = format!("{MAGIC}\n{s}[theta]\n");
    for v in &mf.params.theta {
        writeln!(out, "{}", fmt_f64_17(*v)).unwrap();
    }
    out.push_str("[metric]\n");
    let p = &mf.params.p_mat;
    for i in 0..b.n {
        let row: Vec<String> = (0..b.n).map(|j| fmt_f64_17(p.get(i, j))).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}

pub fn save(path: &Path, mf: &ModelFile) -> Result<()> {
    fs::write(path, to_text(mf)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(path, &text)
}

pub fn from_text(path: &Path, text: &str) -> Result<ModelFile> {
    let err = |line: usize, msg: String| Error::parse(path, line, msg);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, l)) if l == MAGIC => {}
        _ => return Err(err(1, format!("missing `{MAGIC}` header"))),
    }
    let mut header: Vec<(usize, String, String)> = Vec::new();
    let mut section_line = 0;
    for (no, l) in lines.by_ref() {
        if l == "[theta]" {
            section_line = no;
            break;
        }
        let (k, v) = l.split_once('=').ok_or_else(|| err(no, "expected `key = value`".into()))?;
        header.push((no, k.trim().to_string(), v.trim().to_string()));
    }
    if section_line == 0 {
        return Err(err(0, "missing [theta] section".into()));
    }
    let get = |key: &str| -> Result<(usize, &str)> {
        header
            .iter()
            .find(|(_, k, _)| k == key)
            .map(|(no, _, v)| (*no, v.as_str()))
            .ok_or_else(|| err(0, format!("missing key `{key}`")))
    };
    let int = |key: &str| -> Result<usize> {
        let (no, v) = get(key)?;
        v.parse().map_err(|_| err(no, format!("`{key}` is not an integer")))
    };
    let deg = |key: &str| -> Result<u32> { int(key).map(|v| v as u32) };
    let flag = |key: &str| -> Result<bool> {
        let (no, v) = get(key)?;
        v.parse().map_err(|_| err(no, format!("`{key}` must be true or false")))
    };
    let num = |no: usize, v: &str| -> Result<f64> { v.parse().map_err(|_| err(no, format!("malformed number `{v}`"))) };
    let pair = |no: usize, v: &str| -> Result<(f64, f64)> {
        let parts: Vec<&str> = v.split_whitespace().collect();
        match parts[..] {
            [a, b] => Ok((num(no, a)?, num(no, b)?)),
            _ => Err(err(no, "expected two numbers".into())),
        }
    };
    let (n, m, p) = (int("n")?, int("m")?, int("p")?);
    let degrees = Degrees { e: deg("deg_e")?, fx: deg("deg_fx")?, fu: deg("deg_fu")?, gx: deg("deg_gx")?, gu: deg("deg_gu")? };
    let basis = BasisSpec::new(n, m, p, degrees, flag("full_xu")?).stage("model file")?;
    let (mu_line, mu) = get("mu")?;
    let mu = num(mu_line, mu)?;
    let indexed = |prefix: &str, count: usize| -> Result<Vec<(f64, f64)>> {
        (1..=count)
            .map(|i| {
                let (no, v) = get(&format!("{prefix}{i}"))?;
                pair(no, v)
            })
            .collect()
    };
    let optional = |prefix: &str, count: usize| -> Result<Vec<(f64, f64)>> {
        if get(&format!("{prefix}1")).is_ok() {
            indexed(prefix, count)
        } else {
            Ok(Vec::new())
        }
    };
    let to_scale = |v: Vec<(f64, f64)>| v.into_iter().map(|(offset, scale)| ChannelScale { offset, scale }).collect();
    let scale = Scale {
        u: to_scale(optional("scale_u", m)?),
        y: to_scale(optional("scale_y", p)?),
        x: to_scale(optional("scale_x", n)?),
        warnings: Vec::new(),
    };
    let x_box = indexed("box_x", n)?;
    let u_box = indexed("box_u", m)?;

    let k = basis.num_theta();
    let mut theta = Vec::with_capacity(k);
    let mut metric_line = 0;
    for (no, l) in lines.by_ref() {
        if l == "[metric]" {
            metric_line = no;
            break;
        }
        theta.push(num(no, l)?);
    }
    if theta.len() != k {
        return Err(err(section_line, format!("expected {k} coefficients, found {}", theta.len())));
    }
    if metric_line == 0 {
        return Err(err(0, "missing [metric] section".into()));
    }
    let mut rows = Vec::with_capacity(n);
    for (no, l) in lines.by_ref().take(n) {
        let row: Vec<f64> = l.split_whitespace().map(|v| num(no, v)).collect::<Result<_>>()?;
        if row.len() != n {
            return Err(err(no, format!("metric row has {} entries, expected {n}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(err(metric_line, "metric matrix is incomplete".into()));
    }
    let p_mat = SymMat::from_fn(n, |i, j| rows[i][j]);
    let params = ModelParameters::new(basis, theta, p_mat, mu).stage("model file")?;
    Ok(ModelFile {
        params,
        has_metric: flag("metric")?,
        lag: int("lag")?,
        input_lag: int("input_lag")?,
        scale,
        x_box,
        u_box,
    })
}
