//! CSV data files: `t,u1..um,y1..yp` with optional `x1..xn` state columns and
//! `yhat1..yhatp` simulated outputs. Time must count up by one per row.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sysid_core::data::{ChannelScale, DataSet, Scale};

use crate::error::{Error, Result, Stage};

/// Columns read from a data file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub t0: i64,
    pub u: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    /// Empty unless the file carries `x` columns.
    pub x: Vec<Vec<f64>>,
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Fixed 17 significant digits.
pub fn fmt_f64_17(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    U,
    Y,
    X,
    Yhat,
}

fn classify(name: &str) -> Option<(Kind, usize)> {
    let (kind, rest) = if let Some(r) = name.strip_prefix("yhat") {
        (Kind::Yhat, r)
    } else if let Some(r) = name.strip_prefix('u') {
        (Kind::U, r)
    } else if let Some(r) = name.strip_prefix('y') {
        (Kind::Y, r)
    } else if let Some(r) = name.strip_prefix('x') {
        (Kind::X, r)
    } else {
        return None;
    };
    let idx: usize = rest.parse().ok()?;
    (idx >= 1).then_some((kind, idx))
}

pub fn load_csv(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.get(0) != Some("t") {
        return Err(Error::parse(path, 1, "first column must be `t`"));
    }
    let mut cols = Vec::new();
    let mut counts = [0usize; 4];
    for name in headers.iter().skip(1) {
        let (kind, idx) = classify(name).ok_or_else(|| Error::parse(path, 1, format!("unknown column `{name}`")))?;
        let c = &mut counts[kind as usize];
        *c += 1;
        if idx != *c {
            return Err(Error::parse(path, 1, format!("column `{name}` out of sequence")));
        }
        cols.push(kind);
    }
    let [m, p, n, _] = counts;
    if m == 0 || p == 0 {
        return Err(Error::parse(path, 1, "missing column: need at least u1 and y1"));
    }
    let mut table = Table::default();
    let mut prev: Option<i64> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != headers.len() {
            return Err(Error::parse(path, line, format!("expected {} fields, found {}", headers.len(), rec.len())));
        }
        let t: i64 = rec[0].parse().map_err(|_| Error::parse(path, line, format!("bad time stamp `{}`", &rec[0])))?;
        match prev {
            None => table.t0 = t,
            Some(q) if t != q + 1 => return Err(Error::NonContiguousTime { path: path.into(), line, prev: q, found: t }),
            _ => {}
        }
        prev = Some(t);
        let (mut u, mut y, mut x) = (Vec::with_capacity(m), Vec::with_capacity(p), Vec::with_capacity(n));
        for (field, kind) in rec.iter().skip(1).zip(&cols) {
            let v: f64 = field.parse().map_err(|_| Error::parse(path, line, format!("malformed number `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, line, format!("non-finite value `{field}`")));
            }
            match kind {
                Kind::U => u.push(v),
                Kind::Y => y.push(v),
                Kind::X => x.push(v),
                Kind::Yhat => {}
            }
        }
        table.u.push(u);
        table.y.push(y);
        if n > 0 {
            table.x.push(x);
        }
    }
    if table.u.is_empty() {
        return Err(Error::parse(path, 2, "no data rows"));
    }
    Ok(table)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

fn header(m: usize, p: usize, n: usize, yhat: usize) -> String {
    let mut h = String::from("t");
    for (prefix, k) in [("u", m), ("y", p), ("x", n), ("yhat", yhat)] {
        for i in 1..=k {
            write!(h, ",{prefix}{i}").unwrap();
        }
    }
    h.push('\n');
    h
}

fn write_rows(path: &Path, t0: i64, cols: &[&[Vec<f64>]]) -> Result<()> {
    let dims: Vec<usize> = cols.iter().map(|c| c.first().map_or(0, Vec::len)).collect();
    let rows = cols[0].len();
    let mut s = header(dims[0], dims[1], dims.get(2).copied().unwrap_or(0), dims.get(3).copied().unwrap_or(0));
    for r in 0..rows {
        write!(s, "{}", t0 + r as i64).unwrap();
        for c in cols {
            if c.is_empty() {
                continue;
            }
            for v in &c[r] {
                write!(s, ",{}", fmt_f64(*v)).unwrap();
            }
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn save_csv(path: &Path, u: &[Vec<f64>], y: &[Vec<f64>]) -> Result<()> {
    check_lengths(u.len(), y.len(), None)?;
    write_rows(path, 0, &[u, y])
}

pub fn save_table(path: &Path, table: &Table) -> Result<()> {
    check_lengths(table.u.len(), table.y.len(), Some(table.x.len()))?;
    write_rows(path, table.t0, &[&table.u, &table.y, &table.x])
}

/// Data columns followed by simulated outputs `yhat1..yhatp`.
pub fn save_trajectory(path: &Path, t0: i64, u: &[Vec<f64>], y: &[Vec<f64>], yhat: &[Vec<f64>]) -> Result<()> {
    check_lengths(u.len(), y.len(), None)?;
    check_lengths(u.len(), yhat.len(), None)?;
    write_rows(path, t0, &[u, y, &[], yhat])
}

fn check_lengths(a: usize, b: usize, c: Option<usize>) -> Result<()> {
    if a != b || c.is_some_and(|c| c != 0 && c != a) {
        return Err(Error::Core {
            stage: "csv",
            source: sysid_core::Error::DimensionMismatch("columns differ in length".into()),
        });
    }
    Ok(())
}

pub fn scale_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".scale");
    PathBuf::from(s)
}

/// Writes the data set to `path` and its normalization record next to it.
pub fn save_dataset(path: &Path, data: &DataSet) -> Result<()> {
    write_rows(path, 0, &[&data.u, &data.y, &data.x])?;
    let sp = scale_path(path);
    fs::write(&sp, scale_to_text(&data.scale)).map_err(|e| Error::io(sp, e))
}

pub fn load_dataset(path: &Path) -> Result<DataSet> {
    let t = load_csv(path)?;
    let mut data = DataSet::new(t.u, t.y, t.x).stage("dataset")?;
    let sp = scale_path(path);
    if sp.exists() {
        let text = fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?;
        data.scale = scale_from_text(&sp, &text)?;
    }
    Ok(data)
}

pub fn scale_to_text(scale: &Scale) -> String {
    let mut s = String::new();
    for (prefix, chans) in [("u", &scale.u), ("y", &scale.y), ("x", &scale.x)] {
        for (i, c) in chans.iter().enumerate() {
            writeln!(s, "{prefix}{} = {} {}", i + 1, fmt_f64_17(c.offset), fmt_f64_17(c.scale)).unwrap();
        }
    }
    for w in &scale.warnings {
        writeln!(s, "warning = {w}").unwrap();
    }
    s
}

pub fn scale_from_text(path: &Path, text: &str) -> Result<Scale> {
    let mut scale = Scale { u: Vec::new(), y: Vec::new(), x: Vec::new(), warnings: Vec::new() };
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, val) = line.split_once('=').ok_or_else(|| Error::parse(path, k + 1, "expected `key = value`"))?;
        let (key, val) = (key.trim(), val.trim());
        if key == "warning" {
            scale.warnings.push(val.to_string());
            continue;
        }
        let nums: Vec<f64> = val
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, k + 1, format!("malformed number in `{val}`")))?;
        let [offset, sc] = nums[..] else {
            return Err(Error::parse(path, k + 1, "expected `offset scale`"));
        };
        let chans = match classify(key) {
            Some((Kind::U, i)) if i == scale.u.len() + 1 => &mut scale.u,
            Some((Kind::Y, i)) if i == scale.y.len() + 1 => &mut scale.y,
            Some((Kind::X, i)) if i == scale.x.len() + 1 => &mut scale.x,
            _ => return Err(Error::parse(path, k + 1, format!("unexpected key `{key}`"))),
        };
        chans.push(ChannelScale { offset, scale: sc });
    }
    Ok(scale)
}
