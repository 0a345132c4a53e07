//! Report envelopes and their two renderings: JSON for machines, aligned text
//! for people.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::FitConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Meta {
    pub fn new(command: &str, cfg: &FitConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
        }
    }
}

/// Anything that can be written as `<name>.json` plus `<name>.txt`.
pub trait Report: Serialize {
    fn render_text(&self) -> String;
}

pub fn write_report<R: Report>(dir: &Path, name: &str, report: &R) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    let jp = dir.join(format!("{name}.json"));
    fs::write(&jp, json + "\n").map_err(|e| Error::io(&jp, e))?;
    let tp = dir.join(format!("{name}.txt"));
    fs::write(&tp, report.render_text()).map_err(|e| Error::io(&tp, e))
}

pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => fmt_num(v),
        None => "-".into(),
    }
}

pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || (1e-3..1e5).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.4e}")
    }
}

/// Two-column `key  value` listing with the keys padded to one width.
pub fn key_values(rows: &[(&str, String)]) -> String {
    let w = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, v) in rows {
        writeln!(s, "{k:<w$}  {v}").unwrap();
    }
    s
}

/// Column-aligned table; numbers right-aligned, text left-aligned.
pub fn grid(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (c, cell) in r.iter().enumerate().take(cols) {
            widths[c] = widths[c].max(cell.chars().count());
        }
    }
    let numeric = |s: &str| s.parse::<f64>().is_ok();
    let line = |cells: Vec<&str>| -> String {
        let mut out = String::new();
        for (c, cell) in cells.iter().enumerate() {
            let w = widths[c];
            if c > 0 {
                out.push_str("  ");
            }
            if numeric(cell) {
                write!(out, "{cell:>w$}").unwrap();
            } else {
                write!(out, "{cell:<w$}").unwrap();
            }
        }
        out.trim_end().to_string() + "\n"
    };
    let mut s = line(headers.to_vec());
    s.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for r in rows {
        s.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    s
}

pub fn meta_text(meta: &Meta) -> String {
    key_values(&[
        ("command", meta.command.clone()),
        ("version", format!("{} {}", meta.tool, meta.version)),
        ("config", meta.config_hash.clone()),
        ("seed", meta.seed.to_string()),
    ])
}
