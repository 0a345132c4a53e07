//! Plain-text dump of an [`SdpProblem`], for debugging and for feeding the
//! same program to another solver.
//!
//! ```text
//! sysid-sdp 1
//! N <num_vars>
//! dims <d_1> ... <d_K>
//! equalities <E>
//! objective_constant <c0>
//! objective              then `<var> <c>` lines, nonzeros only
//! names                  then `<var> <name>` lines
//! block <k> <label>
//! C <i> <j> <value>      constant matrix, lower triangle, nonzeros only
//! F <var>                starts the coefficient matrix of variable <var>
//! <i> <j> <value>
//! equality <e> <rhs>     then `<var> <coef>` lines
//! end
//! ```
//!
//! Indices are zero-based and every number is written with 17 significant
//! digits, so a dump/restore round trip reproduces the problem exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sysid_core::linalg::SymMat;
use sysid_core::sdp::{LinearEquality, LmiBlockTemplate, SdpProblem};

use crate::csvio::fmt_f64_17;
use crate::error::{Error, Result};

const MAGIC: &str = "sysid-sdp 1";

fn write_sym(out: &mut String, tag: &str, m: &SymMat) {
    for i in 0..m.dim() {
        for j in 0..=i {
            let v = m.get(i, j);
            if v != 0.0 {
                writeln!(out, "{tag}{i} {j} {}", fmt_f64_17(v)).unwrap();
            }
        }
    }
}

pub fn to_text(p: &SdpProblem) -> String {
    let mut s = String::new();
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "N {}", p.num_vars).unwrap();
    let dims: Vec<String> = p.blocks.iter().map(|b| b.dim.to_string()).collect();
    writeln!(s, "dims {}", dims.join(" ")).unwrap();
    writeln!(s, "equalities {}", p.equalities.len()).unwrap();
    writeln!(s, "objective_constant {}", fmt_f64_17(p.objective_constant)).unwrap();
    s.push_str("objective\n");
    for (k, c) in p.objective.iter().enumerate() {
        if *c != 0.0 {
            writeln!(s, "{k} {}", fmt_f64_17(*c)).unwrap();
        }
    }
    s.push_str("names\n");
    for (k, name) in p.var_names.iter().enumerate() {
        writeln!(s, "{k} {name}").unwrap();
    }
    for (k, b) in p.blocks.iter().enumerate() {
        writeln!(s, "block {k} {}", b.label).unwrap();
        write_sym(&mut s, "C ", &b.constant);
        for (var, m) in &b.terms {
            writeln!(s, "F {var}").unwrap();
            write_sym(&mut s, "", m);
        }
    }
    for (e, eq) in p.equalities.iter().enumerate() {
        writeln!(s, "equality {e} {}", fmt_f64_17(eq.rhs)).unwrap();
        for (var, c) in &eq.coeffs {
            writeln!(s, "{var} {}", fmt_f64_17(*c)).unwrap();
        }
    }
    s.push_str("end\n");
    s
}

pub fn save(path: &Path, p: &SdpProblem) -> Result<()> {
    fs::write(path, to_text(p)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<SdpProblem> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(path, &text)
}

enum Section {
    Preamble,
    Objective,
    Names,
    /// Inside a block; `Some(i)` once a coefficient matrix `terms[i]` is open.
    Block(Option<usize>),
    Equality,
}

pub fn from_text(path: &Path, text: &str) -> Result<SdpProblem> {
    let err = |line: usize, msg: &str| Error::parse(path, line, msg);
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
    if lines.next().map(|(_, l)| l.trim()) != Some(MAGIC) {
        return Err(err(1, "missing `sysid-sdp 1` header"));
    }
    let mut p = SdpProblem::new();
    let mut dims: Vec<usize> = Vec::new();
    let mut num_eq = 0usize;
    let mut section = Section::Preamble;
    let mut done = false;
    for (no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let usize_at = |i: usize| -> Result<usize> {
            toks.get(i).and_then(|t| t.parse().ok()).ok_or_else(|| err(no, "expected an index"))
        };
        let f64_at = |i: usize| -> Result<f64> {
            toks.get(i).and_then(|t| t.parse().ok()).ok_or_else(|| err(no, "expected a number"))
        };
        match toks[0] {
            "N" => {
                let n = usize_at(1)?;
                p.num_vars = n;
                p.objective = vec![0.0; n];
                p.var_names = (0..n).map(|k| format!("z[{k}]")).collect();
            }
            "dims" => dims = (1..toks.len()).map(usize_at).collect::<Result<_>>()?,
            "equalities" => num_eq = usize_at(1)?,
            "objective_constant" => p.objective_constant = f64_at(1)?,
            "objective" => section = Section::Objective,
            "names" => section = Section::Names,
            "block" => {
                let k = usize_at(1)?;
                if k != p.blocks.len() || k >= dims.len() {
                    return Err(err(no, "block out of sequence"));
                }
                let label = line.splitn(3, ' ').nth(2).unwrap_or("").to_string();
                let d = dims[k];
                p.blocks.push(LmiBlockTemplate { dim: d, constant: SymMat::zeros(d), terms: Vec::new(), label });
                section = Section::Block(None);
            }
            "equality" => {
                if usize_at(1)? != p.equalities.len() {
                    return Err(err(no, "equality out of sequence"));
                }
                p.equalities.push(LinearEquality { coeffs: Vec::new(), rhs: f64_at(2)? });
                section = Section::Equality;
            }
            "end" => {
                done = true;
                break;
            }
            _ => match section {
                Section::Preamble => return Err(err(no, "unexpected line")),
                Section::Objective => {
                    let k = usize_at(0)?;
                    *p.objective.get_mut(k).ok_or_else(|| err(no, "variable out of range"))? = f64_at(1)?;
                }
                Section::Names => {
                    let k = usize_at(0)?;
                    let name = line.split_once(' ').map(|x| x.1).unwrap_or("").to_string();
                    *p.var_names.get_mut(k).ok_or_else(|| err(no, "variable out of range"))? = name;
                }
                Section::Block(ref mut open) => {
                    let b = p.blocks.last_mut().expect("block section without block");
                    let (target, off) = match toks[0] {
                        "C" => (&mut b.constant, 1),
                        "F" => {
                            let var = usize_at(1)?;
                            b.terms.push((var, SymMat::zeros(b.dim)));
                            *open = Some(b.terms.len() - 1);
                            continue;
                        }
                        _ => match open {
                            Some(t) => (&mut b.terms[*t].1, 0),
                            None => return Err(err(no, "entry before any `F` line")),
                        },
                    };
                    let (i, j, v) = (usize_at(off)?, usize_at(off + 1)?, f64_at(off + 2)?);
                    if i >= b.dim || j > i {
                        return Err(err(no, "entry outside the lower triangle"));
                    }
                    target.set(i, j, v);
                }
                Section::Equality => {
                    let eq = p.equalities.last_mut().expect("equality section without equality");
                    eq.coeffs.push((usize_at(0)?, f64_at(1)?));
                }
            },
        }
    }
    if !done {
        return Err(err(0, "truncated dump: missing `end`"));
    }
    if p.blocks.len() != dims.len() || p.equalities.len() != num_eq {
        return Err(err(0, "block or equality count disagrees with the header"));
    }
    p.validate().map_err(|e| err(0, &e.to_string()))?;
    Ok(p)
}
