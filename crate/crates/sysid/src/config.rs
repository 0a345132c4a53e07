//! Flat `key = value` configuration files. `#` starts a comment; unknown keys
//! are rejected. Relative paths resolve against the directory holding the
//! config file.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `data` | | training CSV (`t,u1..,y1..[,x1..]`) |
//! | `validation_data` | none | held-out CSV, same layout |
//! | `model` | `model.txt` | model file written by `fit`, read by `simulate` and `validate` |
//! | `states` | `history` | `history` stacks past outputs, `file` uses the `x` columns |
//! | `lag`, `input_lag` | 1, 1 | output and input history lengths |
//! | `degree` | 1 | shorthand for `deg_e` and `deg_fx` |
//! | `deg_e`, `deg_fx`, `deg_fu`, `deg_gx`, `deg_gu` | 1 | basis degrees |
//! | `full_xu` | false | allow mixed state/input monomials in f and g |
//! | `objective` | `local_rie` | `ee`, `local_rie` or `sos_rie` |
//! | `constraint` | `sos` | `pointwise`, `sos`, `state_affine` or `wellposedness` |
//! | `mu`, `rho_reg` | 1e-3, 1e-8 | contraction margin, regularization weight |
//! | `wellposedness_margin` | 1 | lower bound on `E + E′` for `wellposedness` |
//! | `rie_stride` | 1 | use every k-th sample in the RIE objective |
//! | `normalize` | true | scale channels to zero mean, unit RMS before fitting |
//! | `feas_tol`, `gap_tol`, `dual_tol`, `infeas_tol`, `max_iter` | solver defaults | interior point settings |
//! | `seed` | 0 | seed for sampling and benchmarks |
//! | `validate_samples` | 2000 | low-discrepancy samples of the contraction LMI |
//! | `validate_tol` | 1e-7 | smallest eigenvalue accepted by `validate` |
//! | `probe_pairs`, `probe_horizon` | 20, 300 | initial-condition pairs and length of the stability probe |
//! | `suite` | `recovery` | benchmark suite |

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use sysid_core::fit::{ConstraintMode, FitOptions, ObjectiveMode};
use sysid_core::model::Degrees;
use sysid_core::sdp::SolverOptions;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    History,
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitConfig {
    pub data: Option<PathBuf>,
    pub validation_data: Option<PathBuf>,
    pub model: PathBuf,
    pub states: StateSource,
    pub lag: usize,
    pub input_lag: usize,
    pub deg_e: u32,
    pub deg_fx: u32,
    pub deg_fu: u32,
    pub deg_gx: u32,
    pub deg_gu: u32,
    pub full_xu: bool,
    pub objective: String,
    pub constraint: String,
    pub mu: f64,
    pub rho_reg: f64,
    pub wellposedness_margin: f64,
    pub rie_stride: usize,
    pub normalize: bool,
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub dual_tol: f64,
    pub infeas_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub validate_samples: usize,
    pub validate_tol: f64,
    pub probe_pairs: usize,
    pub probe_horizon: usize,
    pub suite: String,
}

impl Default for FitConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        Self {
            data: None,
            validation_data: None,
            model: PathBuf::from("model.txt"),
            states: StateSource::History,
            lag: 1,
            input_lag: 1,
            deg_e: 1,
            deg_fx: 1,
            deg_fu: 1,
            deg_gx: 1,
            deg_gu: 1,
            full_xu: false,
            objective: "local_rie".into(),
            constraint: "sos".into(),
            mu: 1e-3,
            rho_reg: 1e-8,
            wellposedness_margin: 1.0,
            rie_stride: 1,
            normalize: true,
            feas_tol: s.feas_tol,
            gap_tol: s.gap_tol,
            dual_tol: s.dual_tol,
            infeas_tol: s.infeas_tol,
            max_iter: s.max_iter,
            seed: 0,
            validate_samples: 2000,
            validate_tol: 1e-7,
            probe_pairs: 20,
            probe_horizon: 300,
            suite: "recovery".into(),
        }
    }
}

pub fn parse_objective(s: &str) -> Result<ObjectiveMode> {
    match s {
        "ee" | "equation_error" => Ok(ObjectiveMode::EquationError),
        "local_rie" => Ok(ObjectiveMode::LocalRie),
        "sos_rie" => Ok(ObjectiveMode::SosRie),
        _ => Err(Error::Config(format!("unknown objective `{s}`"))),
    }
}

pub fn parse_constraint(s: &str) -> Result<ConstraintMode> {
    match s {
        "pointwise" => Ok(ConstraintMode::Pointwise),
        "sos" => Ok(ConstraintMode::Sos),
        "state_affine" => Ok(ConstraintMode::StateAffine),
        "wellposedness" => Ok(ConstraintMode::WellPosedness),
        _ => Err(Error::Config(format!("unknown constraint `{s}`"))),
    }
}

impl FitConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, val) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            c.set(key.trim(), val.trim(), base).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", no + 1)),
                other => other,
            })?;
        }
        c.check()?;
        Ok(c)
    }

    pub fn set(&mut self, key: &str, val: &str, base: &Path) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, val: &str) -> Result<T> {
            val.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{val}`")))
        }
        let path = |v: &str| base.join(v);
        match key {
            "data" => self.data = Some(path(val)),
            "validation_data" => self.validation_data = Some(path(val)),
            "model" => self.model = path(val),
            "states" => {
                self.states = match val {
                    "history" => StateSource::History,
                    "file" => StateSource::File,
                    _ => return Err(Error::Config(format!("`states` must be history or file, not `{val}`"))),
                }
            }
            "lag" => self.lag = num(key, val)?,
            "input_lag" => self.input_lag = num(key, val)?,
            "degree" => {
                self.deg_e = num(key, val)?;
                self.deg_fx = self.deg_e;
            }
            "deg_e" => self.deg_e = num(key, val)?,
            "deg_fx" => self.deg_fx = num(key, val)?,
            "deg_fu" => self.deg_fu = num(key, val)?,
            "deg_gx" => self.deg_gx = num(key, val)?,
            "deg_gu" => self.deg_gu = num(key, val)?,
            "full_xu" => self.full_xu = num(key, val)?,
            "objective" => {
                parse_objective(val)?;
                self.objective = val.into();
            }
            "constraint" => {
                parse_constraint(val)?;
                self.constraint = val.into();
            }
            "mu" => self.mu = num(key, val)?,
            "rho_reg" => self.rho_reg = num(key, val)?,
            "wellposedness_margin" => self.wellposedness_margin = num(key, val)?,
            "rie_stride" => self.rie_stride = num(key, val)?,
            "normalize" => self.normalize = num(key, val)?,
            "feas_tol" => self.feas_tol = num(key, val)?,
            "gap_tol" => self.gap_tol = num(key, val)?,
            "dual_tol" => self.dual_tol = num(key, val)?,
            "infeas_tol" => self.infeas_tol = num(key, val)?,
            "max_iter" => self.max_iter = num(key, val)?,
            "seed" => self.seed = num(key, val)?,
            "validate_samples" => self.validate_samples = num(key, val)?,
            "validate_tol" => self.validate_tol = num(key, val)?,
            "probe_pairs" => self.probe_pairs = num(key, val)?,
            "probe_horizon" => self.probe_horizon = num(key, val)?,
            "suite" => self.suite = val.into(),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn check(&self) -> Result<()> {
        if self.states == StateSource::History && self.lag == 0 {
            return Err(Error::Config("`lag` must be at least 1".into()));
        }
        if self.input_lag == 0 || self.rie_stride == 0 {
            return Err(Error::Config("`input_lag` and `rie_stride` must be at least 1".into()));
        }
        for (k, v) in [("mu", self.mu), ("feas_tol", self.feas_tol), ("gap_tol", self.gap_tol), ("dual_tol", self.dual_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("`{k}` must be positive")));
            }
        }
        if !(self.rho_reg >= 0.0) {
            return Err(Error::Config("`rho_reg` must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn degrees(&self) -> Degrees {
        Degrees { e: self.deg_e, fx: self.deg_fx, fu: self.deg_fu, gx: self.deg_gx, gu: self.deg_gu }
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            feas_tol: self.feas_tol,
            gap_tol: self.gap_tol,
            dual_tol: self.dual_tol,
            max_iter: self.max_iter,
            infeas_tol: self.infeas_tol,
        }
    }

    pub fn fit_options(&self) -> Result<FitOptions> {
        Ok(FitOptions {
            objective: parse_objective(&self.objective)?,
            constraint: parse_constraint(&self.constraint)?,
            mu: self.mu,
            rho_reg: self.rho_reg,
            rie_stride: self.rie_stride,
            wellposedness_margin: self.wellposedness_margin,
            solver: self.solver(),
        })
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data.as_deref().ok_or_else(|| Error::Config("`data` is required".into()))
    }

    /// SHA-256 of the resolved configuration, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
