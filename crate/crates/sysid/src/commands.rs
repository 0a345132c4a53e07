//! The four commands behind the binary. Each one takes a resolved config and
//! an output directory and returns its report; the binary maps reports and
//! errors to exit codes.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sysid_core::constraints::{validate_certificate, CertificateReport};
use sysid_core::data::{apply_scale, embed_output_history, normalize, DataSet};
use sysid_core::fit::{find_metric, fit, ConstraintMode};
use sysid_core::model::{BasisSpec, ModelKind, ModelParameters};
use sysid_core::objectives::{eval_lifted_bound, j_ee, linearized_sim_error, local_rie_total};
use sysid_core::sdp::SolveStatus;
use sysid_core::simulate::{j_perf, simulate_data, simulation_error, stability_probe};

use crate::config::{FitConfig, StateSource};
use crate::csvio::{load_csv, save_trajectory, Table};
use crate::error::{Error, Result, Stage};
use crate::modelfile::{self, ModelFile};
use crate::report::{fmt_num, fmt_opt, grid, key_values, meta_text, write_report, Meta, Report};

/// Surrogate data set from a raw table, before normalization.
pub fn surrogate(table: &Table, states: StateSource, lag: usize, input_lag: usize) -> Result<DataSet> {
    match states {
        StateSource::History => embed_output_history(&table.y, &table.u, lag, input_lag).stage("embed"),
        StateSource::File => {
            if table.x.is_empty() {
                return Err(Error::Config("`states = file` needs x1..xn columns in the data".into()));
            }
            let drop = input_lag - 1;
            if table.u.len() < drop + 2 {
                return Err(Error::Core {
                    stage: "embed",
                    source: sysid_core::Error::InsufficientData(format!("{} samples", table.u.len())),
                });
            }
            let us = (drop..table.u.len()).map(|t| (0..input_lag).flat_map(|j| table.u[t - j].clone()).collect()).collect();
            DataSet::new(us, table.y[drop..].to_vec(), table.x[drop..].to_vec()).stage("embed")
        }
    }
}

fn model_states(mf: &ModelFile) -> StateSource {
    if mf.lag == 0 {
        StateSource::File
    } else {
        StateSource::History
    }
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct Functionals {
    pub j_ee: Option<f64>,
    /// Sum of local RIE terms.
    pub j_v: Option<f64>,
    /// Lifted bound on the linearized simulation error.
    pub j_l: Option<f64>,
    /// Linearized simulation error.
    pub j_lin: Option<f64>,
    /// Simulation error.
    pub j_se: Option<f64>,
    pub j_perf: Option<f64>,
}

impl Functionals {
    pub fn evaluate(params: &ModelParameters, data: &DataSet, has_metric: bool) -> Self {
        let metric = |v: sysid_core::Result<f64>| if has_metric { v.ok() } else { None };
        let sim = simulate_data(params, data).ok();
        Self {
            j_ee: j_ee(params, data).ok(),
            j_v: metric(local_rie_total(params, data)),
            j_l: metric(eval_lifted_bound(params, data)),
            j_lin: linearized_sim_error(params, data).ok(),
            j_se: simulation_error(params, data).ok(),
            j_perf: sim.and_then(|s| j_perf(&s.y, &data.y).ok()),
        }
    }

    /// `J⁰ ≤ Ĵ⁰_L ≤ Ĵ⁰_V` up to a relative tolerance, when all three exist.
    pub fn chain_consistent(&self, rel: f64) -> Option<bool> {
        let (a, b, c) = (self.j_lin?, self.j_l?, self.j_v?);
        Some(a <= b + rel * (1.0 + b) && b <= c + rel * (1.0 + c))
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct CertificateSummary {
    pub worst_min_eig: f64,
    pub worst_x: Vec<f64>,
    pub worst_u: Vec<f64>,
    pub samples: usize,
    pub passes: bool,
}

impl CertificateSummary {
    fn new(r: CertificateReport, tol: f64) -> Self {
        let passes = r.passes(tol);
        Self { worst_min_eig: r.worst_min_eig, worst_x: r.worst_x, worst_u: r.worst_u, samples: r.samples, passes }
    }
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct Timings {
    pub load_s: f64,
    pub solve_s: f64,
    pub evaluate_s: f64,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FitReport {
    pub meta: Meta,
    pub model_file: Option<PathBuf>,
    pub kind: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    /// `[e, fx, fu, gx, gu]`.
    pub degrees: [u32; 5],
    pub num_theta: usize,
    pub objective: String,
    pub constraint: String,
    pub status: String,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub sdp_vars: usize,
    pub sdp_blocks: usize,
    pub sdp_equalities: usize,
    /// Sum of the RIE epigraph slacks at the optimum.
    pub slack_sum: Option<f64>,
    /// Where the contraction metric came from: `fit`, `search` or `none`.
    pub metric: String,
    pub train: Functionals,
    pub validation: Option<Functionals>,
    pub certificate: Option<CertificateSummary>,
    pub bound_chain_consistent: Option<bool>,
    pub timings: Timings,
}

impl FitReport {
    pub fn solver_ok(&self) -> bool {
        self.status == "Optimal"
    }

    pub fn exit_code(&self) -> i32 {
        if self.solver_ok() {
            0
        } else {
            3
        }
    }
}

impl Report for FitReport {
    fn render_text(&self) -> String {
        let mut s = meta_text(&self.meta);
        s.push('\n');
        let d = self.degrees;
        s.push_str(&key_values(&[
            ("model", format!("{} n={} m={} p={} deg(e,fx,fu,gx,gu)={:?} theta={}", self.kind, self.n, self.m, self.p, d, self.num_theta)),
            ("modes", format!("{} / {}", self.objective, self.constraint)),
            ("status", format!("{} after {} iterations", self.status, self.iterations)),
            ("residuals", format!("primal {:.2e} dual {:.2e} gap {:.2e}", self.primal_residual, self.dual_residual, self.gap)),
            ("sdp", format!("{} vars, {} blocks, {} equalities", self.sdp_vars, self.sdp_blocks, self.sdp_equalities)),
            ("slack sum", fmt_opt(self.slack_sum)),
            ("metric", self.metric.clone()),
            (
                "certificate",
                match &self.certificate {
                    Some(c) => format!("{} (worst eig {:.3e} over {} samples)", if c.passes { "ok" } else { "VIOLATED" }, c.worst_min_eig, c.samples),
                    None => "-".into(),
                },
            ),
            ("bound chain", self.bound_chain_consistent.map_or("-".into(), |b| if b { "ok".into() } else { "VIOLATED".into() })),
            ("time", format!("load {:.3}s solve {:.3}s evaluate {:.3}s", self.timings.load_s, self.timings.solve_s, self.timings.evaluate_s)),
        ]));
        s.push('\n');
        let row = |name: &str, f: &Functionals| {
            vec![name.to_string(), fmt_opt(f.j_ee), fmt_opt(f.j_v), fmt_opt(f.j_l), fmt_opt(f.j_lin), fmt_opt(f.j_se), fmt_opt(f.j_perf)]
        };
        let mut rows = vec![row("train", &self.train)];
        if let Some(v) = &self.validation {
            rows.push(row("validation", v));
        }
        s.push_str(&grid(&["data", "J_EE", "J_V", "J_L", "J_lin", "J_se", "J_perf"], &rows));
        s
    }
}

/// Training and validation data after embedding and normalization.
pub struct Prepared {
    pub train: DataSet,
    pub validation: Option<DataSet>,
}

pub fn prepare(cfg: &FitConfig, train: &Table, validation: Option<&Table>) -> Result<Prepared> {
    let raw = surrogate(train, cfg.states, cfg.lag, cfg.input_lag)?;
    let train = if cfg.normalize { normalize(&raw) } else { raw };
    let validation = match validation {
        Some(t) => Some(apply_scale(&surrogate(t, cfg.states, cfg.lag, cfg.input_lag)?, &train.scale)),
        None => None,
    };
    Ok(Prepared { train, validation })
}

fn data_points(data: &DataSet) -> Vec<(Vec<f64>, Vec<f64>)> {
    data.x.iter().cloned().zip(data.u.iter().cloned()).collect()
}

/// Fits, searches for a metric if the fit did not carry one, and evaluates
/// every functional. No files are touched.
pub fn fit_prepared(cfg: &FitConfig, prep: &Prepared) -> Result<(FitReport, ModelFile)> {
    let data = &prep.train;
    let opts = cfg.fit_options()?;
    let basis = BasisSpec::new(data.n(), data.m(), data.p(), cfg.degrees(), cfg.full_xu).stage("basis")?;
    let t_solve = Instant::now();
    let out = fit(&basis, data, &opts).stage("fit")?;
    let mut params = out.params.clone();
    let optimal = out.solution.status == SolveStatus::Optimal;
    let mut metric = if out.has_metric && optimal { "fit" } else { "none" };
    if !out.has_metric && optimal {
        let mode = match params.kind() {
            ModelKind::Polynomial => ConstraintMode::Sos,
            _ => ConstraintMode::StateAffine,
        };
        if let Some(p) = find_metric(&params, mode, &data_points(data), cfg.mu, &opts.solver).stage("metric search")? {
            params.p_mat = p;
            metric = "search";
        }
    }
    let has_metric = metric != "none";
    let solve_s = t_solve.elapsed().as_secs_f64();

    let t_eval = Instant::now();
    let train = Functionals::evaluate(&params, data, has_metric);
    let validation = prep.validation.as_ref().map(|v| Functionals::evaluate(&params, v, has_metric));
    let (x_box, u_box) = (data.state_box(), data.input_box());
    let certificate = if has_metric {
        let r = validate_certificate(&params, cfg.validate_samples, &x_box, &u_box, &data_points(data), cfg.seed)
            .stage("certificate")?;
        Some(CertificateSummary::new(r, cfg.validate_tol))
    } else {
        None
    };
    let evaluate_s = t_eval.elapsed().as_secs_f64();

    let sol = &out.solution;
    let d = &basis.degrees;
    let rie = !matches!(opts.objective, sysid_core::fit::ObjectiveMode::EquationError);
    let report = FitReport {
        meta: Meta::new("fit", cfg),
        model_file: None,
        kind: format!("{:?}", basis.kind()),
        n: basis.n,
        m: basis.m,
        p: basis.p,
        degrees: [d.e, d.fx, d.fu, d.gx, d.gu],
        num_theta: basis.num_theta(),
        objective: cfg.objective.clone(),
        constraint: cfg.constraint.clone(),
        status: format!("{:?}", sol.status),
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap: sol.gap,
        sdp_vars: out.num_vars,
        sdp_blocks: out.num_blocks,
        sdp_equalities: out.num_equalities,
        slack_sum: rie.then_some(out.slack_sum),
        metric: metric.into(),
        bound_chain_consistent: train.chain_consistent(1e-6),
        train,
        validation,
        certificate,
        timings: Timings { load_s: 0.0, solve_s, evaluate_s },
    };
    let mf = ModelFile {
        params,
        has_metric,
        lag: if cfg.states == StateSource::File { 0 } else { cfg.lag },
        input_lag: cfg.input_lag,
        scale: data.scale.clone(),
        x_box,
        u_box,
    };
    Ok((report, mf))
}

pub fn cmd_fit(cfg: &FitConfig, out: &Path) -> Result<FitReport> {
    let t_load = Instant::now();
    let train = load_csv(cfg.data_path()?)?;
    let val = cfg.validation_data.as_deref().map(load_csv).transpose()?;
    let prep = prepare(cfg, &train, val.as_ref())?;
    let load_s = t_load.elapsed().as_secs_f64();
    let (mut report, mf) = fit_prepared(cfg, &prep)?;
    report.timings.load_s = load_s;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let model_path = out.join(cfg.model.file_name().unwrap_or("model.txt".as_ref()));
    modelfile::save(&model_path, &mf)?;
    report.model_file = Some(model_path);
    write_report(out, "fit_report", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SimulateReport {
    pub meta: Meta,
    pub model_file: PathBuf,
    pub data_file: PathBuf,
    pub trajectory_file: PathBuf,
    pub samples: usize,
    pub j_perf: f64,
    pub max_newton_iters: usize,
    pub max_residual: f64,
}

impl Report for SimulateReport {
    fn render_text(&self) -> String {
        meta_text(&self.meta)
            + "\n"
            + &key_values(&[
                ("model", self.model_file.display().to_string()),
                ("data", self.data_file.display().to_string()),
                ("trajectory", self.trajectory_file.display().to_string()),
                ("samples", self.samples.to_string()),
                ("J_perf", fmt_num(self.j_perf)),
                ("newton", format!("max {} iterations, residual {:.2e}", self.max_newton_iters, self.max_residual)),
            ])
    }
}

/// Simulates the model over the inputs of `cfg.data` from its first
/// surrogate state. Outputs are mapped back to raw units.
pub fn cmd_simulate(cfg: &FitConfig, out: &Path) -> Result<SimulateReport> {
    let mf = modelfile::load(&cfg.model)?;
    let data_path = cfg.data_path()?;
    let table = load_csv(data_path)?;
    let raw = surrogate(&table, model_states(&mf), mf.lag, mf.input_lag)?;
    let b = &mf.params.basis;
    if raw.n() != b.n || raw.m() != b.m || raw.p() != b.p {
        return Err(Error::Core {
            stage: "simulate",
            source: sysid_core::Error::DimensionMismatch(format!(
                "data gives n={} m={} p={}, model has n={} m={} p={}",
                raw.n(),
                raw.m(),
                raw.p(),
                b.n,
                b.m,
                b.p
            )),
        });
    }
    let data = if mf.scale.u.is_empty() { raw.clone() } else { apply_scale(&raw, &mf.scale) };
    let sim = simulate_data(&mf.params, &data).stage("simulate")?;
    let yhat: Vec<Vec<f64>> = if mf.scale.y.is_empty() {
        sim.y.clone()
    } else {
        sim.y.iter().map(|v| v.iter().zip(&mf.scale.y).map(|(a, s)| s.invert(*a)).collect()).collect()
    };
    let jp = j_perf(&yhat, &raw.y).stage("simulate")?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let traj = out.join("trajectory.csv");
    let drop = table.u.len() - raw.len();
    let u_raw = &table.u[drop..];
    save_trajectory(&traj, table.t0 + drop as i64, u_raw, &raw.y, &yhat)?;
    let report = SimulateReport {
        meta: Meta::new("simulate", cfg),
        model_file: cfg.model.clone(),
        data_file: data_path.to_path_buf(),
        trajectory_file: traj,
        samples: raw.len(),
        j_perf: jp,
        max_newton_iters: sim.newton_iters.iter().copied().max().unwrap_or(0),
        max_residual: sim.max_residual,
    };
    write_report(out, "simulate_report", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ProbeSummary {
    pub pairs: usize,
    pub horizon: usize,
    pub failed_simulations: usize,
    /// Largest share of the output gap accumulated over the last tenth.
    pub max_tail_fraction: f64,
    /// Largest ratio of accumulated output gap to the storage bound.
    pub max_bound_ratio: f64,
    pub bound_violations: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ValidateReport {
    pub meta: Meta,
    pub model_file: Option<PathBuf>,
    pub has_metric: bool,
    pub certificate: Option<CertificateSummary>,
    pub probe: Option<ProbeSummary>,
    pub pass: bool,
    pub reasons: Vec<String>,
}

impl ValidateReport {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

impl Report for ValidateReport {
    fn render_text(&self) -> String {
        let mut rows = vec![
            ("verdict", if self.pass { "PASS".to_string() } else { "FAIL".to_string() }),
            ("metric", self.has_metric.to_string()),
        ];
        if let Some(c) = &self.certificate {
            rows.push(("worst eig", format!("{:.4e} over {} samples", c.worst_min_eig, c.samples)));
        }
        if let Some(p) = &self.probe {
            rows.push(("probe", format!("{} pairs x {} steps", p.pairs, p.horizon)));
            rows.push(("tail share", format!("{:.3e}", p.max_tail_fraction)));
            rows.push(("gap/storage", format!("{:.4}", p.max_bound_ratio)));
        }
        for r in &self.reasons {
            rows.push(("reason", r.clone()));
        }
        meta_text(&self.meta) + "\n" + &key_values(&rows)
    }
}

pub const PROBE_TAIL_MAX: f64 = 1e-6;
pub const PROBE_BOUND_SLACK: f64 = 0.05;

/// Samples the contraction LMI over the model's box and runs the two-trajectory
/// stability probe from random initial-condition pairs inside it.
pub fn validate_model(mf: &ModelFile, cfg: &FitConfig) -> Result<ValidateReport> {
    let mut reasons = Vec::new();
    if !mf.has_metric {
        reasons.push("no contraction metric".to_string());
        return Ok(ValidateReport {
            meta: Meta::new("validate", cfg),
            model_file: None,
            has_metric: false,
            certificate: None,
            probe: None,
            pass: false,
            reasons,
        });
    }
    let params = &mf.params;
    let cert = validate_certificate(params, cfg.validate_samples, &mf.x_box, &mf.u_box, &[], cfg.seed).stage("validate")?;
    let cert = CertificateSummary::new(cert, cfg.validate_tol);
    if !cert.passes {
        reasons.push(format!("contraction LMI has eigenvalue {:.3e} at x={:?} u={:?}", cert.worst_min_eig, cert.worst_x, cert.worst_u));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw = |bx: &[(f64, f64)]| -> Vec<f64> { bx.iter().map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect() };
    let horizon = cfg.probe_horizon.max(2);
    let mut probe = ProbeSummary {
        pairs: cfg.probe_pairs,
        horizon,
        failed_simulations: 0,
        max_tail_fraction: 0.0,
        max_bound_ratio: 0.0,
        bound_violations: 0,
    };
    for _ in 0..cfg.probe_pairs {
        let (x1, x2) = (draw(&mf.x_box), draw(&mf.x_box));
        let mut u = Vec::with_capacity(horizon);
        while u.len() < horizon {
            let v = draw(&mf.u_box);
            let hold = 5.min(horizon - u.len());
            u.extend(std::iter::repeat_n(v, hold));
        }
        match stability_probe(params, &x1, &x2, &u) {
            Ok(r) => {
                probe.max_tail_fraction = probe.max_tail_fraction.max(r.tail_fraction);
                if r.storage_bound > 0.0 {
                    probe.max_bound_ratio = probe.max_bound_ratio.max(r.output_gap_total / r.storage_bound);
                }
                if !r.bound_holds(PROBE_BOUND_SLACK) {
                    probe.bound_violations += 1;
                }
            }
            Err(_) => probe.failed_simulations += 1,
        }
    }
    if probe.failed_simulations > 0 {
        reasons.push(format!("{} probe simulations failed", probe.failed_simulations));
    }
    if probe.max_tail_fraction > PROBE_TAIL_MAX {
        reasons.push(format!("output gap tail share {:.3e} exceeds {PROBE_TAIL_MAX:e}", probe.max_tail_fraction));
    }
    if probe.bound_violations > 0 {
        reasons.push(format!("storage bound violated in {} pairs", probe.bound_violations));
    }
    Ok(ValidateReport {
        meta: Meta::new("validate", cfg),
        model_file: None,
        has_metric: true,
        certificate: Some(cert),
        probe: Some(probe),
        pass: reasons.is_empty(),
        reasons,
    })
}

pub fn cmd_validate(cfg: &FitConfig, out: &Path) -> Result<ValidateReport> {
    let mf = modelfile::load(&cfg.model)?;
    let mut report = validate_model(&mf, cfg)?;
    report.model_file = Some(cfg.model.clone());
    write_report(out, "validate_report", &report)?;
    Ok(report)
}
