//! Benchmark suites on synthetic systems. Every suite reports pass/fail per
//! criterion plus tables, and is deterministic for a fixed seed whatever the
//! worker count.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use sysid_core::data::DataSet;
use sysid_core::fit::{find_metric, ConstraintMode};
use sysid_core::constraints::contraction_block_value;
use sysid_core::linalg::{min_eig, Mat};
use sysid_core::model::{BasisSpec, Degrees, ModelParameters, Part};
use sysid_core::objectives::{eval_lifted_bound, linearized_sim_error, local_rie_total};
use sysid_core::sdp::SolverOptions;
use sysid_core::simulate::simulation_error;

use crate::commands::{fit_prepared, prepare, validate_model, FitReport, ValidateReport};
use crate::config::{FitConfig, StateSource};
use crate::csvio::Table;
use crate::error::{Error, Result, Stage};
use crate::modelfile::ModelFile;
use crate::report::{fmt_opt, grid, meta_text, write_report, Meta, Report};
use crate::synth::{self, Wiener};

pub const SUITES: [&str; 4] = ["recovery", "bound-chain", "ee-vs-rie", "complexity-sweep"];

/// Worker count from `SYSID_NUM_WORKERS`, else the available parallelism.
pub fn num_workers() -> usize {
    std::env::var("SYSID_NUM_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(num_workers()).build().expect("thread pool")
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Criterion {
    pub id: String,
    pub pass: bool,
    pub detail: String,
}

impl Criterion {
    fn new(id: &str, pass: bool, detail: String) -> Self {
        Self { id: id.into(), pass, detail }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TableOut {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TableOut {
    fn new(name: &str, headers: &[&str], rows: Vec<Vec<String>>) -> Self {
        Self { name: name.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.headers.join(",") + "\n";
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// One fitted model inside a suite.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Cell {
    pub name: String,
    pub fit: Option<FitReport>,
    pub validation: Option<ValidateReport>,
    /// Set when the cell failed outright.
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SuiteReport {
    pub meta: Meta,
    pub suite: String,
    pub pass: bool,
    pub criteria: Vec<Criterion>,
    pub tables: Vec<TableOut>,
    pub cells: Vec<Cell>,
    pub elapsed_s: f64,
}

impl Report for SuiteReport {
    fn render_text(&self) -> String {
        let mut s = meta_text(&self.meta);
        writeln!(s, "\nsuite {}: {} ({:.1}s)\n", self.suite, if self.pass { "PASS" } else { "FAIL" }, self.elapsed_s).unwrap();
        let rows: Vec<Vec<String>> = self
            .criteria
            .iter()
            .map(|c| vec![c.id.clone(), if c.pass { "PASS".into() } else { "FAIL".into() }, c.detail.clone()])
            .collect();
        s.push_str(&grid(&["criterion", "result", "detail"], &rows));
        for t in &self.tables {
            writeln!(s, "\n{}", t.name).unwrap();
            let h: Vec<&str> = t.headers.iter().map(String::as_str).collect();
            s.push_str(&grid(&h, &t.rows));
        }
        s
    }
}

impl SuiteReport {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

pub fn run_suite(name: &str, cfg: &FitConfig) -> Result<SuiteReport> {
    let t0 = Instant::now();
    let (criteria, tables, cells) = match name {
        "recovery" => recovery(cfg)?,
        "bound-chain" => bound_chain(cfg)?,
        "ee-vs-rie" => ee_vs_rie(cfg)?,
        "complexity-sweep" => complexity_sweep(cfg)?,
        _ => return Err(Error::Config(format!("unknown suite `{name}`; expected one of {SUITES:?}"))),
    };
    Ok(SuiteReport {
        meta: Meta::new("benchmark", cfg),
        suite: name.into(),
        pass: criteria.iter().all(|c| c.pass),
        criteria,
        tables,
        cells,
        elapsed_s: t0.elapsed().as_secs_f64(),
    })
}

pub fn cmd_benchmark(cfg: &FitConfig, out: &Path) -> Result<SuiteReport> {
    let report = run_suite(&cfg.suite, cfg)?;
    let name = report.suite.replace('-', "_");
    write_report(out, &name, &report)?;
    for t in &report.tables {
        let p = out.join(format!("{name}_{}.csv", t.name));
        std::fs::write(&p, t.to_csv()).map_err(|e| Error::io(&p, e))?;
    }
    Ok(report)
}

type SuiteParts = (Vec<Criterion>, Vec<TableOut>, Vec<Cell>);

fn table_of(data: &DataSet) -> Table {
    Table { t0: 0, u: data.u.clone(), y: data.y.clone(), x: data.x.clone() }
}

fn rel_ok(a: f64, b: f64, rel: f64) -> bool {
    a <= b + rel * (1.0 + b.abs())
}

/// Fits one configuration and validates the result. Errors are kept in the
/// cell so one failure does not sink the suite.
fn run_cell(name: String, cfg: &FitConfig, train: &Table, val: Option<&Table>) -> (Cell, Option<ModelFile>) {
    let res = prepare(cfg, train, val).and_then(|prep| fit_prepared(cfg, &prep));
    match res {
        Ok((fit, mf)) => {
            let validation = validate_model(&mf, cfg).map_err(|e| e.to_string());
            let (validation, error) = match validation {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e)),
            };
            (Cell { name, fit: Some(fit), validation, error }, Some(mf))
        }
        Err(e) => (Cell { name, fit: None, validation: None, error: Some(e.to_string()) }, None),
    }
}

/// Probe criterion over every cell that carries a metric.
fn probe_criterion(id: &str, cells: &[Cell]) -> Criterion {
    let mut checked = 0;
    let mut bad = Vec::new();
    for c in cells {
        let Some(p) = c.validation.as_ref().and_then(|v| v.probe.as_ref()) else { continue };
        checked += 1;
        if p.failed_simulations > 0
            || p.max_tail_fraction > crate::commands::PROBE_TAIL_MAX
            || p.bound_violations > 0
        {
            bad.push(c.name.clone());
        }
    }
    let missing: Vec<String> = cells
        .iter()
        .filter(|c| c.fit.as_ref().is_some_and(|f| f.metric != "none") && c.validation.as_ref().and_then(|v| v.probe.as_ref()).is_none())
        .map(|c| c.name.clone())
        .collect();
    let pass = bad.is_empty() && missing.is_empty() && checked > 0;
    Criterion::new(id, pass, format!("{checked} models probed, failing {bad:?}, unprobed {missing:?}"))
}

// ---------------------------------------------------------------- recovery

pub const RECOVERY_T: usize = 200;

/// Contracting planar cubic, sampled in range of its own basis.
pub fn recovery_data(seed: u64) -> Result<(ModelParameters, DataSet, DataSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = synth::contracting_cubic(&mut rng, 2, 1, 1, 0.7, 1e-3).stage("generator")?;
    let x0: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let u = synth::piecewise_input(&mut rng, RECOVERY_T + 1, 1, 1.5, 4);
    let train = synth::dataset_from_model(&truth, &x0, u).stage("generator")?;
    let xv: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let uv = synth::piecewise_input(&mut rng, RECOVERY_T + 1, 1, 1.0, 7);
    let val = synth::dataset_from_model(&truth, &xv, uv).stage("generator")?;
    Ok((truth, train, val))
}

pub fn recovery_config(base: &FitConfig) -> FitConfig {
    let d = synth::cubic_degrees();
    FitConfig {
        states: StateSource::File,
        input_lag: 1,
        deg_e: d.e,
        deg_fx: d.fx,
        deg_fu: d.fu,
        deg_gx: d.gx,
        deg_gu: d.gu,
        objective: "local_rie".into(),
        constraint: "sos".into(),
        ..base.clone()
    }
}

fn recovery(base: &FitConfig) -> Result<SuiteParts> {
    let (_, train, val) = recovery_data(base.seed)?;
    let cfg = recovery_config(base);
    let t0 = Instant::now();
    let (cell, _) = run_cell("cubic".into(), &cfg, &table_of(&train), Some(&table_of(&val)));
    let elapsed = t0.elapsed().as_secs_f64();
    let mut criteria = Vec::new();
    let fit = cell.fit.as_ref();
    // The slack bound is relative to the output energy of the data the
    // solver saw, which is the normalized set.
    let prep = prepare(&cfg, &table_of(&train), None)?;
    let energy: f64 = prep.train.y.iter().flatten().map(|v| v * v).sum();
    let slack = fit.and_then(|f| f.slack_sum);
    criteria.push(Criterion::new(
        "solver",
        fit.is_some_and(FitReport::solver_ok),
        format!("status {}", fit.map_or("-".into(), |f| f.status.clone())),
    ));
    criteria.push(Criterion::new(
        "slack",
        slack.is_some_and(|s| s <= 1e-6 * energy),
        format!("sum s_t = {} vs 1e-6 * sum |y|^2 = {:.3e}", fmt_opt(slack), 1e-6 * energy),
    ));
    let jt = fit.and_then(|f| f.train.j_perf);
    let jv = fit.and_then(|f| f.validation.as_ref().and_then(|v| v.j_perf));
    criteria.push(Criterion::new("j_perf_train", jt.is_some_and(|v| v <= 1.0), format!("{} <= 1.0", fmt_opt(jt))));
    criteria.push(Criterion::new("j_perf_validation", jv.is_some_and(|v| v <= 5.0), format!("{} <= 5.0", fmt_opt(jv))));
    criteria.push(Criterion::new("runtime", elapsed <= 120.0, format!("{elapsed:.2}s <= 120s")));
    criteria.push(probe_criterion("stability_probe", std::slice::from_ref(&cell)));
    let rows = vec![vec![
        cell.name.clone(),
        fmt_opt(slack),
        fmt_opt(jt),
        fmt_opt(jv),
        fit.map_or("-".into(), |f| f.status.clone()),
        format!("{elapsed:.2}"),
    ]];
    let tables = vec![TableOut::new("recovery", &["model", "slack_sum", "j_perf_train", "j_perf_val", "status", "seconds"], rows)];
    Ok((criteria, tables, vec![cell]))
}

// ------------------------------------------------------------- bound chain

pub const CHAIN_TOL: f64 = 1e-6;

/// Evaluated members of the bound chain for one draw.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ChainDraw {
    pub n: usize,
    pub horizon: usize,
    pub j_se: Option<f64>,
    pub j_lin: f64,
    pub j_l: f64,
    pub j_v: f64,
}

impl ChainDraw {
    pub fn ordered(&self) -> bool {
        let lower = self.j_se.map_or(self.j_lin, |s| s.max(self.j_lin));
        rel_ok(lower, self.j_l, CHAIN_TOL) && rel_ok(self.j_l, self.j_v, CHAIN_TOL)
    }

    /// `|J_se − J⁰| ≤ 1e-9 (1 + J_se)`.
    pub fn affine_identity(&self) -> bool {
        self.j_se.is_some_and(|s| (s - self.j_lin).abs() <= 1e-9 * (1.0 + s))
    }
}

fn gaussian_seq<R: Rng>(rng: &mut R, len: usize, dim: usize, sigma: f64) -> Vec<Vec<f64>> {
    (0..len).map(|_| (0..dim).map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).collect()).collect()
}

/// Random data that need not come from any model.
fn random_data<R: Rng>(rng: &mut R, n: usize, m: usize, p: usize, horizon: usize, u: Option<Vec<Vec<f64>>>) -> Result<DataSet> {
    let sx = rng.random_range(0.3..1.5);
    let x = gaussian_seq(rng, horizon + 1, n, sx);
    let y = gaussian_seq(rng, horizon + 1, p, 1.0);
    let u = u.unwrap_or_else(|| gaussian_seq(rng, horizon + 1, m, 1.0));
    DataSet::new(u, y, x).stage("data")
}

fn contracts_on(params: &ModelParameters, data: &DataSet) -> bool {
    data.x.iter().zip(&data.u).all(|(x, u)| contraction_block_value(params, x, u).is_ok_and(|b| min_eig(&b) > 0.0))
}

fn chain_values(params: &ModelParameters, data: &DataSet, with_se: bool) -> Result<ChainDraw> {
    Ok(ChainDraw {
        n: params.basis.n,
        horizon: data.horizon(),
        j_se: if with_se { Some(simulation_error(params, data).stage("simulate")?) } else { None },
        j_lin: linearized_sim_error(params, data).stage("linearized error")?,
        j_l: eval_lifted_bound(params, data).stage("lifted bound")?,
        j_v: local_rie_total(params, data).stage("local rie")?,
    })
}

/// Contracting cubic with a random metric scaling on random data.
pub fn chain_draw_nonlinear(seed: u64) -> Result<ChainDraw> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    let horizon = rng.random_range(10..=100);
    let radius = rng.random_range(0.3..0.9);
    let mut params = synth::contracting_cubic(&mut rng, n, 1, 1, radius, 1e-3).stage("generator")?;
    let data = random_data(&mut rng, n, 1, 1, horizon, None)?;
    // A rescaled metric is kept only where it still certifies every sample.
    let scaled = ModelParameters { p_mat: params.p_mat.scaled(rng.random_range(0.7..1.3)), ..params.clone() };
    if contracts_on(&scaled, &data) {
        params = scaled;
    }
    chain_values(&params, &data, false)
}

/// Stable linear dynamics plus random bilinear `x·u` terms in `f`, kept only
/// if a metric certifies it at every input level of the data.
pub fn chain_draw_affine(seed: u64) -> Result<Option<ChainDraw>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    let horizon = rng.random_range(10..=100);
    let degrees = Degrees { e: 1, fx: 1, fu: 2, gx: 1, gu: 1 };
    let basis = BasisSpec::new(n, 1, 1, degrees, false).stage("basis")?;
    let radius = rng.random_range(0.3..0.8);
    let a = synth::random_stable_matrix(&mut rng, n, radius);
    let b = synth::gaussian_mat(&mut rng, n, 1);
    let c = synth::gaussian_mat(&mut rng, 1, n);
    let mut params = synth::embed_linear(&basis, &a, &b, &c, &Mat::zeros(1, 1), 1e-3).stage("generator")?;
    let bilinear = rng.random_range(0.05..0.3);
    for i in 0..n {
        for j in 0..n {
            let mut mono = vec![0u8; n + 1];
            mono[j] = 1;
            mono[n] = 1;
            let v = bilinear * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            synth::add_coeff(&mut params, Part::F, i, &mono, v).stage("generator")?;
        }
    }
    let u = synth::piecewise_input(&mut rng, horizon + 1, 1, 1.0, 10);
    let data = random_data(&mut rng, n, 1, 1, horizon, Some(u))?;
    let points: Vec<(Vec<f64>, Vec<f64>)> = data.x.iter().cloned().zip(data.u.iter().cloned()).collect();
    match find_metric(&params, ConstraintMode::StateAffine, &points, 1e-3, &SolverOptions::default()).stage("metric")? {
        Some(p) => params.p_mat = p,
        None => return Ok(None),
    }
    chain_values(&params, &data, true).map(Some)
}

pub const CHAIN_NONLINEAR_DRAWS: usize = 50;
pub const CHAIN_AFFINE_DRAWS: usize = 25;

fn bound_chain(cfg: &FitConfig) -> Result<SuiteParts> {
    let base = cfg.seed.wrapping_mul(1_000_003);
    let nonlinear: Vec<Result<ChainDraw>> =
        pool().install(|| (0..CHAIN_NONLINEAR_DRAWS).into_par_iter().map(|k| chain_draw_nonlinear(base + k as u64)).collect());
    // Infeasible affine draws are skipped; seeds continue until 25 are kept.
    let mut affine: Vec<Result<ChainDraw>> = Vec::new();
    let mut next = 0u64;
    while affine.len() < CHAIN_AFFINE_DRAWS && next < 10 * CHAIN_AFFINE_DRAWS as u64 {
        let batch: Vec<Result<Option<ChainDraw>>> = pool()
            .install(|| (next..next + 8).into_par_iter().map(|k| chain_draw_affine(base + 500_000 + k)).collect());
        next += 8;
        for r in batch {
            if affine.len() == CHAIN_AFFINE_DRAWS {
                break;
            }
            match r {
                Ok(Some(d)) => affine.push(Ok(d)),
                Ok(None) => {}
                Err(e) => affine.push(Err(e)),
            }
        }
    }
    let row = |k: usize, r: &Result<ChainDraw>| -> Vec<String> {
        match r {
            Ok(d) => vec![
                k.to_string(),
                d.n.to_string(),
                d.horizon.to_string(),
                fmt_opt(d.j_se),
                fmt_opt(Some(d.j_lin)),
                fmt_opt(Some(d.j_l)),
                fmt_opt(Some(d.j_v)),
                if d.ordered() { "ok".into() } else { "VIOLATED".into() },
            ],
            Err(e) => vec![k.to_string(), "-".into(), "-".into(), "-".into(), "-".into(), "-".into(), "-".into(), format!("error: {e}")],
        }
    };
    let headers = ["draw", "n", "T", "J_se", "J_lin", "J_L", "J_V", "order"];
    let ordered = |v: &[Result<ChainDraw>]| v.iter().filter(|r| r.as_ref().is_ok_and(ChainDraw::ordered)).count();
    let nl_ok = ordered(&nonlinear);
    let af_ok = ordered(&affine);
    let id_ok = affine.iter().filter(|r| r.as_ref().is_ok_and(ChainDraw::affine_identity)).count();
    let criteria = vec![
        Criterion::new(
            "nonlinear_chain",
            nl_ok == CHAIN_NONLINEAR_DRAWS,
            format!("{nl_ok}/{CHAIN_NONLINEAR_DRAWS} draws with J_lin <= J_L <= J_V (tol 1e-6 relative)"),
        ),
        Criterion::new(
            "affine_chain",
            af_ok == CHAIN_AFFINE_DRAWS,
            format!("{af_ok}/{CHAIN_AFFINE_DRAWS} state-affine draws with J_se <= J_L <= J_V"),
        ),
        Criterion::new(
            "affine_identity",
            id_ok == CHAIN_AFFINE_DRAWS,
            format!("{id_ok}/{CHAIN_AFFINE_DRAWS} draws with |J_se - J_lin| <= 1e-9 (1 + J_se)"),
        ),
    ];
    let tables = vec![
        TableOut::new("nonlinear", &headers, nonlinear.iter().enumerate().map(|(k, r)| row(k, r)).collect()),
        TableOut::new("state_affine", &headers, affine.iter().enumerate().map(|(k, r)| row(k, r)).collect()),
    ];
    Ok((criteria, tables, Vec::new()))
}

// --------------------------------------------------------------- EE vs RIE

/// Saturating Wiener system with train and held-out input amplitudes.
pub struct WienerData {
    pub system: Wiener,
    pub train: Table,
    pub validation: Table,
}

pub const WIENER_TRAIN_AMPS: [f64; 2] = [0.5, 2.0];
pub const WIENER_VAL_AMP: f64 = 1.2;

pub fn wiener_data(seed: u64) -> WienerData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(11));
    let system = Wiener::random(&mut rng, 2, 0.8, 1.0);
    let mut u = Vec::new();
    for amp in WIENER_TRAIN_AMPS {
        u.extend(synth::piecewise_input(&mut rng, 150, 1, amp, 5));
    }
    let y = system.output(&u);
    let uv = synth::piecewise_input(&mut rng, 300, 1, WIENER_VAL_AMP, 5);
    let yv = system.output(&uv);
    WienerData {
        system,
        train: Table { t0: 0, u, y, x: Vec::new() },
        validation: Table { t0: 0, u: uv, y: yv, x: Vec::new() },
    }
}

/// Output-history surrogate with `lag` outputs and inputs; `e` and the state
/// part of `f` get degree `d`, everything else stays affine.
pub fn wiener_config(base: &FitConfig, lag: usize, d: u32, objective: &str) -> FitConfig {
    let constraint = if objective == "ee" { "wellposedness" } else { "sos" };
    FitConfig {
        states: StateSource::History,
        lag,
        input_lag: lag,
        deg_e: d,
        deg_fx: d,
        deg_fu: 1,
        deg_gx: 1,
        deg_gu: 1,
        objective: objective.into(),
        constraint: constraint.into(),
        normalize: true,
        ..base.clone()
    }
}

fn cell_row(c: &Cell, method: &str, d: u32) -> Vec<String> {
    let f = c.fit.as_ref();
    let v = c.validation.as_ref();
    vec![
        method.into(),
        d.to_string(),
        f.map_or("-".into(), |f| f.status.clone()),
        fmt_opt(f.and_then(|f| f.train.j_perf)),
        fmt_opt(f.and_then(|f| f.validation.as_ref().and_then(|v| v.j_perf))),
        f.map_or("-".into(), |f| f.metric.clone()),
        match v {
            Some(v) if v.pass => "PASS".into(),
            Some(_) => "FAIL".into(),
            None => "ERROR".into(),
        },
        if method == "ee" && !v.is_some_and(|v| v.pass) { "FLAG".into() } else { String::new() },
        format!("{:.2}", f.map_or(0.0, |f| f.timings.solve_s)),
    ]
}

pub const SWEEP_DEGREES: [u32; 2] = [1, 3];

fn ee_vs_rie(cfg: &FitConfig) -> Result<SuiteParts> {
    let w = wiener_data(cfg.seed);
    let jobs: Vec<(&str, u32)> = ["ee", "local_rie"].iter().flat_map(|m| SWEEP_DEGREES.map(|d| (*m, d))).collect();
    let cells: Vec<Cell> = pool().install(|| {
        jobs.par_iter()
            .map(|&(method, d)| {
                let c = wiener_config(cfg, 2, d, method);
                run_cell(format!("{method}_d{d}"), &c, &w.train, Some(&w.validation)).0
            })
            .collect()
    });
    let rows: Vec<Vec<String>> = jobs.iter().zip(&cells).map(|(&(m, d), c)| cell_row(c, m, d)).collect();
    let rie: Vec<&Cell> = cells.iter().filter(|c| c.name.starts_with("local_rie")).collect();
    let all_pass = rie.iter().all(|c| c.validation.as_ref().is_some_and(|v| v.pass));
    let jval = |name: &str| {
        cells.iter().find(|c| c.name == name).and_then(|c| c.fit.as_ref()).and_then(|f| f.validation.as_ref()).and_then(|v| v.j_perf)
    };
    let (j1, j3) = (jval("local_rie_d1"), jval("local_rie_d3"));
    let flagged: Vec<String> = jobs
        .iter()
        .zip(&cells)
        .filter(|((m, _), c)| *m == "ee" && !c.validation.as_ref().is_some_and(|v| v.pass))
        .map(|(_, c)| c.name.clone())
        .collect();
    let criteria = vec![
        Criterion::new("rie_validation", all_pass, format!("{} local RIE models, all must PASS validation", rie.len())),
        Criterion::new(
            "rie_degree_trend",
            matches!((j1, j3), (Some(a), Some(b)) if b <= a),
            format!("validation J_perf d=3 {} <= d=1 {}", fmt_opt(j3), fmt_opt(j1)),
        ),
        Criterion::new("ee_flags", true, format!("EE models failing validation: {flagged:?}")),
        probe_criterion("stability_probe", &rie.iter().map(|c| (*c).clone()).collect::<Vec<_>>()),
    ];
    let tables = vec![TableOut::new(
        "ee_vs_rie",
        &["method", "degree", "status", "j_perf_train", "j_perf_val", "metric", "validate", "flag", "solve_s"],
        rows,
    )];
    Ok((criteria, tables, cells))
}

// -------------------------------------------------------- complexity sweep

pub const SWEEP_LAGS: [usize; 3] = [1, 2, 3];
pub const SWEEP_GRID_DEGREES: [u32; 3] = [1, 2, 3];

fn complexity_sweep(cfg: &FitConfig) -> Result<SuiteParts> {
    let w = wiener_data(cfg.seed);
    let jobs: Vec<(usize, u32)> = SWEEP_LAGS.iter().flat_map(|&n| SWEEP_GRID_DEGREES.map(|d| (n, d))).collect();
    let cells: Vec<Cell> = pool().install(|| {
        jobs.par_iter()
            .map(|&(n, d)| {
                let c = wiener_config(cfg, n, d, "local_rie");
                run_cell(format!("n{n}_d{d}"), &c, &w.train, Some(&w.validation)).0
            })
            .collect()
    });
    let rows: Vec<Vec<String>> = jobs
        .iter()
        .zip(&cells)
        .map(|(&(n, d), c)| {
            let mut r = cell_row(c, "local_rie", d);
            r.insert(1, n.to_string());
            r.pop();
            r.remove(8);
            r.push(format!("{:.2}", c.fit.as_ref().map_or(0.0, |f| f.timings.solve_s)));
            r
        })
        .collect();
    let complete = cells.iter().filter(|c| c.fit.is_some()).count();
    let criteria = vec![Criterion::new(
        "grid_complete",
        complete == jobs.len(),
        format!("{complete}/{} (n, d) cells produced a fit report", jobs.len()),
    )];
    let tables = vec![TableOut::new(
        "complexity",
        &["method", "n", "degree", "status", "j_perf_train", "j_perf_val", "metric", "validate", "solve_s"],
        rows,
    )];
    Ok((criteria, tables, cells))
}
