//! fit, simulate, validate and benchmark through the library entry points and
//! the binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use sysid::bench::{cmd_benchmark, recovery_config, recovery_data};
use sysid::commands::{cmd_fit, cmd_simulate, cmd_validate};
use sysid::config::FitConfig;
use sysid::csvio::{save_table, Table};
use sysid::modelfile::{self, ModelFile};
use sysid::synth::{add_coeff, cubic_degrees};
use sysid_core::data::{DataSet, Scale};
use sysid_core::linalg::SymMat;
use sysid_core::model::{BasisSpec, Degrees, ModelParameters, Part};
use tempfile::tempdir;

fn write_data(path: &Path, d: &DataSet) {
    save_table(path, &Table { t0: 0, u: d.u.clone(), y: d.y.clone(), x: d.x.clone() }).unwrap();
}

/// Recovery data written to `dir`, with a matching config.
fn setup(dir: &Path, objective: &str, constraint: &str) -> FitConfig {
    let (_, train, val) = recovery_data(0).unwrap();
    write_data(&dir.join("train.csv"), &train);
    write_data(&dir.join("val.csv"), &val);
    FitConfig {
        data: Some(dir.join("train.csv")),
        validation_data: Some(dir.join("val.csv")),
        model: dir.join("model.txt"),
        objective: objective.into(),
        constraint: constraint.into(),
        ..recovery_config(&FitConfig::default())
    }
}

#[test]
fn equation_error_fit_is_exact_in_range() {
    let dir = tempdir().unwrap();
    let cfg = setup(dir.path(), "ee", "wellposedness");
    let r = cmd_fit(&cfg, dir.path()).unwrap();
    assert_eq!(r.status, "Optimal");
    let j = r.train.j_ee.unwrap();
    assert!(j <= 1e-10, "J_EE {j}");
    assert!(dir.path().join("model.txt").exists());
    assert!(dir.path().join("fit_report.json").exists());
    assert!(dir.path().join("fit_report.txt").exists());
}

#[test]
fn fit_simulate_validate() {
    let dir = tempdir().unwrap();
    let cfg = setup(dir.path(), "local_rie", "sos");
    let fit = cmd_fit(&cfg, dir.path()).unwrap();
    assert_eq!(fit.exit_code(), 0);
    assert_eq!(fit.metric, "fit");
    assert_eq!(fit.bound_chain_consistent, Some(true));

    let sim_cfg = FitConfig { data: cfg.validation_data.clone(), ..cfg.clone() };
    let out1 = dir.path().join("sim1");
    let out2 = dir.path().join("sim2");
    let s1 = cmd_simulate(&sim_cfg, &out1).unwrap();
    assert!(s1.j_perf <= 5.0, "J_perf {}", s1.j_perf);
    assert_eq!(s1.samples, 201);
    cmd_simulate(&sim_cfg, &out2).unwrap();
    let t1 = fs::read(out1.join("trajectory.csv")).unwrap();
    assert_eq!(t1, fs::read(out2.join("trajectory.csv")).unwrap());

    let v1 = cmd_validate(&cfg, &out1).unwrap();
    assert!(v1.pass, "{:?}", v1.reasons);
    assert_eq!(v1.exit_code(), 0);
    cmd_validate(&cfg, &out2).unwrap();
    assert_eq!(
        fs::read(out1.join("validate_report.json")).unwrap(),
        fs::read(out2.join("validate_report.json")).unwrap()
    );
}

#[test]
fn simulate_round_trip_of_generator() {
    let dir = tempdir().unwrap();
    let (truth, train, _) = recovery_data(2).unwrap();
    write_data(&dir.path().join("train.csv"), &train);
    let mf = ModelFile {
        params: truth,
        has_metric: true,
        lag: 0,
        input_lag: 1,
        scale: Scale::identity(1, 1, 2),
        x_box: train.state_box(),
        u_box: train.input_box(),
    };
    let model = dir.path().join("truth.txt");
    modelfile::save(&model, &mf).unwrap();
    let cfg = FitConfig { data: Some(dir.path().join("train.csv")), model, ..recovery_config(&FitConfig::default()) };
    let r = cmd_simulate(&cfg, dir.path()).unwrap();
    assert!(r.j_perf <= 1e-3, "J_perf {}", r.j_perf);
    let traj = sysid::csvio::load_csv(&r.trajectory_file).unwrap();
    assert_eq!(traj.y, train.y);
}

#[test]
fn simulate_rejects_wrong_dimensions() {
    let dir = tempdir().unwrap();
    let cfg = setup(dir.path(), "ee", "wellposedness");
    cmd_fit(&cfg, dir.path()).unwrap();
    let wide = DataSet::new(vec![vec![0.0, 1.0]; 5], vec![vec![0.0]; 5], vec![vec![0.0, 0.0]; 5]).unwrap();
    write_data(&dir.path().join("wide.csv"), &wide);
    let bad = FitConfig { data: Some(dir.path().join("wide.csv")), ..cfg };
    let err = cmd_simulate(&bad, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
}

/// `e(x) = x`, `x⁺ = x`: marginally stable, never contracting.
fn identity_model() -> ModelFile {
    let basis = BasisSpec::new(2, 1, 1, Degrees::linear(), false).unwrap();
    let mut params = ModelParameters::zeros(basis, 1e-3).unwrap();
    for i in 0..2 {
        let mut mono = [0u8; 3];
        mono[i] = 1;
        add_coeff(&mut params, Part::E, i, &mono[..2], 1.0).unwrap();
        add_coeff(&mut params, Part::F, i, &mono, 1.0).unwrap();
    }
    add_coeff(&mut params, Part::G, 0, &[1, 0, 0], 1.0).unwrap();
    params.p_mat = SymMat::identity(2);
    ModelFile {
        params,
        has_metric: true,
        lag: 0,
        input_lag: 1,
        scale: Scale::identity(1, 1, 2),
        x_box: vec![(-1.0, 1.0); 2],
        u_box: vec![(-1.0, 1.0)],
    }
}

#[test]
fn validate_fails_identity_dynamics() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("id.txt");
    modelfile::save(&path, &identity_model()).unwrap();
    let cfg = FitConfig { model: path, ..FitConfig::default() };
    let r = cmd_validate(&cfg, dir.path()).unwrap();
    assert!(!r.pass);
    assert_eq!(r.exit_code(), 2);
    assert!(!r.reasons.is_empty());
}

#[test]
fn benchmark_report_schema() {
    let dir = tempdir().unwrap();
    let cfg = FitConfig { suite: "recovery".into(), ..FitConfig::default() };
    let r = cmd_benchmark(&cfg, dir.path()).unwrap();
    assert!(r.pass);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("recovery.json")).unwrap()).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
    for k in ["meta", "suite", "pass", "criteria", "tables", "cells", "elapsed_s"] {
        assert!(keys.contains(&k), "missing {k} in {keys:?}");
    }
    for k in ["tool", "version", "command", "config_hash", "seed"] {
        assert!(json["meta"].get(k).is_some(), "meta.{k}");
    }
    for c in json["criteria"].as_array().unwrap() {
        assert!(c["id"].is_string() && c["pass"].is_boolean() && c["detail"].is_string());
    }
    assert!(dir.path().join("recovery.txt").exists());
    assert!(FitConfig::default().suite == "recovery");
    let bogus = FitConfig { suite: "nope".into(), ..FitConfig::default() };
    assert_eq!(cmd_benchmark(&bogus, dir.path()).unwrap_err().exit_code(), 4);
}

fn sysid() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sysid"))
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempdir().unwrap();
    assert_eq!(code(sysid().arg("--help")), 0);
    assert_eq!(code(sysid().arg("bogus")), 4);
    assert_eq!(code(sysid().args(["fit", "--config", "/nonexistent/x.cfg"])), 4);

    let cfg_path = dir.path().join("bad.cfg");
    fs::write(&cfg_path, "unknown_key = 1\n").unwrap();
    assert_eq!(code(sysid().arg("fit").arg("--config").arg(&cfg_path)), 4);

    let model = dir.path().join("id.txt");
    modelfile::save(&model, &identity_model()).unwrap();
    let cfg_path = dir.path().join("v.cfg");
    fs::write(&cfg_path, "model = id.txt\n").unwrap();
    let out: PathBuf = dir.path().join("out");
    assert_eq!(code(sysid().arg("validate").arg("--config").arg(&cfg_path).arg("--out").arg(&out)), 2);
    assert!(out.join("validate_report.json").exists());
}

#[test]
fn cli_fit_end_to_end() {
    let dir = tempdir().unwrap();
    let (_, train, _) = recovery_data(1).unwrap();
    write_data(&dir.path().join("train.csv"), &train);
    let d = cubic_degrees();
    let cfg = format!(
        "data = train.csv\nstates = file\ndeg_e = {}\ndeg_fx = {}\ndeg_fu = {}\ndeg_gx = {}\ndeg_gu = {}\n",
        d.e, d.fx, d.fu, d.gx, d.gu
    );
    let cfg_path = dir.path().join("fit.cfg");
    fs::write(&cfg_path, cfg).unwrap();
    let out = dir.path().join("out");
    let o = sysid().arg("fit").arg("--config").arg(&cfg_path).arg("--out").arg(&out).arg("--seed").arg("3").output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("fit_report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "Optimal");
    assert_eq!(report["meta"]["seed"], 3);
    assert!(out.join("model.txt").exists());
}
