use std::path::Path;

use dklab_core::particles::{burn_in_particles, run_coupled, MeanFieldLaw};
use dklab_core::rng::{derive_seed, stream_rng};
use dklab_core::spde::{convolution_bounds_check, total_mass, SpdeSolver, Status};
use dklab_core::studies::{run_study, StudyReport, Table, Verdict};
use serde_json::{json, Value};

use crate::artifacts::{self, Artifact};
use crate::config::RunConfig;
use crate::CliError;

pub struct Outcome {
    pub dir: std::path::PathBuf,
    pub verdict: Option<Verdict>,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serialisable")
}

/// Coupled interacting and mean-field particles from a warm start.
pub fn simulate(cfg: &RunConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let mut sim = cfg.simulate.clone().unwrap_or_default();
    sim.model.seed = seed;
    sim.model.validate()?;
    let law = MeanFieldLaw::compute(&sim.model, &sim.initial, &sim.potential, &sim.vfp)?;
    let start = burn_in_particles(&sim.model, &sim.initial, &law.burn_in, seed)?;
    let traj = run_coupled(
        &sim.model,
        &sim.potential,
        &start,
        &law.main,
        derive_seed(seed, &[1]),
        sim.snapshot_every,
    )?;
    let mut table = Table::new(&["replica", "t", "i", "q", "p", "q_meanfield", "p_meanfield"]);
    for row in traj.rows() {
        let mut r = vec![0.0];
        r.extend_from_slice(&row);
        table.push(r);
    }
    let rms: Vec<f64> = traj.error_moments(2).iter().map(|m| m.sqrt()).collect();
    let times: Vec<f64> = traj.interacting.iter().map(|e| e.t).collect();
    let body = json!({
        "n_particles": sim.model.n_particles,
        "snapshot_times": times,
        "coupled_rms_error": rms,
        "max_coupled_rms_error": rms.iter().copied().fold(0.0, f64::max),
        "vfp_final_mass": law.f_end.mass(),
        "vfp_boundary_mass": law.f_end.boundary_mass(),
    });
    let resolved = to_value(&sim);
    let (dir, _) = artifacts::write(
        out,
        &Artifact {
            kind: "simulate",
            command: "simulate",
            seed,
            config: &resolved,
            table: &table,
            body: &body,
            runtime_seconds: None,
        },
    )?;
    Ok(Outcome { dir, verdict: None })
}

/// One regularised SPDE trajectory with its stopping record.
pub fn spde(cfg: &RunConfig, seed: u64, out: &Path) -> Result<Outcome, CliError> {
    let mut run = cfg.spde.clone().unwrap_or_default();
    run.model.seed = seed;
    let solver = SpdeSolver::new(&run.model)?;
    let g = solver.geometry.clone();
    let mut rng = stream_rng(seed, 0);
    let (mut x, mut status) = solver.start();
    let every = run.snapshot_every.max(1);
    let mut table = Table::new(&["t", "x", "rho", "j"]);
    let mut states = vec![x.clone()];
    let push = |table: &mut Table, s: &dklab_core::spde::SpectralState| {
        let (rho, j) = (s.rho_grid(&g), s.j_grid(&g));
        for i in 0..g.n_grid() {
            table.push(vec![s.t, g.x(i), rho[i], j[i]]);
        }
    };
    push(&mut table, &x);
    let mass0 = total_mass(&x);
    let steps = solver.steps();
    for n in 0..steps {
        solver.step_mild(&mut x, &mut status, &mut rng)?;
        if (n + 1) % every == 0 || n + 1 == steps || x.status != Status::Running {
            push(&mut table, &x);
        }
        if x.status == Status::Running {
            states.push(x.clone());
        } else {
            break;
        }
    }
    let conv = convolution_bounds_check(&states, &run.model.potential, &g)?;
    let body = json!({
        "final_time": x.t,
        "status": to_value(&x.status),
        "tau_k_time": status.tau_k_time,
        "mu_delta_time": status.mu_delta_time,
        "survived": status.survived(),
        "final_norm": x.norm_h1(),
        "initial_mass": mass0,
        "final_mass": total_mass(&x),
        "min_rho": status.min_rho_series.iter().map(|v| v.1).fold(f64::INFINITY, f64::min),
        "convolution_bounds": to_value(&conv),
    });
    let resolved = to_value(&run);
    let (dir, _) = artifacts::write(
        out,
        &Artifact {
            kind: "spde",
            command: "spde",
            seed,
            config: &resolved,
            table: &table,
            body: &body,
            runtime_seconds: None,
        },
    )?;
    Ok(Outcome { dir, verdict: None })
}

pub fn study(name: &str, cfg: &RunConfig, seed: u64, out: &Path) -> Result<(Outcome, StudyReport), CliError> {
    let block = cfg.studies.get(name).cloned().unwrap_or(Value::Null);
    let (report, resolved) = run_study(name, block, seed)?;
    let body = to_value(&report);
    let (dir, _) = artifacts::write(
        out,
        &Artifact {
            kind: name,
            command: &format!("study {name}"),
            seed,
            config: &resolved,
            table: &report.raw_table,
            body: &body,
            runtime_seconds: Some(report.runtime_seconds),
        },
    )?;
    Ok((
        Outcome {
            dir,
            verdict: Some(report.verdict),
        },
        report,
    ))
}

/// Latest run of every study under `out`, rolled up into `summary.json`.
pub fn report(out: &Path) -> Result<(std::path::PathBuf, Vec<Value>), CliError> {
    let mut entries = Vec::new();
    let dirs = match std::fs::read_dir(out) {
        Ok(d) => d,
        Err(_) => return Err(CliError::Runtime(format!("no studies found under {}", out.display()))),
    };
    let mut study_dirs: Vec<_> = dirs.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
    study_dirs.sort();
    for sd in study_dirs {
        let mut runs: Vec<_> = std::fs::read_dir(&sd)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.join("report.json").is_file())
            .collect();
        runs.sort();
        let Some(latest) = runs.last() else { continue };
        let text = std::fs::read_to_string(latest.join("report.json"))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", latest.display())))?;
        if !v["command"].as_str().unwrap_or("").starts_with("study ") {
            continue;
        }
        let r = &v["report"];
        entries.push(json!({
            "study": r["study_name"],
            "run": latest.strip_prefix(out).unwrap_or(latest).display().to_string(),
            "verdict": r["verdict"],
            "fitted_slope": r["fitted_slope"],
            "slope_stderr": r["slope_stderr"],
            "seed": v["seed"],
            "code_version": v["code_version"],
            "content_sha256": v["content_sha256"],
        }));
    }
    if entries.is_empty() {
        return Err(CliError::Runtime(format!("no studies found under {}", out.display())));
    }
    let path = out.join("summary.json");
    let mut s = serde_json::to_string_pretty(&json!({ "studies": entries })).expect("json");
    s.push('\n');
    std::fs::write(&path, s)?;
    Ok((path, entries))
}
