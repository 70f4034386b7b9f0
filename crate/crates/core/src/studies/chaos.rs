use serde::{Deserialize, Serialize};

use super::{cell_seed, collect, grid_json, require_ladder, Check, DynamicsConfig, NamedFit, StudyReport, Table};
use crate::error::Result;
use crate::particles::{burn_in_particles, chaos_from_moments, run_coupled, MeanFieldLaw};
use crate::potential::PotentialSpec;
use crate::rng::derive_seed;
use crate::stats::loglog_fit;
use crate::vfp::{InitialLaw, VfpConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosStudyConfig {
    pub n_ladder: Vec<usize>,
    pub replicas: usize,
    /// Error moments; the first one drives the verdict.
    pub alphas: Vec<u32>,
    pub dynamics: DynamicsConfig,
    pub potential: PotentialSpec,
    pub initial: InitialLaw,
    pub vfp: VfpConfig,
}

impl Default for ChaosStudyConfig {
    fn default() -> Self {
        Self {
            n_ladder: vec![64, 128, 256, 512, 1024, 2048],
            replicas: 50,
            alphas: vec![2, 4],
            dynamics: DynamicsConfig::default(),
            potential: PotentialSpec::cosine(),
            initial: InitialLaw::default(),
            vfp: VfpConfig::default(),
        }
    }
}

/// Coupled interacting/mean-field error `sup_t (E|·|^α)^{1/α}` per `N`.
pub fn run_chaos_study(cfg: &ChaosStudyConfig, seed: u64) -> Result<StudyReport> {
    require_ladder(cfg.n_ladder.len(), 4, "N ladder points")?;
    require_ladder(cfg.replicas, 2, "replicas")?;
    require_ladder(cfg.alphas.len(), 1, "alphas")?;
    cfg.potential.validate()?;
    cfg.initial.validate()?;
    let base = cfg.dynamics.params(cfg.n_ladder[0], 1.0, 1.0, seed);
    let law = MeanFieldLaw::compute(&base, &cfg.initial, &cfg.potential, &cfg.vfp)?;

    let mut table = Table::new(&["n_particles", "alpha", "error"]);
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); cfg.alphas.len()];
    for &n in &cfg.n_ladder {
        let moments = collect(crate::par_map(cfg.replicas, |r| -> Result<Vec<Vec<f64>>> {
            let rs = cell_seed(seed, "chaos", n as u64, r as u64);
            let params = cfg.dynamics.params(n, 1.0, 1.0, rs);
            let start = burn_in_particles(&params, &cfg.initial, &law.burn_in, rs)?;
            let traj = run_coupled(&params, &cfg.potential, &start, &law.main, derive_seed(rs, &[1]), 1)?;
            Ok(cfg.alphas.iter().map(|&a| traj.error_moments(a)).collect())
        }))?;
        for (ai, &alpha) in cfg.alphas.iter().enumerate() {
            let per: Vec<Vec<f64>> = moments.iter().map(|m| m[ai].clone()).collect();
            let e = chaos_from_moments(&per, alpha)?;
            table.push(vec![n as f64, alpha as f64, e]);
            errors[ai].push(e);
        }
    }

    let ns: Vec<f64> = cfg.n_ladder.iter().map(|&n| n as f64).collect();
    let mut fits = Vec::new();
    let mut checks = Vec::new();
    if errors.iter().flatten().all(|&e| e == 0.0) {
        checks.push(Check::new(
            "errors_vanish",
            0.0,
            "all coupled errors exactly zero (flat potential)",
            true,
        ));
    } else if errors.iter().flatten().any(|&e| e == 0.0) {
        checks.push(Check::undecided("slope_window", "zero error at some N; slope undefined"));
    } else {
        for (ai, &alpha) in cfg.alphas.iter().enumerate() {
            fits.push(NamedFit::new(format!("error_alpha{alpha}_vs_n"), loglog_fit(&ns, &errors[ai])));
        }
        let f = &fits[0].fit;
        checks.push(Check::new(
            "slope_window",
            f.slope,
            "slope +- 2 se meets [-0.65, -0.35]",
            f.meets(-0.65, -0.35),
        ));
    }
    Ok(StudyReport::new("chaos", grid_json(cfg), table, fits, checks))
}
