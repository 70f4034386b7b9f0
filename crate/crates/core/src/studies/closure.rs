use serde::{Deserialize, Serialize};

use super::{
    cell_seed, collect, grid_json, non_increasing_within, require_ladder, Check, DynamicsConfig, StudyReport, Table,
};
use crate::error::{Error, Result};
use crate::fields::{empirical_field, sobolev_norm, weighted_field, FieldWeight, Norm};
use crate::kernels::KernelParams;
use crate::particles::{burn_in_particles, step_interacting, MeanFieldLaw, NoiseStreams, ParticleEnsemble};
use crate::potential::PotentialSpec;
use crate::rng::derive_seed;
use crate::stats::{mean, std_error};
use crate::vfp::{InitialLaw, VfpConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct J2ClosureConfig {
    /// Values of `σ²/(2γ)`; `σ` is derived at fixed `γ`.
    pub temperatures: Vec<f64>,
    pub n_particles: usize,
    pub epsilon: f64,
    pub replicas: usize,
    pub snapshot_every: usize,
    pub min_grid: usize,
    /// `sigma` in here is ignored and replaced per temperature.
    pub dynamics: DynamicsConfig,
    pub potential: PotentialSpec,
    pub initial: InitialLaw,
    pub vfp: VfpConfig,
}

impl Default for J2ClosureConfig {
    fn default() -> Self {
        Self {
            temperatures: vec![1.0, 0.25, 0.0625],
            n_particles: 1024,
            epsilon: 0.2,
            replicas: 32,
            snapshot_every: 10,
            min_grid: 64,
            dynamics: DynamicsConfig::default(),
            potential: PotentialSpec::cosine(),
            initial: InitialLaw::default(),
            vfp: VfpConfig::default(),
        }
    }
}

/// `‖j₂ − c ∂ρ‖_{L²} / ‖∂ρ‖_{L²}` for the ensemble at temperature `c`.
pub fn closure_error(ens: &ParticleEnsemble, kernel: &KernelParams, temperature: f64) -> Result<f64> {
    let j2 = empirical_field(ens, kernel, FieldWeight::J2)?;
    let drho = weighted_field(&ens.q, &vec![1.0; ens.len()], kernel, 1)?;
    let diff = j2.map2(&drho, |a, b| a - temperature * b);
    let denom = sobolev_norm(&drho, Norm::L(2.0))?;
    if !(denom > 0.0) {
        return Err(Error::NonFinite("closure error with flat density".into()));
    }
    Ok(sobolev_norm(&diff, Norm::L(2.0))? / denom)
}

/// Relative closure error, averaged over snapshots in time, across a
/// temperature ladder.
pub fn run_j2_closure_study(cfg: &J2ClosureConfig, seed: u64) -> Result<StudyReport> {
    require_ladder(cfg.temperatures.len(), 2, "temperatures")?;
    require_ladder(cfg.replicas, 2, "replicas")?;
    cfg.potential.validate()?;
    cfg.initial.validate()?;
    if cfg.temperatures.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::Config("temperatures must be positive".into()));
    }
    let kernel = KernelParams::admissible(cfg.epsilon, cfg.min_grid)?;
    let every = cfg.snapshot_every.max(1);
    let mut table = Table::new(&["temperature", "sigma", "error_mean", "error_stderr"]);
    let (mut errs, mut ses) = (Vec::new(), Vec::new());
    for (cell, &c) in cfg.temperatures.iter().enumerate() {
        let mut dynamics = cfg.dynamics.clone();
        dynamics.sigma = (2.0 * dynamics.gamma * c).sqrt();
        let base = dynamics.params(cfg.n_particles, cfg.epsilon, 1.0, seed);
        let law = MeanFieldLaw::compute(&base, &cfg.initial, &cfg.potential, &cfg.vfp)?;
        let steps = base.steps();
        let per = collect(crate::par_map(cfg.replicas, |r| -> Result<f64> {
            let rs = cell_seed(seed, "j2_closure", cell as u64, r as u64);
            let params = dynamics.params(cfg.n_particles, cfg.epsilon, 1.0, rs);
            let mut ens = burn_in_particles(&params, &cfg.initial, &law.burn_in, rs)?;
            let mut noise = NoiseStreams::new(derive_seed(rs, &[1]), cfg.n_particles);
            let mut db = Vec::new();
            let mut samples = Vec::new();
            for step in 0..=steps {
                if step % every == 0 || step == steps {
                    samples.push(closure_error(&ens, &kernel, c)?);
                }
                if step < steps {
                    noise.draw(params.dt, &mut db);
                    step_interacting(&mut ens, &params, &cfg.potential, &db)?;
                }
            }
            Ok(mean(&samples))
        }))?;
        let (m, se) = (mean(&per), std_error(&per));
        table.push(vec![c, dynamics.sigma, m, se]);
        errs.push(m);
        ses.push(se);
    }
    // order by decreasing temperature before testing monotonicity
    let mut idx: Vec<usize> = (0..errs.len()).collect();
    idx.sort_by(|&a, &b| cfg.temperatures[b].total_cmp(&cfg.temperatures[a]));
    let e: Vec<f64> = idx.iter().map(|&i| errs[i]).collect();
    let s: Vec<f64> = idx.iter().map(|&i| ses[i]).collect();
    let checks = vec![Check::new(
        "non_increasing_with_temperature",
        e.last().copied().unwrap_or(f64::NAN),
        "error(c_next) <= error(c) + 2 sqrt(se^2 + se_next^2) as c decreases",
        non_increasing_within(&e, &s),
    )];
    Ok(StudyReport::new("j2_closure", grid_json(cfg), table, Vec::new(), checks))
}
