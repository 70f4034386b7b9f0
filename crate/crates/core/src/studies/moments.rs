use serde::{Deserialize, Serialize};

use super::{cell_seed, collect, grid_json, require_ladder, Check, DynamicsConfig, NamedFit, StudyReport, Table};
use crate::error::Result;
use crate::fields::{empirical_field, sobolev_norm, FieldWeight, Norm};
use crate::kernels::KernelParams;
use crate::particles::{burn_in_particles, step_interacting, MeanFieldLaw, ModelParams, NoiseStreams};
use crate::potential::PotentialSpec;
use crate::rng::derive_seed;
use crate::stats::{loglog_fit, mean};
use crate::vfp::{InitialLaw, VfpConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentStudyConfig {
    /// Nominal widths; each is paired with `N = round(ε^{−θ})`.
    pub eps_ladder: Vec<f64>,
    pub theta: f64,
    pub replicas: usize,
    /// Number of equal time intervals between snapshots over `[0, T]`.
    pub snapshot_intervals: usize,
    pub min_grid: usize,
    pub dynamics: DynamicsConfig,
    pub potential: PotentialSpec,
    pub initial: InitialLaw,
    pub vfp: VfpConfig,
}

impl Default for MomentStudyConfig {
    fn default() -> Self {
        Self {
            eps_ladder: vec![0.6, 0.5, 0.42, 0.35, 0.3],
            theta: 8.0,
            replicas: 32,
            snapshot_intervals: 2,
            min_grid: 64,
            dynamics: DynamicsConfig::default(),
            potential: PotentialSpec::cosine(),
            initial: InitialLaw::default(),
            vfp: VfpConfig::default(),
        }
    }
}

const QUANTITIES: [&str; 4] = ["rho_h1_sq", "j_l2_sq", "j2_l2_sq", "rho_l4"];

/// Mean squared norms of the mollified fields along `Nε^θ = 1`, at several
/// times, and their trend in `1/ε`.
pub fn run_moment_study(cfg: &MomentStudyConfig, seed: u64) -> Result<StudyReport> {
    require_ladder(cfg.eps_ladder.len(), 3, "epsilon ladder points")?;
    require_ladder(cfg.replicas, 2, "replicas")?;
    require_ladder(cfg.snapshot_intervals, 1, "snapshot intervals")?;
    cfg.potential.validate()?;
    cfg.initial.validate()?;
    let base = cfg.dynamics.params(1, 1.0, cfg.theta, seed);
    let law = MeanFieldLaw::compute(&base, &cfg.initial, &cfg.potential, &cfg.vfp)?;
    let steps = base.steps();
    let snap_steps: Vec<usize> = (0..=cfg.snapshot_intervals)
        .map(|i| (i * steps) / cfg.snapshot_intervals)
        .collect();

    let mut table = Table::new(&["epsilon", "n_particles", "t", "rho_h1_sq", "j_l2_sq", "j2_l2_sq", "rho_l4"]);
    // series[snapshot][quantity] along the ladder
    let mut series = vec![vec![Vec::new(); QUANTITIES.len()]; snap_steps.len()];
    let mut inv_eps = Vec::new();
    for (cell, &eps0) in cfg.eps_ladder.iter().enumerate() {
        let (n, eps) = ModelParams::scaled_pair(eps0, cfg.theta);
        let kernel = KernelParams::admissible(eps, cfg.min_grid)?;
        inv_eps.push(1.0 / eps);
        let per_replica = collect(crate::par_map(cfg.replicas, |r| -> Result<Vec<[f64; 4]>> {
            let rs = cell_seed(seed, "moments", cell as u64, r as u64);
            let params = cfg.dynamics.params(n, eps, cfg.theta, rs);
            let mut ens = burn_in_particles(&params, &cfg.initial, &law.burn_in, rs)?;
            let mut noise = NoiseStreams::new(derive_seed(rs, &[1]), n);
            let mut db = Vec::new();
            let mut out = Vec::new();
            for step in 0..=steps {
                if snap_steps.contains(&step) {
                    let rho = empirical_field(&ens, &kernel, FieldWeight::RHO)?;
                    let j = empirical_field(&ens, &kernel, FieldWeight::J)?;
                    let j2 = empirical_field(&ens, &kernel, FieldWeight::J2)?;
                    out.push([
                        sobolev_norm(&rho, Norm::H(1))?.powi(2),
                        sobolev_norm(&j, Norm::L(2.0))?.powi(2),
                        sobolev_norm(&j2, Norm::L(2.0))?.powi(2),
                        sobolev_norm(&rho, Norm::L(4.0))?,
                    ]);
                }
                if step < steps {
                    noise.draw(params.dt, &mut db);
                    step_interacting(&mut ens, &params, &cfg.potential, &db)?;
                }
            }
            Ok(out)
        }))?;
        for (si, &s) in snap_steps.iter().enumerate() {
            let mut row = vec![eps, n as f64, s as f64 * base.dt];
            for (qi, col) in series[si].iter_mut().enumerate() {
                let m = mean(&per_replica.iter().map(|v| v[si][qi]).collect::<Vec<_>>());
                row.push(m);
                col.push(m);
            }
            table.push(row);
        }
    }

    let mut fits = Vec::new();
    let mut checks = Vec::new();
    // final time first so it leads the report
    for (si, &s) in snap_steps.iter().enumerate().rev() {
        for (qi, name) in QUANTITIES.iter().enumerate() {
            let fit = loglog_fit(&inv_eps, &series[si][qi]);
            let label = format!("{name}_t{:.3}", s as f64 * base.dt);
            if qi < 3 {
                checks.push(Check::new(
                    format!("{label}_flat"),
                    fit.slope,
                    "slope <= 0.05 + 2 se",
                    fit.slope <= 0.05 + 2.0 * fit.slope_stderr,
                ));
            }
            fits.push(NamedFit::new(label, fit));
        }
    }
    Ok(StudyReport::new("moments", grid_json(cfg), table, fits, checks))
}
