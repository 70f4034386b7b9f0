use serde::{Deserialize, Serialize};

use super::{cell_seed, collect, grid_json, require_ladder, Check, DynamicsConfig, NamedFit, StudyReport, Table};
use crate::error::Result;
use crate::fields::interaction_decomposition;
use crate::kernels::KernelParams;
use crate::particles::{burn_in_particles, step_interacting, MeanFieldLaw, ModelParams, NoiseStreams};
use crate::potential::PotentialSpec;
use crate::rng::derive_seed;
use crate::stats::{loglog_fit, mean};
use crate::vfp::{InitialLaw, VfpConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionStudyConfig {
    pub eps_ladder: Vec<f64>,
    pub theta: f64,
    pub replicas: usize,
    pub min_grid: usize,
    pub dynamics: DynamicsConfig,
    pub potential: PotentialSpec,
    pub initial: InitialLaw,
    pub vfp: VfpConfig,
}

impl Default for InteractionStudyConfig {
    fn default() -> Self {
        Self {
            eps_ladder: vec![0.2, 0.1, 0.05, 0.025],
            theta: 2.0,
            replicas: 32,
            min_grid: 64,
            dynamics: DynamicsConfig::default(),
            potential: PotentialSpec::cosine(),
            initial: InitialLaw::default(),
            vfp: VfpConfig::default(),
        }
    }
}

/// Remainders of the interaction identity at time `T` along `Nε^θ = 1`.
pub fn run_interaction_study(cfg: &InteractionStudyConfig, seed: u64) -> Result<StudyReport> {
    require_ladder(cfg.eps_ladder.len(), 3, "epsilon ladder points")?;
    require_ladder(cfg.replicas, 2, "replicas")?;
    cfg.potential.validate()?;
    cfg.initial.validate()?;
    let base = cfg.dynamics.params(1, 1.0, cfg.theta, seed);
    let law = MeanFieldLaw::compute(&base, &cfg.initial, &cfg.potential, &cfg.vfp)?;
    let steps = base.steps();

    let mut table = Table::new(&["epsilon", "n_particles", "sup_r1", "mean_abs_r2", "identity_residue"]);
    let (mut eps_v, mut r1_v, mut r2_v) = (Vec::new(), Vec::new(), Vec::new());
    let mut residue = 0.0_f64;
    for (cell, &eps0) in cfg.eps_ladder.iter().enumerate() {
        let (n, eps) = ModelParams::scaled_pair(eps0, cfg.theta);
        let kernel = KernelParams::admissible(eps, cfg.min_grid)?;
        let per = collect(crate::par_map(cfg.replicas, |r| -> Result<[f64; 3]> {
            let rs = cell_seed(seed, "interaction", cell as u64, r as u64);
            let params = cfg.dynamics.params(n, eps, cfg.theta, rs);
            let mut ens = burn_in_particles(&params, &cfg.initial, &law.burn_in, rs)?;
            let mut noise = NoiseStreams::new(derive_seed(rs, &[1]), n);
            let mut db = Vec::new();
            for _ in 0..steps {
                noise.draw(params.dt, &mut db);
                step_interacting(&mut ens, &params, &cfg.potential, &db)?;
            }
            let terms = interaction_decomposition(&ens, &kernel, &cfg.potential)?;
            Ok([terms.r1.sup_abs(), terms.r2.mean_abs(), terms.identity_residue()])
        }))?;
        let r1 = mean(&per.iter().map(|v| v[0]).collect::<Vec<_>>());
        let r2 = mean(&per.iter().map(|v| v[1]).collect::<Vec<_>>());
        let res = per.iter().map(|v| v[2]).fold(0.0, f64::max);
        residue = residue.max(res);
        table.push(vec![eps, n as f64, r1, r2, res]);
        eps_v.push(eps);
        r1_v.push(r1);
        r2_v.push(r2);
    }

    let mut fits = Vec::new();
    let mut checks = vec![Check::new(
        "identity_closes",
        residue,
        "|lhs - (W'*rho)rho - r1 rho - r2| <= 1e-12 at every cell",
        residue <= 1e-12,
    )];
    if r1_v.iter().chain(&r2_v).all(|&v| v == 0.0) {
        checks.push(Check::new("remainders_vanish", 0.0, "r1 = r2 = 0 (flat potential)", true));
    } else if r1_v.iter().chain(&r2_v).any(|&v| !(v > 0.0)) {
        checks.push(Check::undecided("remainder_slopes", "some remainder is zero; slope undefined"));
    } else {
        for (name, v) in [("sup_r1", &r1_v), ("mean_abs_r2", &r2_v)] {
            let fit = loglog_fit(&eps_v, v);
            checks.push(Check::new(
                format!("{name}_slope"),
                fit.slope,
                "slope +- 2 se meets [0.4, inf)",
                fit.meets(0.4, f64::INFINITY),
            ));
            fits.push(NamedFit::new(format!("{name}_vs_epsilon"), fit));
        }
    }
    Ok(StudyReport::new("interaction", grid_json(cfg), table, fits, checks))
}
