use serde::{Deserialize, Serialize};

use super::{cell_seed, collect, grid_json, require_ladder, Check, NamedFit, StudyReport, Table};
use crate::error::{Error, Result};
use crate::fields::{weighted_field, DensityField};
use crate::kernels::KernelParams;
use crate::particles::{pairwise_force, step_interacting, ModelParams, NoiseStreams, ParticleEnsemble, Scheme};
use crate::potential::PotentialSpec;
use crate::rng::derive_seed;
use crate::stats::{loglog_fit, mean, std_error, LinearFit};
use crate::vfp::InitialLaw;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub n_particles: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub t_horizon: f64,
    /// Each step must be an integer multiple of the smallest one.
    pub dt_ladder: Vec<f64>,
    pub replicas: usize,
    pub min_grid: usize,
    pub potential: PotentialSpec,
    pub initial: InitialLaw,
    /// Start every particle at rest instead of sampling momenta.
    pub at_rest: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            n_particles: 64,
            epsilon: 0.3,
            gamma: 1.0,
            sigma: 1.0,
            t_horizon: 0.5,
            dt_ladder: vec![1e-2, 5e-3, 2.5e-3],
            replicas: 8,
            min_grid: 64,
            potential: PotentialSpec::cosine(),
            initial: InitialLaw::default(),
            at_rest: false,
        }
    }
}

/// Accumulated residuals of the transport identity for `ρ_ε` and the
/// momentum balance for `j_ε` along one discrete path.
pub(crate) fn identity_residuals(
    start: &ParticleEnsemble,
    params: &ModelParams,
    w: &PotentialSpec,
    kernel: &KernelParams,
    increments: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let mut ens = start.clone();
    let field = |ens: &ParticleEnsemble, c: &[f64], order: u8| weighted_field(&ens.q, c, kernel, order);
    let pw = |ens: &ParticleEnsemble, k: i32| -> Vec<f64> { ens.p.iter().map(|p| p.powi(k)).collect() };
    let ones = vec![1.0; ens.len()];
    let rho0 = field(&ens, &ones, 0)?;
    let j0 = field(&ens, &ens.p, 0)?;
    let ng = rho0.values().len();
    let (mut pred_rho, mut pred_j) = (vec![0.0; ng], vec![0.0; ng]);
    let (mut res_a, mut res_b) = (0.0_f64, 0.0_f64);
    let dt = params.dt;
    for db in increments {
        let j = field(&ens, &ens.p, 0)?;
        let dj = field(&ens, &ens.p, 1)?;
        let j2 = field(&ens, &pw(&ens, 2), 1)?;
        // (1/N)Σ_j W′(q_i − q_j), weighted by w_ε(x − q_i) and 1/N again
        let grad: Vec<f64> = pairwise_force(&ens, w)?.iter().map(|f| -f).collect();
        let inter = field(&ens, &grad, 0)?;
        let dz = field(&ens, db, 0)?;
        for x in 0..ng {
            pred_rho[x] -= dj.values()[x] * dt;
            pred_j[x] += (-params.gamma * j.values()[x] - j2.values()[x] - inter.values()[x]) * dt
                + params.sigma * dz.values()[x];
        }
        step_interacting(&mut ens, params, w, db)?;
        let rho = field(&ens, &ones, 0)?;
        let jn = field(&ens, &ens.p, 0)?;
        res_a = res_a.max(sup_gap(&rho, &rho0, &pred_rho));
        res_b = res_b.max(sup_gap(&jn, &j0, &pred_j));
    }
    Ok((res_a, res_b))
}

fn sup_gap(now: &DensityField, start: &DensityField, pred: &[f64]) -> f64 {
    now.values()
        .iter()
        .zip(start.values())
        .zip(pred)
        .map(|((a, b), c)| (a - b - c).abs())
        .fold(0.0, f64::max)
}

/// Widen the slope error of a fit on replica means by the standard error of
/// the per-replica slopes, so the band also covers Monte Carlo spread.
fn with_replica_spread(
    fit: LinearFit,
    dts: &[f64],
    per: &[Vec<(f64, f64)>],
    pick: impl Fn(&(f64, f64)) -> f64,
) -> LinearFit {
    let slopes: Vec<f64> = per
        .iter()
        .map(|v| v.iter().map(&pick).collect::<Vec<_>>())
        .filter(|r| r.iter().all(|&x| x > 0.0))
        .map(|r| loglog_fit(dts, &r).slope)
        .collect();
    if slopes.len() < 2 {
        return fit;
    }
    LinearFit {
        slope_stderr: fit.slope_stderr.hypot(std_error(&slopes)),
        ..fit
    }
}

/// Discrete residuals of the evolution identities for `ρ_ε` and `j_ε` on a
/// dt ladder driven by one Brownian path per replica.
pub fn run_evolution_identity_check(cfg: &EvolutionConfig, seed: u64) -> Result<StudyReport> {
    require_ladder(cfg.dt_ladder.len(), 2, "dt ladder points")?;
    require_ladder(cfg.replicas, 1, "replicas")?;
    cfg.potential.validate()?;
    cfg.initial.validate()?;
    let dt_min = cfg.dt_ladder.iter().copied().fold(f64::INFINITY, f64::min);
    let mut ratios = Vec::new();
    for &dt in &cfg.dt_ladder {
        let m = (dt / dt_min).round();
        if (m * dt_min - dt).abs() > 1e-9 * dt {
            return Err(Error::Config(format!("dt = {dt} is not a multiple of {dt_min}")));
        }
        ratios.push(m as usize);
    }
    let fine_steps = (cfg.t_horizon / dt_min).round() as usize;
    let kernel = KernelParams::admissible(cfg.epsilon, cfg.min_grid)?;
    let n = cfg.n_particles;
    let p_std = cfg.initial.momentum_variance(cfg.gamma, cfg.sigma).sqrt();

    let per = collect(crate::par_map(cfg.replicas, |r| -> Result<Vec<(f64, f64)>> {
        let rs = cell_seed(seed, "evolution", 0, r as u64);
        let mut start = ParticleEnsemble::sample(n, &cfg.initial, p_std, rs);
        if cfg.at_rest {
            start.p.iter_mut().for_each(|p| *p = 0.0);
        }
        let mut noise = NoiseStreams::new(derive_seed(rs, &[1]), n);
        let mut fine = Vec::with_capacity(fine_steps);
        let mut db = Vec::new();
        for _ in 0..fine_steps {
            noise.draw(dt_min, &mut db);
            fine.push(db.clone());
        }
        cfg.dt_ladder
            .iter()
            .zip(&ratios)
            .map(|(&dt, &m)| {
                let params = ModelParams {
                    n_particles: n,
                    gamma: cfg.gamma,
                    sigma: cfg.sigma,
                    t_horizon: cfg.t_horizon,
                    dt,
                    theta: 1.0,
                    epsilon: cfg.epsilon,
                    burn_in: 0.0,
                    seed: rs,
                    momentum_guard: 1e3,
                    scheme: Scheme::EulerMaruyama,
                };
                params.validate()?;
                let coarse: Vec<Vec<f64>> = fine
                    .chunks(m)
                    .map(|c| (0..n).map(|i| c.iter().map(|v| v[i]).sum()).collect())
                    .collect();
                identity_residuals(&start, &params, &cfg.potential, &kernel, &coarse)
            })
            .collect()
    }))?;

    let mut table = Table::new(&["dt", "residual_rho", "residual_j"]);
    let (mut ra, mut rb) = (Vec::new(), Vec::new());
    for (k, &dt) in cfg.dt_ladder.iter().enumerate() {
        let a = mean(&per.iter().map(|v| v[k].0).collect::<Vec<_>>());
        let b = mean(&per.iter().map(|v| v[k].1).collect::<Vec<_>>());
        table.push(vec![dt, a, b]);
        ra.push(a);
        rb.push(b);
    }
    let mut fits = Vec::new();
    let mut checks = Vec::new();
    if ra.iter().chain(&rb).all(|&v| v == 0.0) {
        checks.push(Check::new("residuals_vanish", 0.0, "all residuals exactly zero", true));
    } else if ra.iter().chain(&rb).any(|&v| !(v > 0.0)) {
        checks.push(Check::undecided("residual_orders", "some residual is zero; order undefined"));
    } else {
        let fa = with_replica_spread(loglog_fit(&cfg.dt_ladder, &ra), &cfg.dt_ladder, &per, |v| v.0);
        let fb = with_replica_spread(loglog_fit(&cfg.dt_ladder, &rb), &cfg.dt_ladder, &per, |v| v.1);
        checks.push(Check::new(
            "rho_identity_order",
            fa.slope,
            "order +- 2 se meets [1, inf)",
            fa.meets(1.0, f64::INFINITY),
        ));
        checks.push(Check::new(
            "j_identity_order",
            fb.slope,
            "order +- 2 se meets [0.5, inf)",
            fb.meets(0.5, f64::INFINITY),
        ));
        fits.push(NamedFit::new("rho_residual_vs_dt", fa));
        fits.push(NamedFit::new("j_residual_vs_dt", fb));
    }
    Ok(StudyReport::new("evolution", grid_json(cfg), table, fits, checks))
}
