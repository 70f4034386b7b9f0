use serde::{Deserialize, Serialize};

use super::{cell_seed, collect, grid_json, require_ladder, Check, StudyReport, Table};
use crate::error::{Error, Result};
use crate::fields::weighted_field;
use crate::kernels::KernelParams;
use crate::particles::{step_interacting, ModelParams, NoiseStreams, ParticleEnsemble, Scheme};
use crate::potential::PotentialSpec;
use crate::rng::{derive_seed, stream_rng};
use crate::spde::{draw_brownian_modes, qwiener_from_modes};
use crate::stats::{mean, std_error};
use crate::torus::TorusGeometry;
use crate::vfp::InitialLaw;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovarianceStudyConfig {
    pub eps_ladder: Vec<f64>,
    pub theta: f64,
    pub replicas: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub t_horizon: f64,
    pub dt: f64,
    /// Common grid for every ε; must resolve `ε/√2` at the smallest ε.
    pub n_grid: usize,
    /// Separations `x₂ − x₁` in grid steps.
    pub separation_steps: Vec<usize>,
    pub potential: PotentialSpec,
    pub initial: InitialLaw,
}

impl Default for CovarianceStudyConfig {
    fn default() -> Self {
        Self {
            eps_ladder: vec![0.2, 0.1],
            theta: 2.0,
            replicas: 2000,
            gamma: 1.0,
            sigma: 1.0,
            t_horizon: 0.5,
            dt: 0.01,
            n_grid: 256,
            separation_steps: vec![0, 4, 8, 16, 32],
            potential: PotentialSpec::cosine(),
            initial: InitialLaw::default(),
        }
    }
}

/// Per-replica translation averages at time `T`.
struct ReplicaStats {
    zz: Vec<f64>,
    yy: Vec<f64>,
    /// `(1/n)Σ_x Z(x)²` and the matching quadratic-variation integral.
    z_sq: f64,
    isometry_rhs: f64,
}

fn translation_products(v: &[f64], offsets: &[usize]) -> Vec<f64> {
    let n = v.len();
    offsets
        .iter()
        .map(|&d| (0..n).map(|i| v[i] * v[(i + d) % n]).sum::<f64>() / n as f64)
        .collect()
}

/// Compare the covariance of the particle noise field
/// `Z_N = ∫ (σ/N) Σ_i w_ε(x − q_i) dβ_i` with that of the surrogate
/// `Y_N = ∫ (σ/√N) √ρ_{ε/√2} dξ̃` driven by independent Q-Wiener noise.
pub fn run_covariance_study(cfg: &CovarianceStudyConfig, seed: u64) -> Result<StudyReport> {
    require_ladder(cfg.eps_ladder.len(), 2, "epsilon ladder points")?;
    require_ladder(cfg.replicas, 1000, "replicas")?;
    require_ladder(cfg.separation_steps.len(), 1, "separations")?;
    cfg.potential.validate()?;
    cfg.initial.validate()?;
    let geometry = TorusGeometry::new(cfg.n_grid)?;
    let h = geometry.spacing();
    let t = cfg.t_horizon;
    let seps: Vec<f64> = cfg.separation_steps.iter().map(|&s| s as f64 * h).collect();

    let mut table = Table::new(&[
        "epsilon",
        "n_particles",
        "separation",
        "cov_z",
        "cov_y",
        "discrepancy",
        "normaliser",
        "normalised",
        "normalised_se",
    ]);
    let mut iso_checks = Vec::new();
    let mut normalised: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
    for (cell, &eps0) in cfg.eps_ladder.iter().enumerate() {
        let (n, eps) = ModelParams::scaled_pair(eps0, cfg.theta);
        let params = ModelParams {
            n_particles: n,
            gamma: cfg.gamma,
            sigma: cfg.sigma,
            t_horizon: cfg.t_horizon,
            dt: cfg.dt,
            theta: cfg.theta,
            epsilon: eps,
            burn_in: 0.0,
            seed,
            momentum_guard: 1e3,
            scheme: Scheme::EulerMaruyama,
        };
        params.validate()?;
        let steps = params.steps();
        let w = KernelParams::new(eps, geometry.clone())?;
        let w_half = KernelParams::new(eps / std::f64::consts::SQRT_2, geometry.clone())?;
        let w_noise = KernelParams::new(eps * std::f64::consts::SQRT_2, geometry.clone())?;
        // w_ε² = (Z_{ε/√2} / Z_ε²) w_{ε/√2}
        let sq_factor = w_half.z_eps / (w.z_eps * w.z_eps);
        let p_std = cfg.initial.momentum_variance(cfg.gamma, cfg.sigma).sqrt();
        let sigma = cfg.sigma;
        let nf = n as f64;

        let stats = collect(crate::par_map(cfg.replicas, |r| -> Result<ReplicaStats> {
            let rs = cell_seed(seed, "covariance", cell as u64, r as u64);
            let mut ens = ParticleEnsemble::sample(n, &cfg.initial, p_std, rs);
            let mut noise = NoiseStreams::new(derive_seed(rs, &[1]), n);
            let mut xi_rng = stream_rng(derive_seed(rs, &[2]), 0);
            let ng = geometry.n_grid();
            let (mut z, mut y, mut qv) = (vec![0.0; ng], vec![0.0; ng], vec![0.0; ng]);
            let mut db = Vec::new();
            for _ in 0..steps {
                noise.draw(params.dt, &mut db);
                let dz = weighted_field(&ens.q, &db, &w, 0)?;
                let ones = vec![1.0; n];
                let rho_half = weighted_field(&ens.q, &ones, &w_half, 0)?;
                let b = draw_brownian_modes(&mut xi_rng, ng, params.dt);
                let xi = qwiener_from_modes(&geometry, &w_noise.fourier_coeffs, &b);
                for i in 0..ng {
                    let rh = rho_half.values()[i];
                    z[i] += sigma * dz.values()[i];
                    y[i] += sigma / nf.sqrt() * rh.max(0.0).sqrt() * xi[i];
                    qv[i] += sigma * sigma / nf * sq_factor * rh * params.dt;
                }
                step_interacting(&mut ens, &params, &cfg.potential, &db)?;
            }
            Ok(ReplicaStats {
                zz: translation_products(&z, &cfg.separation_steps),
                yy: translation_products(&y, &cfg.separation_steps),
                z_sq: mean(&z.iter().map(|v| v * v).collect::<Vec<_>>()),
                isometry_rhs: mean(&qv),
            })
        }))?;

        let z_sq: Vec<f64> = stats.iter().map(|s| s.z_sq).collect();
        let rhs: Vec<f64> = stats.iter().map(|s| s.isometry_rhs).collect();
        let (lhs_m, rhs_m) = (mean(&z_sq), mean(&rhs));
        if sigma == 0.0 {
            iso_checks.push(Check::new(
                format!("isometry_eps{eps:.4}"),
                lhs_m.abs() + rhs_m.abs(),
                "both sides vanish when sigma = 0",
                lhs_m == 0.0 && rhs_m == 0.0,
            ));
        } else {
            let rel = (lhs_m - rhs_m).abs() / rhs_m;
            iso_checks.push(Check::new(
                format!("isometry_eps{eps:.4}"),
                rel,
                "|E Z^2 - E int (sigma/N)^2 sum w^2 ds| / rhs <= 0.05",
                rel <= 0.05,
            ));
        }

        let mut nv = Vec::new();
        let mut nse = Vec::new();
        for (k, &d) in seps.iter().enumerate() {
            let zz: Vec<f64> = stats.iter().map(|s| s.zz[k]).collect();
            let yy: Vec<f64> = stats.iter().map(|s| s.yy[k]).collect();
            let (cz, cy) = (mean(&zz), mean(&yy));
            let disc = (cz - cy).abs();
            let se = (std_error(&zz).powi(2) + std_error(&yy).powi(2)).sqrt();
            let norm = sigma * sigma / nf * (w_noise.eval(d, 0) * t + t);
            let (val, val_se) = if norm > 0.0 { (disc / norm, se / norm) } else { (0.0, 0.0) };
            table.push(vec![eps, nf, d, cz, cy, disc, norm, val, val_se]);
            nv.push(val);
            nse.push(val_se);
        }
        normalised.push((eps, nv, nse));
    }

    let mut checks = iso_checks;
    // monotone improvement at each separation, ladder sorted by decreasing ε
    normalised.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut worst_gap = f64::NEG_INFINITY;
    for w in normalised.windows(2) {
        for k in 0..seps.len() {
            let band = 2.0 * (w[0].2[k].powi(2) + w[1].2[k].powi(2)).sqrt();
            worst_gap = worst_gap.max(w[1].1[k] - w[0].1[k] - band);
        }
    }
    checks.push(Check::new(
        "discrepancy_non_increasing",
        worst_gap,
        "normalised discrepancy at smaller epsilon <= larger epsilon + 2 se, each separation",
        worst_gap <= 0.0,
    ));
    let c_fit = normalised
        .iter()
        .flat_map(|(eps, v, _)| v.iter().zip(&seps).map(move |(x, d)| x / (d + eps.powf(0.2))))
        .fold(0.0, f64::max);
    if !c_fit.is_finite() {
        return Err(Error::NonFinite("covariance envelope constant".into()));
    }
    checks.push(Check::new(
        "envelope_constant",
        c_fit,
        "fitted C in discrepancy <= C (|x1 - x2| + eps^0.2) satisfies C <= 1",
        c_fit <= 1.0,
    ));
    Ok(StudyReport::new("covariance", grid_json(cfg), table, Vec::new(), checks))
}
