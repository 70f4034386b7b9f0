use serde::{Deserialize, Serialize};

use super::{cell_seed, collect, grid_json, require_ladder, Check, NamedFit, StudyReport, Table};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::spde::{solve_noise_free_with, NoiseFreeScheme, SpdeConfig, SpdeSolver, Status};
use crate::stats::{loglog_fit, mean, std_error};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmallNoiseConfig {
    pub spde: SpdeConfig,
    pub n_ladder: Vec<f64>,
    pub replicas: usize,
    /// Rerun the largest `N` with the noise prefactor `σ/√N` halved (the
    /// linear operator keeps `σ`) for the amplitude-scaling check.
    pub halve_amplitude: bool,
    /// Also rerun with `σ` halved everywhere, including `σ²/(2γ)`; reported
    /// only.
    pub halve_sigma_everywhere: bool,
}

impl Default for SmallNoiseConfig {
    fn default() -> Self {
        Self {
            spde: SpdeConfig::default(),
            n_ladder: vec![1e2, 1e3, 1e4],
            replicas: 100,
            halve_amplitude: true,
            halve_sigma_everywhere: true,
        }
    }
}

struct CellResult {
    error_mean: f64,
    error_se: f64,
    survival: f64,
}

/// `E sup_{t ≤ μ_δ ∧ T} ‖X − Z‖` and the no-stop fraction for one `(N, σ)`.
fn run_cell(spde: &SpdeConfig, n_noise: f64, replicas: usize, seed: u64, cell: u64) -> Result<CellResult> {
    let mut cfg = spde.clone();
    cfg.n_noise = n_noise;
    let solver = SpdeSolver::new(&cfg)?;
    // reference with the same step so that X − Z isolates the noise
    let mut zcfg = cfg.clone();
    zcfg.noise = false;
    zcfg.noise_free_scheme = NoiseFreeScheme::ExponentialEuler;
    let zsolver = SpdeSolver::new(&zcfg)?;
    let z = solve_noise_free_with(&zsolver)?;
    let steps = solver.steps();
    if z.states.len() != steps + 1 {
        return Err(Error::Config(format!(
            "noise-free reference stopped at t = {:?}; the datum does not persist over [0, T]",
            z.status.mu_delta_time
        )));
    }
    let per = collect(crate::par_map(replicas, |r| -> Result<(f64, bool)> {
        let mut rng = stream_rng(cell_seed(seed, "small_noise", cell, r as u64), 0);
        let (mut x, mut status) = solver.start();
        let mut sup = 0.0_f64;
        for n in 0..steps {
            if x.status != Status::Running {
                break;
            }
            solver.step_mild(&mut x, &mut status, &mut rng)?;
            sup = sup.max(x.distance_h1(&z.states[n + 1]));
        }
        Ok((sup, status.survived()))
    }))?;
    let errs: Vec<f64> = per.iter().map(|v| v.0).collect();
    Ok(CellResult {
        error_mean: mean(&errs),
        error_se: std_error(&errs),
        survival: per.iter().filter(|v| v.1).count() as f64 / replicas as f64,
    })
}

/// Distance of the regularised SPDE from its noise-free limit along an
/// `N`-ladder, with survival of the localisation.
pub fn run_small_noise_study(cfg: &SmallNoiseConfig, seed: u64) -> Result<StudyReport> {
    require_ladder(cfg.n_ladder.len(), 2, "N ladder points")?;
    require_ladder(cfg.replicas, 2, "replicas")?;
    cfg.spde.validate()?;
    let mut ladder = cfg.n_ladder.clone();
    ladder.sort_by(f64::total_cmp);
    let mut table = Table::new(&["variant", "n_noise", "sigma", "error_mean", "error_stderr", "survival"]);
    let mut results = Vec::new();
    for (cell, &n) in ladder.iter().enumerate() {
        let r = run_cell(&cfg.spde, n, cfg.replicas, seed, cell as u64)?;
        table.push(vec![0.0, n, cfg.spde.sigma, r.error_mean, r.error_se, r.survival]);
        results.push(r);
    }
    let errs: Vec<f64> = results.iter().map(|r| r.error_mean).collect();
    let surv: Vec<f64> = results.iter().map(|r| r.survival).collect();
    let mut fits = Vec::new();
    let mut checks = Vec::new();
    if !cfg.spde.noise || cfg.spde.sigma == 0.0 {
        let zero = errs.iter().all(|&e| e == 0.0) && surv.iter().all(|&s| s == 1.0);
        checks.push(Check::new(
            "noise_free_exact",
            errs.iter().copied().fold(0.0, f64::max),
            "error 0 and survival 1 without noise",
            zero,
        ));
        return Ok(StudyReport::new("small_noise", grid_json(cfg), table, fits, checks));
    }
    checks.push(Check::new(
        "error_strictly_decreasing",
        errs[errs.len() - 1],
        "E sup ||X - Z|| strictly decreases along N",
        errs.windows(2).all(|w| w[1] < w[0]),
    ));
    checks.push(Check::new(
        "survival_non_decreasing",
        surv[0],
        "no-stop fraction non-decreasing along N",
        surv.windows(2).all(|w| w[1] >= w[0]),
    ));
    let last = *surv.last().unwrap();
    checks.push(Check::new(
        "survival_at_largest_n",
        last,
        "no-stop fraction >= 0.95 at the largest N",
        last >= 0.95,
    ));
    if errs.iter().all(|&e| e > 0.0) {
        fits.push(NamedFit::new("error_vs_n", loglog_fit(&ladder, &errs)));
    }
    let mut diagnostics = std::collections::BTreeMap::new();
    let n_max = *ladder.last().unwrap();
    let e_max = errs[errs.len() - 1];
    if cfg.halve_amplitude {
        // (σ/2)/√N = σ/√(4N)
        let r = run_cell(&cfg.spde, 4.0 * n_max, cfg.replicas, seed, ladder.len() as u64)?;
        table.push(vec![1.0, 4.0 * n_max, cfg.spde.sigma, r.error_mean, r.error_se, r.survival]);
        let ratio = e_max / r.error_mean;
        checks.push(Check::new(
            "amplitude_halving_ratio",
            ratio,
            "error / error with sigma/sqrt(N) halved in [1.4, 4]",
            (1.4..=4.0).contains(&ratio),
        ));
    }
    if cfg.halve_sigma_everywhere {
        let mut half = cfg.spde.clone();
        half.sigma *= 0.5;
        let r = run_cell(&half, n_max, cfg.replicas, seed, ladder.len() as u64 + 1)?;
        table.push(vec![2.0, n_max, half.sigma, r.error_mean, r.error_se, r.survival]);
        diagnostics.insert("sigma_halved_everywhere_ratio".into(), e_max / r.error_mean);
    }
    let mut report = StudyReport::new("small_noise", grid_json(cfg), table, fits, checks);
    report.diagnostics = diagnostics;
    Ok(report)
}
