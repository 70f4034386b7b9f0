use serde::{Deserialize, Serialize};

use super::{grid_json, require_ladder, Check, NamedFit, StudyReport, Table};
use crate::error::Result;
use crate::kernels::{kernel_residual_sup, normalization_constant};
use crate::stats::loglog_fit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelStudyConfig {
    pub eps_ladder: Vec<f64>,
}

impl Default for KernelStudyConfig {
    fn default() -> Self {
        Self {
            eps_ladder: vec![0.4, 0.2, 0.1, 0.05],
        }
    }
}

/// Sup-distance between the periodic kernel and the Gaussian along an
/// ε-ladder, with its fitted power of ε.
pub fn run_kernel_study(cfg: &KernelStudyConfig) -> Result<StudyReport> {
    require_ladder(cfg.eps_ladder.len(), 3, "epsilon ladder points")?;
    let mut table = Table::new(&["epsilon", "z_eps", "residual_sup"]);
    let mut res = Vec::new();
    for &eps in &cfg.eps_ladder {
        let r = kernel_residual_sup(eps)?;
        table.push(vec![eps, normalization_constant(eps)?, r]);
        res.push(r);
    }
    let fit = loglog_fit(&cfg.eps_ladder, &res);
    // ladder order as given; require decay towards the small-ε end
    let mut pairs: Vec<(f64, f64)> = cfg.eps_ladder.iter().copied().zip(res.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let decreasing = pairs.windows(2).all(|w| w[1].1 < w[0].1);
    let (lo, hi) = fit.interval();
    let checks = vec![
        Check::new(
            "residual_decreasing",
            res.iter().copied().fold(f64::NAN, f64::max),
            "sup|w - gauss| strictly decreases as epsilon decreases",
            decreasing,
        ),
        Check::new(
            "exponent_window",
            fit.slope,
            format!("slope +- 2 se = [{lo:.4}, {hi:.4}] meets (0, 1]"),
            hi > 0.0 && lo <= 1.0,
        ),
    ];
    Ok(StudyReport::new(
        "kernel",
        grid_json(cfg),
        table,
        vec![NamedFit::new("residual_vs_epsilon", fit)],
        checks,
    ))
}
