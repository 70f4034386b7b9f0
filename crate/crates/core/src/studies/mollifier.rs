use serde::{Deserialize, Serialize};

use super::{grid_json, require_ladder, Check, NamedFit, StudyReport, Table};
use crate::error::Result;
use crate::kernels::KernelParams;
use crate::stats::loglog_fit;
use crate::torus::{wrap_symmetric, PERIOD};

/// Lipschitz test functions on the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    Cos,
    /// `|x|` on `[−π, π)`, extended periodically.
    Triangle,
    Constant,
}

impl TestFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::Cos => x.cos(),
            TestFunction::Triangle => wrap_symmetric(x).abs(),
            TestFunction::Constant => 1.0,
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            TestFunction::Cos | TestFunction::Triangle => 1.0,
            TestFunction::Constant => 0.0,
        }
    }

    fn id(self) -> f64 {
        match self {
            TestFunction::Cos => 0.0,
            TestFunction::Triangle => 1.0,
            TestFunction::Constant => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MollifierConfig {
    pub eps_ladder: Vec<f64>,
    /// Anchors `a = 2πm/anchors`; an even count puts anchors on both kinks
    /// of the triangle.
    pub anchors: usize,
    pub functions: Vec<TestFunction>,
    /// Smallest quadrature grid.
    pub min_grid: usize,
}

impl Default for MollifierConfig {
    fn default() -> Self {
        Self {
            eps_ladder: vec![0.2, 0.1, 0.05, 0.025, 0.0125],
            anchors: 64,
            functions: vec![TestFunction::Cos, TestFunction::Triangle],
            min_grid: 4096,
        }
    }
}

/// `max_a |∫ w_ε(y − a) f(y) dy − f(a)|` by the trapezoid rule on a grid
/// containing every anchor.
pub fn mollifier_error(epsilon: f64, f: TestFunction, anchors: usize, min_grid: usize) -> Result<f64> {
    let kernel = KernelParams::admissible(epsilon, min_grid.max(anchors).next_power_of_two())?;
    let g = kernel.geometry();
    let h = g.spacing();
    let fy: Vec<f64> = g.points().iter().map(|&y| f.eval(y)).collect();
    let mut worst = 0.0_f64;
    for m in 0..anchors {
        let a = PERIOD * m as f64 / anchors as f64;
        let s: f64 = g
            .points()
            .iter()
            .zip(&fy)
            .map(|(&y, &v)| kernel.eval(y - a, 0) * v)
            .sum();
        worst = worst.max((s * h - f.eval(a)).abs());
    }
    Ok(worst)
}

/// Mollification error against `2·Lip(f)·√ε`, with the decay rate of the
/// triangle wave fitted.
pub fn run_mollifier_study(cfg: &MollifierConfig) -> Result<StudyReport> {
    require_ladder(cfg.eps_ladder.len(), 3, "epsilon ladder points")?;
    require_ladder(cfg.anchors, 2, "anchors")?;
    let mut table = Table::new(&["function", "epsilon", "error", "bound"]);
    let mut fits = Vec::new();
    let mut checks = Vec::new();
    for &f in &cfg.functions {
        let mut errs = Vec::new();
        let mut worst_ratio = 0.0_f64;
        for &eps in &cfg.eps_ladder {
            let e = mollifier_error(eps, f, cfg.anchors, cfg.min_grid)?;
            let bound = 2.0 * f.lipschitz() * eps.sqrt();
            table.push(vec![f.id(), eps, e, bound]);
            errs.push(e);
            worst_ratio = worst_ratio.max(if bound > 0.0 { e / bound } else { e / 1e-12 });
        }
        let name = serde_json::to_value(f).unwrap().as_str().unwrap().to_string();
        checks.push(Check::new(
            format!("{name}_within_bound"),
            worst_ratio,
            "error <= 2 Lip(f) sqrt(eps) at every ladder point",
            worst_ratio <= 1.0,
        ));
        if errs.iter().all(|&e| e > 0.0) {
            let fit = loglog_fit(&cfg.eps_ladder, &errs);
            if f == TestFunction::Triangle {
                checks.push(Check::new(
                    "triangle_slope",
                    fit.slope,
                    "slope +- 2 se meets [0.45, 1.1]",
                    fit.meets(0.45, 1.1),
                ));
            }
            fits.push(NamedFit::new(format!("{name}_error_vs_epsilon"), fit));
        }
    }
    // the triangle fit leads when present
    fits.sort_by_key(|f| !f.name.starts_with("triangle"));
    Ok(StudyReport::new("mollifier", grid_json(cfg), table, fits, checks))
}
