//! Studies that turn rate and property statements into fitted slopes and
//! pass/fail verdicts.
//!
//! Every study is a pure function of `(seed, config)`. Replicas run in
//! parallel on isolated streams and are reduced in index order, so tables
//! do not depend on the thread count.

mod chaos;
mod closure;
mod covariance;
mod evolution;
mod interaction;
mod kernel;
mod mollifier;
mod moments;
mod small_noise;

pub use chaos::{run_chaos_study, ChaosStudyConfig};
pub use closure::{closure_error, run_j2_closure_study, J2ClosureConfig};
pub use covariance::{run_covariance_study, CovarianceStudyConfig};
pub use evolution::{run_evolution_identity_check, EvolutionConfig};
pub use interaction::{run_interaction_study, InteractionStudyConfig};
pub use kernel::{run_kernel_study, KernelStudyConfig};
pub use mollifier::{mollifier_error, run_mollifier_study, MollifierConfig, TestFunction};
pub use moments::{run_moment_study, MomentStudyConfig};
pub use small_noise::{run_small_noise_study, SmallNoiseConfig};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particles::{ModelParams, Scheme};
use crate::rng::{derive_seed, label_hash};
use crate::stats::LinearFit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Fail if any check failed, inconclusive if any could not be decided.
    pub fn from_checks(checks: &[Check]) -> Self {
        if checks.iter().any(|c| c.passed == Some(false)) {
            Verdict::Fail
        } else if checks.is_empty() || checks.iter().any(|c| c.passed.is_none()) {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }
}

/// Column-labelled numeric table, written out as CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// One declared tolerance applied to the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable statement of the tolerance.
    pub requirement: String,
    /// `None` when the check could not be evaluated.
    pub passed: Option<bool>,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, requirement: impl Into<String>, passed: bool) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: requirement.into(),
            passed: Some(passed),
        }
    }

    pub fn undecided(name: impl Into<String>, requirement: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: f64::NAN,
            requirement: requirement.into(),
            passed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFit {
    pub name: String,
    #[serde(flatten)]
    pub fit: LinearFit,
}

impl NamedFit {
    pub fn new(name: impl Into<String>, fit: LinearFit) -> Self {
        Self { name: name.into(), fit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study_name: String,
    pub parameter_grid: serde_json::Value,
    pub raw_table: Table,
    /// Slope of the first fit, if any.
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub fits: Vec<NamedFit>,
    pub checks: Vec<Check>,
    /// Supplementary numbers that do not enter the verdict.
    #[serde(default)]
    pub diagnostics: std::collections::BTreeMap<String, f64>,
    pub verdict: Verdict,
    /// Wall-clock seconds; kept out of the serialised report so that reruns
    /// are byte-identical.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl StudyReport {
    pub fn new(
        study_name: &str,
        parameter_grid: serde_json::Value,
        raw_table: Table,
        fits: Vec<NamedFit>,
        checks: Vec<Check>,
    ) -> Self {
        let verdict = Verdict::from_checks(&checks);
        Self {
            study_name: study_name.to_string(),
            parameter_grid,
            raw_table,
            fitted_slope: fits.first().map(|f| f.fit.slope),
            slope_stderr: fits.first().map(|f| f.fit.slope_stderr),
            fits,
            checks,
            diagnostics: Default::default(),
            verdict,
            runtime_seconds: 0.0,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn fit(&self, name: &str) -> Option<&LinearFit> {
        self.fits.iter().find(|f| f.name == name).map(|f| &f.fit)
    }
}

/// Particle dynamics shared by the particle-based studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub gamma: f64,
    pub sigma: f64,
    pub t_horizon: f64,
    pub dt: f64,
    pub burn_in: f64,
    pub scheme: Scheme,
    pub momentum_guard: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        let m = ModelParams::default();
        Self {
            gamma: m.gamma,
            sigma: m.sigma,
            t_horizon: m.t_horizon,
            dt: m.dt,
            burn_in: m.burn_in,
            scheme: m.scheme,
            momentum_guard: m.momentum_guard,
        }
    }
}

impl DynamicsConfig {
    pub fn params(&self, n_particles: usize, epsilon: f64, theta: f64, seed: u64) -> ModelParams {
        ModelParams {
            n_particles,
            gamma: self.gamma,
            sigma: self.sigma,
            t_horizon: self.t_horizon,
            dt: self.dt,
            theta,
            epsilon,
            burn_in: self.burn_in,
            seed,
            momentum_guard: self.momentum_guard,
            scheme: self.scheme,
        }
    }
}

/// Names accepted by [`run_study`].
pub const STUDY_NAMES: [&str; 9] = [
    "kernel",
    "chaos",
    "moments",
    "interaction",
    "covariance",
    "j2_closure",
    "small_noise",
    "mollifier",
    "evolution",
];

/// Parse `config` for study `name`, run it and return the report together
/// with the fully resolved configuration.
pub fn run_study(name: &str, config: serde_json::Value, seed: u64) -> Result<(StudyReport, serde_json::Value)> {
    fn go<C, F>(config: serde_json::Value, seed: u64, f: F) -> Result<(StudyReport, serde_json::Value)>
    where
        C: DeserializeOwned + Serialize,
        F: Fn(&C, u64) -> Result<StudyReport>,
    {
        let cfg: C = parse_config(config)?;
        let resolved = serde_json::to_value(&cfg).map_err(|e| Error::Config(e.to_string()))?;
        let start = std::time::Instant::now();
        let mut report = f(&cfg, seed)?;
        report.runtime_seconds = start.elapsed().as_secs_f64();
        Ok((report, resolved))
    }
    match name {
        "kernel" => go(config, seed, |c: &KernelStudyConfig, _| run_kernel_study(c)),
        "chaos" => go(config, seed, run_chaos_study),
        "moments" => go(config, seed, run_moment_study),
        "interaction" => go(config, seed, run_interaction_study),
        "covariance" => go(config, seed, run_covariance_study),
        "j2_closure" => go(config, seed, run_j2_closure_study),
        "small_noise" => go(config, seed, run_small_noise_study),
        "mollifier" => go(config, seed, |c: &MollifierConfig, _| run_mollifier_study(c)),
        "evolution" => go(config, seed, run_evolution_identity_check),
        other => Err(Error::Config(format!(
            "unknown study '{other}', expected one of {}",
            STUDY_NAMES.join(", ")
        ))),
    }
}

/// Deserialize a config block, rejecting unknown keys. `null` gives defaults.
pub fn parse_config<C: DeserializeOwned>(value: serde_json::Value) -> Result<C> {
    let value = if value.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        value
    };
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

pub(crate) fn cell_seed(master: u64, study: &str, cell: u64, replica: u64) -> u64 {
    derive_seed(master, &[label_hash(study), cell, replica])
}

pub(crate) fn grid_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("grid serialises")
}

/// `v[i+1] ≤ v[i] + 2·sqrt(se[i]² + se[i+1]²)` for all consecutive pairs.
pub(crate) fn non_increasing_within(v: &[f64], se: &[f64]) -> bool {
    (1..v.len()).all(|i| v[i] <= v[i - 1] + 2.0 * (se[i].powi(2) + se[i - 1].powi(2)).sqrt())
}

pub(crate) fn require_ladder(len: usize, needed: usize, what: &'static str) -> Result<()> {
    if len < needed {
        return Err(Error::TooFew { what, needed, got: len });
    }
    Ok(())
}

pub(crate) fn collect<T>(v: Vec<Result<T>>) -> Result<Vec<T>> {
    v.into_iter().collect()
}
