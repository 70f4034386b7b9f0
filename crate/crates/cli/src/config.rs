use std::collections::BTreeMap;
use std::path::Path;

use dklab_core::particles::ModelParams;
use dklab_core::spde::SpdeConfig;
use dklab_core::vfp::{InitialLaw, VfpConfig};
use dklab_core::PotentialSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Top-level configuration document.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub spde: Option<SpdeRunConfig>,
    /// Per-study parameter blocks keyed by study name.
    #[serde(default)]
    pub studies: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub model: ModelParams,
    pub potential: PotentialSpec,
    pub initial: InitialLaw,
    pub vfp: VfpConfig,
    pub snapshot_every: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            potential: PotentialSpec::cosine(),
            initial: InitialLaw::default(),
            vfp: VfpConfig::default(),
            snapshot_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpdeRunConfig {
    pub model: SpdeConfig,
    pub snapshot_every: usize,
}

impl Default for SpdeRunConfig {
    fn default() -> Self {
        Self {
            model: SpdeConfig::default(),
            snapshot_every: 100,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Schema and precondition checks on every section present.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be >= 1".into()));
        }
        if let Some(s) = &self.simulate {
            s.model.validate()?;
            s.potential.validate()?;
            s.initial.validate()?;
        }
        if let Some(s) = &self.spde {
            s.model.validate()?;
        }
        for (name, block) in &self.studies {
            check_study_block(name, block)?;
        }
        Ok(())
    }
}

fn check_study_block(name: &str, block: &serde_json::Value) -> Result<(), CliError> {
    use dklab_core::studies::*;
    let v = block.clone();
    let r = match name {
        "kernel" => parse_config::<KernelStudyConfig>(v).map(drop),
        "chaos" => parse_config::<ChaosStudyConfig>(v).map(drop),
        "moments" => parse_config::<MomentStudyConfig>(v).map(drop),
        "interaction" => parse_config::<InteractionStudyConfig>(v).map(drop),
        "covariance" => parse_config::<CovarianceStudyConfig>(v).map(drop),
        "j2_closure" => parse_config::<J2ClosureConfig>(v).map(drop),
        "small_noise" => parse_config::<SmallNoiseConfig>(v).and_then(|c| c.spde.validate()),
        "mollifier" => parse_config::<MollifierConfig>(v).map(drop),
        "evolution" => parse_config::<EvolutionConfig>(v).map(drop),
        other => {
            return Err(CliError::Config(format!(
                "unknown study '{other}' in config, expected one of {}",
                STUDY_NAMES.join(", ")
            )))
        }
    };
    r.map_err(|e| CliError::Config(format!("studies.{name}: {e}")))
}
