//! The run configuration: every module's config in one JSON document.
//! All fields default; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anchors::AnchorConfig;
use crate::assignment::AssignConfig;
use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::fusion::FusionConfig;
use crate::losses::LossConfig;
use crate::synth::{SceneConfig, ScorerConfig};

/// Environment variable naming a default config file, consulted when no
/// `--config` flag is given.
pub const CONFIG_ENV: &str = "PEDKIT_CONFIG";

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub anchors: AnchorConfig,
    pub assign: AssignConfig,
    pub losses: LossConfig,
    pub fusion: FusionConfig,
    pub eval: EvalConfig,
    pub scene: SceneConfig,
    pub scorer: ScorerConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.anchors.validate()?;
        self.assign.validate()?;
        self.losses.validate()?;
        self.fusion.validate()?;
        self.eval.subset.validate()?;
        if self.eval.fppi_refs.is_empty()
            || self.eval.fppi_refs.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidConfig(
                "fppi_refs must be non-empty and strictly increasing".into(),
            ));
        }
        self.scene.validate()?;
        self.scorer.validate()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Malformed {
            file: path.display().to_string(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `--config` flag, else the `PEDKIT_CONFIG` environment variable, else
    /// defaults.
    pub fn resolve(flag: Option<&Path>) -> Result<Self> {
        match flag {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) => Self::load(Path::new(&p)),
                None => Ok(Self::default()),
            },
        }
    }
}
