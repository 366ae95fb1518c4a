//! Run configuration: every module's parameter group in one TOML document.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kcc::KccParams;
use crate::normals::NormalMapParams;
use crate::planes::PlaneTrackerParams;
use crate::rotation::RotationParams;
use crate::translation::{ProjectionConfig, TranslationParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    /// Capacity of each inter-stage channel, frames.
    pub channel_capacity: usize,
    /// Rotation keyframe is replaced when tracked coverage falls below this
    /// fraction of its value at keyframe creation.
    pub rotation_coverage_fraction: f64,
    /// Run all stages on the calling thread.
    pub single_thread: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            channel_capacity: 4,
            rotation_coverage_fraction: 0.5,
            single_thread: false,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if self.channel_capacity == 0 {
            return Err(Error::config("pipeline.channel_capacity", "must be >= 1"));
        }
        if !(self.rotation_coverage_fraction > 0.0 && self.rotation_coverage_fraction <= 1.0) {
            return Err(Error::config(
                "pipeline.rotation_coverage_fraction",
                format!("must lie in (0, 1], got {}", self.rotation_coverage_fraction),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for anything stochastic (synthetic noise).
    pub seed: u64,
    pub pipeline: PipelineParams,
    pub normals: NormalMapParams,
    pub planes: PlaneTrackerParams,
    pub rotation: RotationParams,
    pub kcc: KccParams,
    pub projection: ProjectionConfig,
    pub translation: TranslationParams,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.normals.validate()?;
        self.planes.validate()?;
        self.rotation.validate()?;
        self.kcc.validate()?;
        self.projection.validate()?;
        self.translation.validate()
    }

    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { field, reason } => Error::Config {
                field,
                reason: format!("{reason} (in {})", path.display()),
            },
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    /// The config as `# `-prefixed comment lines.
    pub fn to_comment_block(&self) -> String {
        self.to_toml()
            .lines()
            .map(|l| format!("# {l}\n"))
            .collect()
    }

    /// Recovers the config echoed at the top of a diagnostics file.
    pub fn from_comment_block(text: &str) -> Result<Self> {
        let body: String = text
            .lines()
            .map_while(|l| l.strip_prefix('#'))
            .map(|l| format!("{}\n", l.strip_prefix(' ').unwrap_or(l)))
            .collect();
        Self::from_toml(&body)
    }
}
