//! Optional TOML configuration shared by all subcommands.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use egoact::dataset::{AnnotationConfig, OversampleConfig};
use egoact::eval::MetricConfig;
use egoact::grammar::RouterConfig;
use egoact::pose::{DiscreteStepConfig, PerturbConfig, Thresholds};
use egoact::runner::RunConfig;
use egoact::sim::AgentConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub router: RouterConfig,
    /// Overrides the agent block of every loaded world when present.
    pub agent: Option<AgentConfig>,
    pub metrics: MetricConfig,
    pub perturb: PerturbConfig,
    /// Per-axis labeling thresholds; also used by annotation builds.
    pub thresholds: Thresholds,
    pub steps: DiscreteStepConfig,
    pub annotation: AnnotationSection,
    pub oversample: OversampleConfig,
    pub run: RunSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationSection {
    pub stride: usize,
    pub lead_frames: usize,
    pub movement_targets: bool,
}

impl Default for AnnotationSection {
    fn default() -> Self {
        let d = AnnotationConfig::default();
        Self {
            stride: d.stride,
            lead_frames: d.lead_frames,
            movement_targets: d.movement_targets,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub max_steps: usize,
    pub retries: usize,
    pub timeout_s: f64,
    pub decode: Option<toml::Value>,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = RunConfig::default();
        Self {
            max_steps: d.max_steps,
            retries: d.retries,
            timeout_s: d.timeout_s,
            decode: None,
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.metrics.validate()?;
        ensure!(cfg.thresholds.is_valid(), "thresholds must be positive");
        ensure!(cfg.annotation.stride > 0, "annotation stride must be positive");
        Ok(cfg)
    }

    pub fn annotation(&self, seed: u64) -> AnnotationConfig {
        AnnotationConfig {
            seed,
            stride: self.annotation.stride,
            lead_frames: self.annotation.lead_frames,
            thresholds: self.thresholds,
            movement_targets: self.annotation.movement_targets,
        }
    }

    pub fn run(&self) -> Result<RunConfig> {
        let decode = match &self.run.decode {
            Some(v) => Some(serde_json::to_value(v).context("decode hint")?),
            None => None,
        };
        Ok(RunConfig {
            max_steps: self.run.max_steps,
            retries: self.run.retries,
            timeout_s: self.run.timeout_s,
            seed: 0,
            decode,
            router: self.router.clone(),
        })
    }
}
