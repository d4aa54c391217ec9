use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::env::EnvConfig;

/// How to reach an external actor or critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    /// `stdio` (spawn `command`) or `http` (POST to `url`).
    pub transport: TransportKind,
    #[serde(default)]
    pub command: Vec<String>,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Include the shield's allowed set in actor requests.
    #[serde(default)]
    pub send_allowed_actions: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Stdio,
    Http,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_episodes() -> usize {
    5
}

fn default_max_rounds() -> u32 {
    3
}

fn default_max_steps() -> usize {
    200
}

fn default_retry_budget() -> usize {
    5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Experiment configuration, read from TOML.
///
/// ```toml
/// policy = "random_allowed"
/// laws = ["bundled:saycan_hard", "bundled:saycan_soft"]
/// episodes = 5
/// seeds = [0, 1, 2, 3, 4]
/// max_rounds = 3
/// max_steps = 200
/// retry_budget = 5
/// output_dir = "runs/saycan"
///
/// [env]
/// deterministic = true
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub policy: String,
    /// Law files, or `bundled:NAME` for a shipped fixture.
    #[serde(default)]
    pub laws: Vec<String>,
    /// Optional vocabulary file; the bundled one is used otherwise.
    #[serde(default)]
    pub vocabulary: Option<PathBuf>,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    /// One seed per episode; defaults to `0..episodes`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Critic rounds after the first batch of episodes.
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_retry_budget")]
    pub retry_budget: usize,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub external: Option<ExternalConfig>,
    #[serde(default)]
    pub critic_external: Option<ExternalConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = super::read(path)?;
        let mut config = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        self.output_dir = rebase(base, &self.output_dir);
        self.vocabulary = self.vocabulary.as_deref().map(|p| rebase(base, p));
        for law in &mut self.laws {
            if !law.starts_with("bundled:") && Path::new(law.as_str()).is_relative() {
                *law = base.join(law.as_str()).to_string_lossy().into_owned();
            }
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.episodes == 0 {
            return fail("episodes must be at least 1".into());
        }
        if self.max_steps == 0 || self.retry_budget == 0 {
            return fail("max_steps and retry_budget must be at least 1".into());
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.episodes {
                return fail(format!("{} seeds given for {} episodes", seeds.len(), self.episodes));
            }
            let mut sorted = seeds.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != seeds.len() {
                return fail("seeds must be distinct".into());
            }
        }
        if self.policy == "external" && self.external.is_none() {
            return fail("policy `external` needs an [external] section".into());
        }
        self.env.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| (0..self.episodes as u64).collect())
    }

    /// Replaces the seeds with `base, base + 1, ...`.
    pub fn override_seed(&mut self, base: u64) {
        self.seeds = Some((0..self.episodes as u64).map(|i| base + i).collect());
    }
}

fn rebase(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
