use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::AgentConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::rules::ComfortRuleConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    /// Training epochs; one epoch is one day of interaction.
    pub epochs: usize,
    /// Held-out three-day episodes used for evaluation.
    pub eval_episodes: usize,
    /// Run seeds. Each seed is an independent agent on the same weather.
    pub seeds: Vec<u64>,
    /// Seed of the weather series and of the evaluation initial states.
    pub weather_seed: u64,
    /// Days of weather available for training episodes.
    pub train_days: usize,
    /// Evaluate every this many epochs.
    pub eval_every: usize,
    /// Uniform-random environment steps before learning starts.
    pub warmup_steps: usize,
    /// Hysteresis of the on/off baseline that sets the threshold, °C.
    pub baseline_hysteresis: f64,
    /// Stop once the threshold is reached.
    pub stop_at_threshold: bool,
    /// Fill `wall_ms` with measured time; otherwise it is written as 0 so
    /// metrics files are reproducible byte for byte.
    pub record_wall_time: bool,
    /// Write every applied action and its bounds to `actions.csv`.
    pub log_actions: bool,
    /// Save the final agent as `agent.ckpt`.
    pub save_checkpoint: bool,
    /// Optional external weather file replacing the generator.
    pub weather_file: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            eval_episodes: 20,
            seeds: vec![0],
            weather_seed: 0,
            train_days: 180,
            eval_every: 1,
            warmup_steps: 1000,
            baseline_hysteresis: 0.5,
            stop_at_threshold: false,
            record_wall_time: false,
            log_actions: false,
            save_checkpoint: true,
            weather_file: None,
            output_dir: None,
        }
    }
}

/// Complete description of one training configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Free-form name used in reports and output paths.
    pub label: Option<String>,
    pub agent: AgentConfig,
    pub rule: ComfortRuleConfig,
    pub env: EnvConfig,
    pub harness: HarnessConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            if self.agent.variant.uses_rules() {
                format!(
                    "{}_{}_{}",
                    self.agent.variant.as_str(),
                    self.rule.m,
                    self.rule.n
                )
            } else {
                self.agent.variant.as_str().to_string()
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.agent.validate()?;
        self.rule.validate()?;
        self.env.validate()?;
        for seg in &self.env.schedule.segments {
            self.rule.check_band(seg.lower, seg.upper)?;
        }
        let h = &self.harness;
        if h.eval_episodes == 0 {
            return Err(Error::config("harness.eval_episodes", "must be >= 1"));
        }
        if h.eval_every == 0 {
            return Err(Error::config("harness.eval_every", "must be >= 1"));
        }
        if h.seeds.is_empty() {
            return Err(Error::config("harness.seeds", "at least one seed required"));
        }
        let mut sorted = h.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != h.seeds.len() {
            return Err(Error::config("harness.seeds", "seeds must be distinct"));
        }
        if h.train_days < self.env.episode_days + 1 {
            return Err(Error::config(
                "harness.train_days",
                "must exceed the episode length",
            ));
        }
        if !(h.baseline_hysteresis >= 0.0) {
            return Err(Error::config("harness.baseline_hysteresis", "must be >= 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Variant;

    #[test]
    fn parses_sections() {
        let cfg = RunConfig::from_toml_str(
            r#"
            [agent]
            variant = "ea"
            [rule]
            m = 0.0
            n = 0.5
            [env]
            alpha = 0.1
            [harness]
            epochs = 3
            seeds = [1, 2]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.agent.variant, Variant::Efficient);
        assert_eq!(cfg.agent.lambda(), 100.0);
        assert_eq!(cfg.rule.n, 0.5);
        assert_eq!(cfg.env.alpha, 0.1);
        assert_eq!(cfg.harness.seeds, vec![1, 2]);
        assert_eq!(cfg.label(), "ea_0_0.5");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml_str("[agent]\nlearning_rte = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("learning_rte"), "{err}");
        let err = RunConfig::from_toml_str("[bogus]\nx = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn invalid_values_are_named() {
        let err = RunConfig::from_toml_str("[rule]\nm = 0.5\nn = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("rule.n"), "{err}");
        let err = RunConfig::from_toml_str("[harness]\nseeds = [1, 1]\n").unwrap_err();
        assert!(err.to_string().contains("harness.seeds"), "{err}");
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }
}
