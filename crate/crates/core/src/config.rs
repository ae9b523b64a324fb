//! Run configuration: everything needed to reproduce a run's artifacts.
//!
//! A config file is JSON. Omitted fields take the value from
//! [`RunConfig::default`] (full scale), so a desk config only has to list
//! what it changes. Unknown fields are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::arena::{Arena, EnvConfig, Roster};
use crate::diversity::DiversityConfig;
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// States collected for the action-diversity matrix.
    pub random_states: usize,
    pub matches_per_pair: u32,
    pub rounds_per_match: u32,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { random_states: 10_000, matches_per_pair: 10, rounds_per_match: 3 }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.random_states == 0 || self.rounds_per_match == 0 {
            return Err(Error::Config("evaluation: random_states and rounds_per_match must be positive".into()));
        }
        if self.matches_per_pair == 0 || self.matches_per_pair % 2 != 0 {
            return Err(Error::Config(format!(
                "evaluation: matches_per_pair must be a positive even number, got {}",
                self.matches_per_pair
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    /// Name of the run directory under the output directory.
    pub run_id: String,
    /// Master seed; every random stream descends from it.
    pub seed: u64,
    /// Move roster file. The built-in roster when absent.
    pub roster: Option<PathBuf>,
    pub env: EnvConfig,
    pub diversity: DiversityConfig,
    pub finetune: PipelineConfig,
    pub baseline: PipelineConfig,
    pub evaluation: EvaluationConfig,
    /// Output directory. Not part of the config hash.
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format_version: CONFIG_FORMAT_VERSION,
            run_id: "run".into(),
            seed: 0,
            roster: None,
            env: EnvConfig::default(),
            diversity: DiversityConfig::default(),
            finetune: PipelineConfig::finetune(),
            baseline: PipelineConfig::baseline(),
            evaluation: EvaluationConfig::default(),
            out: None,
        }
    }
}

impl RunConfig {
    /// Small enough to run end to end in minutes on one core: three policies,
    /// 10 diversity episodes of 20 rounds, 600-frame rounds.
    pub fn desk() -> RunConfig {
        let full = RunConfig::default();
        RunConfig {
            run_id: "desk".into(),
            env: EnvConfig { round_frames: 600, ..full.env },
            diversity: DiversityConfig { episodes: 10, rounds_per_episode: 20, anneal_episodes: 10, ..full.diversity },
            // short training from inflated diversity values: faster decay and more updates
            finetune: PipelineConfig {
                episodes: 50,
                rounds_per_episode: 40,
                lr: 3e-5,
                eps_start: 0.1,
                eps_end: 0.1,
                gamma: 0.8,
                ..full.finetune
            },
            baseline: PipelineConfig { episodes: 20, rounds_per_episode: 20, anneal_episodes: 10, ..full.baseline },
            evaluation: EvaluationConfig { random_states: 1000, ..full.evaluation },
            ..full
        }
    }

    /// Parses a config, filling omitted fields from the defaults.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let user: Value = serde_json::from_str(text).map_err(|e| Error::json("config", e))?;
        if !user.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        let mut merged = serde_json::to_value(RunConfig::default()).expect("config serializes");
        merge(&mut merged, user);
        let cfg: RunConfig = serde_json::from_value(merged).map_err(|e| Error::json("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json(&text).map_err(|e| match e {
            Error::Json { source, .. } => Error::json(path.display().to_string(), source),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "config format_version {} is not supported (expected {CONFIG_FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) || self.run_id == "." || self.run_id == ".." {
            return Err(Error::Config(format!("run_id `{}` is not a plain directory name", self.run_id)));
        }
        self.env.validate()?;
        self.diversity.validate()?;
        self.finetune.validate("finetune")?;
        self.baseline.validate("baseline")?;
        self.evaluation.validate()
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { out: None, ..self.clone() };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn load_roster(&self) -> Result<Roster> {
        match &self.roster {
            Some(path) => Roster::load(path),
            None => Ok(Roster::builtin()),
        }
    }

    pub fn arena(&self) -> Result<Arena> {
        Arena::new(self.load_roster()?, self.env.clone())
    }
}

/// Recursively overlays `patch` onto `base`; objects merge key by key,
/// everything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(base), Value::Object(patch)) => {
            for (key, value) in patch {
                match base.get_mut(&key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        base.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_partial_files() {
        let desk = RunConfig::desk();
        assert_eq!(RunConfig::from_json(&desk.to_json()).unwrap(), desk);

        let cfg = RunConfig::from_json(r#"{"seed": 9, "baseline": {"episodes": 4}}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        // the omitted baseline fields keep the baseline defaults, not fine-tune ones
        assert_eq!(cfg.baseline.episodes, 4);
        assert_eq!(cfg.baseline.lr, 1e-5);
        assert_eq!(cfg.baseline.eps_start, 0.95);
        assert_eq!(cfg.finetune.lr, 1e-6);
    }

    #[test]
    fn full_scale_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.diversity.k, 3);
        assert_eq!((cfg.diversity.episodes, cfg.diversity.rounds_per_episode), (50, 100));
        assert_eq!((cfg.finetune.episodes, cfg.finetune.lr, cfg.finetune.eval_rounds), (50, 1e-6, 9));
        assert_eq!((cfg.finetune.eps_start, cfg.finetune.eps_end), (0.05, 0.05));
        assert_eq!((cfg.baseline.episodes, cfg.baseline.lr, cfg.baseline.anneal_episodes), (100, 1e-5, 50));
        assert_eq!(cfg.evaluation, EvaluationConfig { random_states: 10_000, matches_per_pair: 10, rounds_per_match: 3 });
        assert_eq!(cfg.env.round_frames, 3600);
        cfg.validate().unwrap();
        RunConfig::desk().validate().unwrap();
    }

    #[test]
    fn unknown_and_invalid_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"sed": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"diversity": {"kk": 3}}"#).is_err());
        let odd = RunConfig::from_json(r#"{"evaluation": {"matches_per_pair": 9}}"#).unwrap_err();
        assert!(odd.is_validation());
        assert!(odd.to_string().contains("matches_per_pair"));
        assert!(RunConfig::from_json(r#"{"run_id": "../x"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"format_version": 2}"#).is_err());
        assert!(RunConfig::from_json("[1]").is_err());
    }

    #[test]
    fn hash_ignores_output_directory_only() {
        let a = RunConfig::desk();
        let b = RunConfig { out: Some("/elsewhere".into()), ..a.clone() };
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn missing_roster_names_the_path() {
        let cfg = RunConfig { roster: Some("/no/such/roster.json".into()), ..RunConfig::desk() };
        let err = cfg.arena().unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("/no/such/roster.json"));
    }
}
