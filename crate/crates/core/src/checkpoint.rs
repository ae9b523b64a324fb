//! On-disk artifacts: policy and discriminator checkpoints, JSON-lines logs
//! and reports, and the run directory layout.
//!
//! ```text
//! {out}/{run_id}/
//!   config.json
//!   diversity/metrics.jsonl
//!   diversity/{policy_id}/ep{N}.json, final.json
//!   diversity/discriminator/ep{N}.json, final.json
//!   finetune/{policy_id}/ep{N}.json, best.json, metrics.jsonl
//!   baseline/{policy_id}/ep{N}.json, best.json, metrics.jsonl
//!   reports/
//! ```
//!
//! Every artifact carries `format_version`, `config_hash` and `seed`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::diversity::Discriminator;
use crate::dqn::QPolicy;
use crate::error::{Error, Result};
use crate::nn::WeightFile;

pub const ARTIFACT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
}

impl ArtifactMeta {
    pub fn new(cfg: &RunConfig) -> ArtifactMeta {
        ArtifactMeta { format_version: ARTIFACT_FORMAT_VERSION, config_hash: cfg.hash(), seed: cfg.seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Diversity,
    Finetune,
    Baseline,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Diversity => "diversity",
            Stage::Finetune => "finetune",
            Stage::Baseline => "baseline",
        }
    }
}

/// An artifact body with the provenance header flattened into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    #[serde(flatten)]
    pub meta: ArtifactMeta,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    #[serde(flatten)]
    pub meta: ArtifactMeta,
    pub policy_id: String,
    pub training_stage: Stage,
    pub episode: usize,
    /// Greedy evaluation result; absent for diversity checkpoints.
    pub mean_eval_reward: Option<f64>,
    pub weights: WeightFile,
}

impl PolicyCheckpoint {
    pub fn new(meta: ArtifactMeta, stage: Stage, episode: usize, mean_eval_reward: Option<f64>, policy: &QPolicy) -> Self {
        PolicyCheckpoint {
            meta,
            policy_id: policy.id.clone(),
            training_stage: stage,
            episode,
            mean_eval_reward,
            weights: WeightFile::from(policy.net()),
        }
    }

    pub fn into_policy(self) -> Result<QPolicy> {
        QPolicy::from_net(self.policy_id, self.weights.into_net()?)
    }

    pub fn load(path: &Path) -> Result<PolicyCheckpoint> {
        read_artifact(path)
    }

    /// Loads and validates a checkpoint, errors naming the file.
    pub fn load_policy(path: &Path) -> Result<QPolicy> {
        PolicyCheckpoint::load(path)?.into_policy().map_err(|e| in_file(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorCheckpoint {
    #[serde(flatten)]
    pub meta: ArtifactMeta,
    pub episode: usize,
    pub weights: WeightFile,
}

impl DiscriminatorCheckpoint {
    pub fn new(meta: ArtifactMeta, episode: usize, disc: &Discriminator) -> Self {
        DiscriminatorCheckpoint { meta, episode, weights: WeightFile::from(disc.net()) }
    }

    pub fn load(path: &Path) -> Result<DiscriminatorCheckpoint> {
        read_artifact(path)
    }

    pub fn into_discriminator(self) -> Result<Discriminator> {
        Discriminator::from_net(self.weights.into_net()?)
    }
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<u32>,
}

/// Reads a stamped artifact, checking the format version before the body.
pub fn read_artifact<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let probe: VersionProbe =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    match probe.format_version {
        Some(ARTIFACT_FORMAT_VERSION) => {}
        Some(v) => {
            return Err(Error::Validation(format!(
                "{}: artifact format_version {v} is not supported (expected {ARTIFACT_FORMAT_VERSION})",
                path.display()
            )))
        }
        None => return Err(Error::Validation(format!("{}: missing format_version", path.display()))),
    }
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

/// Pretty JSON plus a trailing newline; parent directories are created.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Append-only JSON-lines writer. Creating one truncates the file.
pub struct JsonLines {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonLines {
    pub fn create(path: &Path) -> Result<JsonLines> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(JsonLines { path: path.to_path_buf(), out: BufWriter::new(file) })
    }

    /// Writes one line and flushes, so a crashed run keeps its log.
    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let line = serde_json::to_string(record).map_err(|e| Error::json(self.path.display().to_string(), e))?;
        writeln!(self.out, "{line}").and_then(|_| self.out.flush()).map_err(|e| Error::io(&self.path, e))
    }
}

/// Paths inside one run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunLayout {
    root: PathBuf,
}

impl RunLayout {
    pub fn new(out: &Path, run_id: &str) -> RunLayout {
        RunLayout { root: out.join(run_id) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn stage(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.as_str())
    }

    pub fn policy_dir(&self, stage: Stage, policy_id: &str) -> PathBuf {
        self.stage(stage).join(policy_id)
    }

    pub fn episode(&self, stage: Stage, policy_id: &str, episode: usize) -> PathBuf {
        self.policy_dir(stage, policy_id).join(format!("ep{episode}.json"))
    }

    /// The checkpoint a stage hands on: `final.json` for diversity (fixed
    /// budget), `best.json` for the evaluated stages.
    pub fn selected(&self, stage: Stage, policy_id: &str) -> PathBuf {
        let name = if stage == Stage::Diversity { "final.json" } else { "best.json" };
        self.policy_dir(stage, policy_id).join(name)
    }

    pub fn discriminator(&self, episode: usize) -> PathBuf {
        self.policy_dir(Stage::Diversity, "discriminator").join(format!("ep{episode}.json"))
    }

    pub fn final_discriminator(&self) -> PathBuf {
        self.policy_dir(Stage::Diversity, "discriminator").join("final.json")
    }

    /// Diversity logs one file for all policies; the other stages log per policy.
    pub fn metrics(&self, stage: Stage, policy_id: Option<&str>) -> PathBuf {
        match policy_id {
            Some(id) => self.policy_dir(stage, id).join("metrics.jsonl"),
            None => self.stage(stage).join("metrics.jsonl"),
        }
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
}
