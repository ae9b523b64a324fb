//! Stage runners that read and write a run directory. The CLI is a thin
//! wrapper over these.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::arena::{ActionId, Arena, FrameEvents, Observation};
use crate::checkpoint::{
    write_json, write_text, ArtifactMeta, DiscriminatorCheckpoint, JsonLines, PolicyCheckpoint, RunLayout, Stage,
    Stamped,
};
use crate::config::RunConfig;
use crate::diversity::{policy_id, run_diversity, DiversityRun};
use crate::dqn::{Agent, QPolicy};
use crate::error::{Error, Result};
use crate::eval::{collect_random_states, diversity_matrix, tournament, DiversityReport, Entrant, TournamentReport};
use crate::pipeline::{baseline_id, finetune, train_baseline, TrainOutcome};
use crate::reward::RewardKind;
use crate::rollout::{play_round, Controller};
use crate::seed;

/// A validated config bound to an output directory.
pub struct Workflow {
    cfg: RunConfig,
    arena: Arena,
    layout: RunLayout,
    meta: ArtifactMeta,
    progress: Option<Box<dyn Fn(&str) + Send + Sync>>,
}

/// A policy loaded for evaluation, with the id it is reported under.
pub struct LoadedAgent {
    pub id: String,
    pub stage: Stage,
    pub policy: QPolicy,
}

impl Workflow {
    pub fn new(cfg: RunConfig, out: &Path) -> Result<Workflow> {
        cfg.validate()?;
        let arena = cfg.arena()?;
        let layout = RunLayout::new(out, &cfg.run_id);
        let meta = ArtifactMeta::new(&cfg);
        Ok(Workflow { cfg, arena, layout, meta, progress: None })
    }

    /// Receives one line per finished episode.
    pub fn with_progress(mut self, f: impl Fn(&str) + Send + Sync + 'static) -> Workflow {
        self.progress = Some(Box::new(f));
        self
    }

    fn report(&self, line: &str) {
        if let Some(f) = &self.progress {
            f(line);
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn arena(&self) -> &Arena {
        &self.arena
    }

    pub fn layout(&self) -> &RunLayout {
        &self.layout
    }

    /// Records the effective config next to the artifacts.
    fn write_config(&self) -> Result<()> {
        let canonical = RunConfig { out: None, ..self.cfg.clone() };
        write_text(&self.layout.config(), &(canonical.to_json() + "\n"))
    }

    /// Runs the diversity stage, checkpointing every episode.
    pub fn train_diversity(&self) -> Result<DiversityRun> {
        self.write_config()?;
        let mut log = JsonLines::create(&self.layout.metrics(Stage::Diversity, None))?;
        let run = run_diversity(&self.arena, &self.cfg.diversity, seed::derive(self.cfg.seed, "diversity"), |end| {
            let e = end.metrics.episode;
            for p in end.policies {
                let ckpt = PolicyCheckpoint::new(self.meta.clone(), Stage::Diversity, e, None, p);
                write_json(&self.layout.episode(Stage::Diversity, &p.id, e), &ckpt)?;
            }
            write_json(
                &self.layout.discriminator(e),
                &DiscriminatorCheckpoint::new(self.meta.clone(), e, end.discriminator),
            )?;
            let m = end.metrics;
            self.report(&format!(
                "diversity episode {e}: eps {:.3}, {} transitions, val acc {:.3}, test acc {:.3}",
                m.epsilon, m.transitions, m.val_acc, m.test_acc
            ));
            log.append(&Stamped { meta: self.meta.clone(), body: m })
        })?;
        let last = self.cfg.diversity.episodes - 1;
        for p in &run.policies {
            let ckpt = PolicyCheckpoint::new(self.meta.clone(), Stage::Diversity, last, None, p);
            write_json(&self.layout.selected(Stage::Diversity, &p.id), &ckpt)?;
        }
        write_json(
            &self.layout.final_discriminator(),
            &DiscriminatorCheckpoint::new(self.meta.clone(), last, &run.discriminator),
        )?;
        Ok(run)
    }

    /// The diversity stage's final checkpoints, in policy order.
    pub fn diversity_outputs(&self) -> Vec<PathBuf> {
        (0..self.cfg.diversity.k).map(|i| self.layout.selected(Stage::Diversity, &policy_id(i))).collect()
    }

    pub fn finetune_outputs(&self) -> Vec<PathBuf> {
        (0..self.cfg.diversity.k).map(|i| self.layout.selected(Stage::Finetune, &policy_id(i))).collect()
    }

    pub fn baseline_outputs(&self) -> Vec<PathBuf> {
        RewardKind::BASELINES.iter().map(|k| self.layout.selected(Stage::Baseline, &baseline_id(*k))).collect()
    }

    /// Fine-tunes each input checkpoint independently (in parallel when the
    /// thread pool allows). Each policy's seed is `finetune/{policy id}`.
    pub fn finetune(&self, inputs: &[PathBuf]) -> Result<Vec<TrainOutcome>> {
        self.write_config()?;
        let policies = inputs.iter().map(|p| PolicyCheckpoint::load_policy(p)).collect::<Result<Vec<_>>>()?;
        unique_ids(policies.iter().map(|p| p.id.as_str()))?;
        policies
            .par_iter()
            .map(|policy| {
                let seed = seed::derive_path(self.cfg.seed, &["finetune", &policy.id]);
                let (mut log, mut save) = self.episode_sink(Stage::Finetune, &policy.id)?;
                let outcome = finetune(&self.arena, policy, &self.cfg.finetune, seed, |ep| {
                    save(ep.record.episode, ep.record.mean_eval_reward, ep.policy)?;
                    log.append(&Stamped { meta: self.meta.clone(), body: ep.record })
                })?;
                self.write_best(Stage::Finetune, &outcome)?;
                Ok(outcome)
            })
            .collect()
    }

    /// Trains one fresh policy per reward kind. Seeds are `baseline/{kind}`.
    pub fn train_baselines(&self, kinds: &[RewardKind]) -> Result<Vec<TrainOutcome>> {
        self.write_config()?;
        kinds
            .par_iter()
            .map(|&kind| {
                let id = baseline_id(kind);
                let seed = seed::derive_path(self.cfg.seed, &["baseline", kind.as_str()]);
                let (mut log, mut save) = self.episode_sink(Stage::Baseline, &id)?;
                let outcome = train_baseline(&self.arena, kind, &self.cfg.baseline, seed, |ep| {
                    save(ep.record.episode, ep.record.mean_eval_reward, ep.policy)?;
                    log.append(&Stamped { meta: self.meta.clone(), body: ep.record })
                })?;
                self.write_best(Stage::Baseline, &outcome)?;
                Ok(outcome)
            })
            .collect()
    }

    #[allow(clippy::type_complexity)]
    fn episode_sink<'s>(
        &'s self,
        stage: Stage,
        id: &str,
    ) -> Result<(JsonLines, impl FnMut(usize, f64, &QPolicy) -> Result<()> + 's)> {
        let log = JsonLines::create(&self.layout.metrics(stage, Some(id)))?;
        let save = move |episode: usize, reward: f64, policy: &QPolicy| {
            let ckpt = PolicyCheckpoint::new(self.meta.clone(), stage, episode, Some(reward), policy);
            self.report(&format!("{} {} episode {episode}: mean eval reward {reward:.1}", stage.as_str(), policy.id));
            write_json(&self.layout.episode(stage, &policy.id, episode), &ckpt)
        };
        Ok((log, save))
    }

    fn write_best(&self, stage: Stage, outcome: &TrainOutcome) -> Result<()> {
        let reward = outcome.checkpoints[outcome.best_episode].mean_eval_reward;
        let ckpt = PolicyCheckpoint::new(self.meta.clone(), stage, outcome.best_episode, Some(reward), &outcome.best);
        write_json(&self.layout.selected(stage, &outcome.best.id), &ckpt)
    }

    /// Loads checkpoints for evaluation. Ids are the policy ids, prefixed
    /// with the stage when two checkpoints share one.
    pub fn load_agents(&self, paths: &[PathBuf]) -> Result<Vec<LoadedAgent>> {
        let mut agents = Vec::with_capacity(paths.len());
        for path in paths {
            let ckpt = PolicyCheckpoint::load(path)?;
            let stage = ckpt.training_stage;
            let policy = ckpt.into_policy().map_err(|e| match e {
                Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
                other => other,
            })?;
            agents.push(LoadedAgent { id: policy.id.clone(), stage, policy });
        }
        let clash = |agents: &[LoadedAgent], i: usize| agents.iter().filter(|a| a.id == agents[i].id).count() > 1;
        let clashing: Vec<bool> = (0..agents.len()).map(|i| clash(&agents, i)).collect();
        for (agent, clashes) in agents.iter_mut().zip(clashing) {
            if clashes {
                agent.id = format!("{}/{}", agent.stage.as_str(), agent.id);
            }
        }
        unique_ids(agents.iter().map(|a| a.id.as_str()))?;
        Ok(agents)
    }

    pub fn eval_diversity(&self, paths: &[PathBuf]) -> Result<DiversityReport> {
        let agents = self.load_agents(paths)?;
        let states = collect_random_states(
            &self.arena,
            self.cfg.evaluation.random_states,
            seed::derive_path(self.cfg.seed, &["eval", "random-states"]),
        )?;
        let report = diversity_matrix(&entrants(&agents), &states)?;
        let dir = self.layout.reports();
        write_json(&dir.join("diversity.json"), &Stamped { meta: self.meta.clone(), body: &report })?;
        write_text(&dir.join("diversity.csv"), &report.to_csv())?;
        Ok(report)
    }

    pub fn tournament(&self, paths: &[PathBuf]) -> Result<TournamentReport> {
        let agents = self.load_agents(paths)?;
        let ev = &self.cfg.evaluation;
        let report = tournament(
            &self.arena,
            &entrants(&agents),
            ev.matches_per_pair,
            ev.rounds_per_match,
            seed::derive_path(self.cfg.seed, &["eval", "tournament"]),
        )?;
        let dir = self.layout.reports();
        write_json(&dir.join("tournament.json"), &Stamped { meta: self.meta.clone(), body: &report })?;
        write_text(&dir.join("tournament.csv"), &report.to_csv())?;
        Ok(report)
    }

    /// Dumps every decision of a greedy match between two checkpoints as
    /// JSON lines. Returns the number of lines written.
    pub fn replay(&self, left: &Path, right: &Path, rounds: u32, out: &Path) -> Result<usize> {
        let agents = self.load_agents(&[left.to_path_buf(), right.to_path_buf()])?;
        let match_seed = seed::derive_path(self.cfg.seed, &["eval", "replay"]);
        let mut log = JsonLines::create(out)?;
        let mut lines = 0;
        for round in 0..rounds {
            let mut rng = seed::rng(seed::derive_path(match_seed, &["round", &round.to_string()]));
            let controllers = [Controller::Agent(&agents[0].policy), Controller::Agent(&agents[1].policy)];
            let trace = play_round(&self.arena, controllers, &mut rng, [true, true])?;
            let mut rows: Vec<ReplayLine<'_>> = (0..2)
                .flat_map(|player| {
                    let agent = agents[player].id.as_str();
                    trace.decisions[player].iter().map(move |d| ReplayLine {
                        round,
                        frame: d.frame,
                        player,
                        agent,
                        observation: &d.obs,
                        action: d.action,
                        events: d.events,
                    })
                })
                .collect();
            rows.sort_by_key(|r| (r.frame, r.player));
            for row in &rows {
                log.append(&Stamped { meta: self.meta.clone(), body: row })?;
            }
            lines += rows.len();
        }
        Ok(lines)
    }
}

#[derive(Serialize)]
struct ReplayLine<'a> {
    round: u32,
    frame: u32,
    player: usize,
    agent: &'a str,
    #[serde(serialize_with = "obs_seq")]
    observation: &'a Observation,
    action: ActionId,
    events: FrameEvents,
}

fn obs_seq<S: serde::Serializer>(obs: &&Observation, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(obs.iter())
}

fn entrants(agents: &[LoadedAgent]) -> Vec<Entrant<'_>> {
    agents.iter().map(|a| Entrant { id: &a.id, agent: &a.policy as &dyn Agent }).collect()
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Validation(format!("agent id `{id}` appears more than once")));
        }
    }
    Ok(())
}
