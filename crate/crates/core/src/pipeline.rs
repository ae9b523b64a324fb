//! Single-reward training against the random agent, shared by fine-tuning and
//! the hand-authored baselines, with per-episode greedy evaluation and best
//! checkpoint selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arena::Arena;
use crate::dqn::{make_target, update_policy, Agent, EpsilonSchedule, QPolicy, Sample, TargetMode, REWARD_SCALE};
use crate::error::{Error, Result};
use crate::nn::AdamState;
use crate::reward::RewardKind;
use crate::rollout::{play_round, Controller};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub episodes: usize,
    pub rounds_per_episode: usize,
    pub lr: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub anneal_episodes: usize,
    pub eval_rounds: usize,
    pub epochs: usize,
    pub batch: usize,
    pub gamma: f64,
    pub target_mode: TargetMode,
}

impl PipelineConfig {
    pub fn finetune() -> PipelineConfig {
        PipelineConfig {
            episodes: 50,
            rounds_per_episode: 100,
            lr: 1e-6,
            eps_start: 0.05,
            eps_end: 0.05,
            anneal_episodes: 0,
            eval_rounds: 9,
            epochs: 5,
            batch: 1,
            gamma: 0.95,
            target_mode: TargetMode::Bootstrap,
        }
    }

    pub fn baseline() -> PipelineConfig {
        PipelineConfig {
            episodes: 100,
            lr: 1e-5,
            eps_start: 0.95,
            eps_end: 0.05,
            anneal_episodes: 50,
            ..PipelineConfig::finetune()
        }
    }

    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule { start: self.eps_start, end: self.eps_end, anneal_episodes: self.anneal_episodes }
    }

    pub fn validate(&self, stage: &str) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("{stage}: {msg}")));
        if self.episodes == 0 || self.rounds_per_episode == 0 || self.epochs == 0 || self.batch == 0 {
            return bad("episodes, rounds_per_episode, epochs and batch must be positive");
        }
        if self.eval_rounds == 0 {
            return bad("eval_rounds must be positive");
        }
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        self.epsilon().validate()
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::finetune()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalSummary {
    pub rounds: usize,
    pub mean_reward: f64,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

impl EvalSummary {
    pub fn win_rate(&self) -> f64 {
        self.wins as f64 / self.rounds.max(1) as f64
    }
}

/// Greedy play as player 0 against the random agent. Round `i` uses the
/// seed path `round/{i}`.
pub fn evaluate(arena: &Arena, agent: &dyn Agent, kind: RewardKind, rounds: usize, seed: u64) -> Result<EvalSummary> {
    let logs = (0..rounds)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed::derive_path(seed, &["round", &i.to_string()]));
            play_round(arena, [Controller::Agent(agent), Controller::Random], &mut rng, [true, false])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = EvalSummary { rounds, ..EvalSummary::default() };
    let mut total = 0.0;
    for log in &logs {
        total += log.total_reward(0, kind);
        match log.outcome_sign(0) {
            1 => summary.wins += 1,
            -1 => summary.losses += 1,
            _ => summary.ties += 1,
        }
    }
    summary.mean_reward = total / rounds.max(1) as f64;
    Ok(summary)
}

/// Mean per-round summed (unnormalized) reward of greedy play against the
/// random agent.
pub fn evaluate_greedy(arena: &Arena, agent: &dyn Agent, kind: RewardKind, rounds: usize, seed: u64) -> Result<f64> {
    Ok(evaluate(arena, agent, kind, rounds, seed)?.mean_reward)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub episode: usize,
    pub mean_eval_reward: f64,
    pub epsilon: f64,
    pub transitions: usize,
    pub loss: f64,
}

/// Earliest episode with the highest mean evaluation reward.
pub fn select_best(records: &[CheckpointRecord]) -> Option<usize> {
    let mut best: Option<&CheckpointRecord> = None;
    for r in records {
        if best.is_none_or(|b| r.mean_eval_reward > b.mean_eval_reward) {
            best = Some(r);
        }
    }
    best.map(|r| r.episode)
}

pub struct TrainEpisode<'a> {
    pub record: &'a CheckpointRecord,
    pub policy: &'a QPolicy,
}

pub struct TrainOutcome {
    pub best: QPolicy,
    pub best_episode: usize,
    pub checkpoints: Vec<CheckpointRecord>,
    pub last: QPolicy,
}

/// The training loop shared by every single-reward stage. Seeds descend from
/// `seed` as `episode/{e}/round/{r}`, `episode/{e}/update` and
/// `episode/{e}/eval`.
pub fn train_policy(
    arena: &Arena,
    mut policy: QPolicy,
    kind: RewardKind,
    cfg: &PipelineConfig,
    seed: u64,
    mut on_episode: impl FnMut(TrainEpisode<'_>) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate("training")?;
    let schedule = cfg.epsilon();
    let mut adam = AdamState::new(policy.net(), cfg.lr);
    let mut checkpoints = Vec::with_capacity(cfg.episodes);
    let mut best: Option<(f64, usize, QPolicy)> = None;

    for episode in 0..cfg.episodes {
        let ep_seed = seed::derive_path(seed, &["episode", &episode.to_string()]);
        let eps = schedule.at(episode);
        let logs = (0..cfg.rounds_per_episode)
            .into_par_iter()
            .map(|r| {
                let mut rng = seed::rng(seed::derive_path(ep_seed, &["round", &r.to_string()]));
                let controllers = [Controller::EpsilonGreedy { policy: &policy, eps }, Controller::Random];
                play_round(arena, controllers, &mut rng, [true, false])
            })
            .collect::<Result<Vec<_>>>()?;

        let mut samples = Vec::new();
        for log in &logs {
            let rewards = log.rewards(0, kind);
            for ((obs, action, next_obs, terminal), r) in log.steps(0).zip(rewards) {
                let target = make_target(&policy, r / REWARD_SCALE, next_obs, terminal, cfg.gamma, cfg.target_mode);
                samples.push(Sample { obs: *obs, action, target });
            }
        }
        drop(logs);
        let loss = update_policy(
            &mut policy,
            &samples,
            &mut adam,
            cfg.epochs,
            cfg.batch,
            seed::derive_path(ep_seed, &["update"]),
        )?;
        let mean_eval_reward =
            evaluate_greedy(arena, &policy, kind, cfg.eval_rounds, seed::derive_path(ep_seed, &["eval"]))?;
        if !mean_eval_reward.is_finite() || !loss.is_finite() {
            return Err(Error::NonFinite(format!("training metrics at episode {episode}")));
        }
        let record = CheckpointRecord { episode, mean_eval_reward, epsilon: eps, transitions: samples.len(), loss };
        on_episode(TrainEpisode { record: &record, policy: &policy })?;
        if best.as_ref().is_none_or(|(r, _, _)| mean_eval_reward > *r) {
            best = Some((mean_eval_reward, episode, policy.clone()));
        }
        checkpoints.push(record);
    }
    let (_, best_episode, best) = best.expect("at least one episode");
    debug_assert_eq!(select_best(&checkpoints), Some(best_episode));
    Ok(TrainOutcome { best, best_episode, checkpoints, last: policy })
}

/// Fine-tunes a diversity policy on the win/loss reward.
pub fn finetune(
    arena: &Arena,
    policy: &QPolicy,
    cfg: &PipelineConfig,
    seed: u64,
    on_episode: impl FnMut(TrainEpisode<'_>) -> Result<()>,
) -> Result<TrainOutcome> {
    train_policy(arena, policy.clone(), RewardKind::FineTune, cfg, seed, on_episode)
}

/// Trains a freshly initialized policy on one of the baseline rewards.
pub fn train_baseline(
    arena: &Arena,
    kind: RewardKind,
    cfg: &PipelineConfig,
    seed: u64,
    on_episode: impl FnMut(TrainEpisode<'_>) -> Result<()>,
) -> Result<TrainOutcome> {
    if kind == RewardKind::FineTune {
        return Err(Error::Config("baselines use the aggressive, balanced or counter reward".into()));
    }
    let policy = QPolicy::new(baseline_id(kind), seed::derive(seed, "init"));
    train_policy(arena, policy, kind, cfg, seed, on_episode)
}

pub fn baseline_id(kind: RewardKind) -> String {
    format!("baseline-{kind}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{ActionId, EnvConfig, Observation};

    struct Always(ActionId);

    impl Agent for Always {
        fn act(&self, _: &Observation) -> ActionId {
            self.0
        }
    }

    fn record(episode: usize, r: f64) -> CheckpointRecord {
        CheckpointRecord { episode, mean_eval_reward: r, epsilon: 0.05, transitions: 1, loss: 0.0 }
    }

    #[test]
    fn best_is_earliest_maximum() {
        assert_eq!(select_best(&[record(0, 0.1), record(1, 0.9), record(2, 0.9)]), Some(1));
        assert_eq!(select_best(&[]), None);
    }

    #[test]
    fn default_configs() {
        let f = PipelineConfig::finetune();
        assert_eq!((f.lr, f.eval_rounds, f.episodes), (1e-6, 9, 50));
        assert_eq!(f.epsilon().at(0), 0.05);
        assert_eq!(f.epsilon().at(49), 0.05);
        let b = PipelineConfig::baseline();
        assert_eq!((b.lr, b.episodes), (1e-5, 100));
        assert_eq!(b.epsilon().at(0), 0.95);
        assert_eq!(b.epsilon().at(99), 0.05);
    }

    #[test]
    fn evaluation_is_bounded_and_reproducible() {
        let arena = Arena::with_config(EnvConfig { round_frames: 300, ..EnvConfig::default() }).unwrap();
        let stand = Always(0);
        let a = evaluate(&arena, &stand, RewardKind::FineTune, 6, 3).unwrap();
        let b = evaluate(&arena, &stand, RewardKind::FineTune, 6, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.mean_reward >= -1000.0 && a.mean_reward <= 1000.0);
        assert_eq!(a.wins + a.losses + a.ties, 6);
    }

    #[test]
    fn short_training_is_deterministic() {
        let arena = Arena::with_config(EnvConfig { round_frames: 120, ..EnvConfig::default() }).unwrap();
        let cfg = PipelineConfig { episodes: 3, rounds_per_episode: 2, eval_rounds: 2, lr: 1e-4, ..PipelineConfig::baseline() };
        let run = || {
            let mut seen = Vec::new();
            let out = train_baseline(&arena, RewardKind::Aggressive, &cfg, 5, |e| {
                seen.push(e.record.episode);
                Ok(())
            })
            .unwrap();
            assert_eq!(seen, vec![0, 1, 2]);
            out
        };
        let a = run();
        let b = run();
        assert_eq!(a.checkpoints, b.checkpoints);
        assert_eq!(a.best, b.best);
        assert_eq!(a.checkpoints.len(), 3);
        assert_eq!(Some(a.best_episode), select_best(&a.checkpoints));
        assert!(train_baseline(&arena, RewardKind::FineTune, &cfg, 5, |_| Ok(())).is_err());
    }
}
