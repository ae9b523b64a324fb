//! Playing rounds between controllers and recording each player's decisions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arena::{encode, ActionId, Arena, FrameEvents, GameState, Observation, Outcome, NUM_ACTIONS};
use crate::dqn::{Agent, QPolicy};
use crate::error::Result;
use crate::reward::{reward, Predicates, RewardKind};

/// Who picks the actions for one side of a round.
#[derive(Clone, Copy)]
pub enum Controller<'a> {
    /// Uniform over all actions at every actionable frame.
    Random,
    /// Deterministic agent, usually a greedy policy.
    Agent(&'a dyn Agent),
    EpsilonGreedy { policy: &'a QPolicy, eps: f64 },
}

impl Controller<'_> {
    fn needs_observation(&self) -> bool {
        !matches!(self, Controller::Random)
    }

    fn choose(&self, obs: &Observation, rng: &mut ChaCha8Rng) -> ActionId {
        match self {
            Controller::Random => rng.random_range(0..NUM_ACTIONS),
            Controller::Agent(agent) => agent.act(obs),
            Controller::EpsilonGreedy { policy, eps } => policy.epsilon_greedy(obs, *eps, rng),
        }
    }
}

/// One decision point. `events` covers every frame from this decision up to
/// the next one (or the end of the round).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub frame: u32,
    #[serde(serialize_with = "serialize_obs")]
    pub obs: Observation,
    pub action: ActionId,
    pub events: FrameEvents,
}

fn serialize_obs<S: serde::Serializer>(obs: &Observation, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(obs.iter())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    /// Only filled for recorded players.
    pub decisions: [Vec<Decision>; 2],
    pub final_obs: [Observation; 2],
    pub outcome: Outcome,
    pub frames: u32,
    pub final_hp: [i32; 2],
}

impl RoundLog {
    /// +1 win, -1 loss, 0 tie, from `player`'s side.
    pub fn outcome_sign(&self, player: usize) -> i32 {
        match self.outcome.winner() {
            Some(w) if w == player => 1,
            Some(_) => -1,
            None => 0,
        }
    }

    /// Unnormalized reward for each of `player`'s decisions; the last one
    /// carries the round outcome.
    pub fn rewards(&self, player: usize, kind: RewardKind) -> Vec<f64> {
        let decisions = &self.decisions[player];
        let t = self.outcome_sign(player);
        decisions
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let terminal = if i + 1 == decisions.len() { t } else { 0 };
                reward(kind, terminal, Predicates::from(d.events))
            })
            .collect()
    }

    pub fn total_reward(&self, player: usize, kind: RewardKind) -> f64 {
        self.rewards(player, kind).iter().sum()
    }

    /// `(obs, action, next_obs, terminal)` for each decision of `player`.
    pub fn steps(&self, player: usize) -> impl Iterator<Item = (&Observation, ActionId, &Observation, bool)> + '_ {
        let decisions = &self.decisions[player];
        decisions.iter().enumerate().map(move |(i, d)| match decisions.get(i + 1) {
            Some(next) => (&d.obs, d.action, &next.obs, false),
            None => (&d.obs, d.action, &self.final_obs[player], true),
        })
    }
}

/// Plays one round to completion. Actions are drawn from `rng` in player
/// order (0 then 1) on each frame where that player is actionable.
pub fn play_round(
    arena: &Arena,
    controllers: [Controller<'_>; 2],
    rng: &mut ChaCha8Rng,
    record: [bool; 2],
) -> Result<RoundLog> {
    let mut state = arena.reset();
    let mut decisions: [Vec<Decision>; 2] = [Vec::new(), Vec::new()];
    while !state.outcome.is_over() {
        let frame = state.round_frames - state.frames_remaining;
        let mut actions = [None, None];
        for p in 0..2 {
            if !state.is_actionable(p) {
                continue;
            }
            let obs = if record[p] || controllers[p].needs_observation() {
                observe(arena, &state, p)
            } else {
                [0.0; crate::arena::OBS_LEN]
            };
            let action = controllers[p].choose(&obs, rng);
            actions[p] = Some(action);
            if record[p] {
                decisions[p].push(Decision { frame, obs, action, events: FrameEvents::default() });
            }
        }
        arena.tick(&mut state, actions)?;
        for p in 0..2 {
            if let Some(last) = decisions[p].last_mut() {
                last.events.merge(state.frame_events[p]);
            }
        }
    }
    Ok(RoundLog {
        decisions,
        final_obs: [observe(arena, &state, 0), observe(arena, &state, 1)],
        outcome: state.outcome,
        frames: state.round_frames - state.frames_remaining,
        final_hp: [state.fighters[0].hp, state.fighters[1].hp],
    })
}

pub fn observe(arena: &Arena, state: &GameState, player: usize) -> Observation {
    encode(state, player, arena.config(), arena.roster())
}
