//! Reward functions. `T` is the round outcome from the agent's side (+1 win,
//! -1 loss, 0 otherwise); `A`, `B`, `C` are event predicates collected since
//! the agent's previous decision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arena::FrameEvents;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    FineTune,
    Aggressive,
    Balanced,
    Counter,
}

/// Per-decision constant subtracted by the baseline rewards.
pub const EXISTENTIAL_PENALTY: f64 = 1.0;

impl RewardKind {
    pub const BASELINES: [RewardKind; 3] = [RewardKind::Aggressive, RewardKind::Balanced, RewardKind::Counter];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardKind::FineTune => "fine_tune",
            RewardKind::Aggressive => "aggressive",
            RewardKind::Balanced => "balanced",
            RewardKind::Counter => "counter",
        }
    }

    pub fn penalty(self) -> f64 {
        match self {
            RewardKind::FineTune => 0.0,
            _ => EXISTENTIAL_PENALTY,
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.replace('-', "_").as_str() {
            "fine_tune" | "finetune" => Ok(RewardKind::FineTune),
            "aggressive" => Ok(RewardKind::Aggressive),
            "balanced" => Ok(RewardKind::Balanced),
            "counter" => Ok(RewardKind::Counter),
            _ => Err(Error::Config(format!("unknown reward kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Predicates {
    /// Dealt damage to the opponent.
    pub a: bool,
    /// Was dealt damage.
    pub b: bool,
    /// Dealt damage while the opponent was executing an attack.
    pub c: bool,
}

impl From<FrameEvents> for Predicates {
    fn from(e: FrameEvents) -> Predicates {
        Predicates { a: e.dealt_damage, b: e.took_damage, c: e.dealt_damage_while_opponent_mid_move }
    }
}

pub fn reward(kind: RewardKind, t: i32, p: Predicates) -> f64 {
    let (a, b, c) = (f64::from(u8::from(p.a)), f64::from(u8::from(p.b)), f64::from(u8::from(p.c)));
    let terminal = 1000.0 * f64::from(t);
    match kind {
        RewardKind::FineTune => terminal,
        RewardKind::Aggressive => terminal + 100.0 * a - kind.penalty(),
        RewardKind::Balanced => terminal + 100.0 * a - 50.0 * b - kind.penalty(),
        RewardKind::Counter => terminal + 100.0 * c - kind.penalty(),
    }
}
