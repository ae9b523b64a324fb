use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Facing {
    Left,
    Right,
}

impl Facing {
    pub fn sign(self) -> f64 {
        match self {
            Facing::Left => -1.0,
            Facing::Right => 1.0,
        }
    }

    pub fn flipped(self) -> Facing {
        match self {
            Facing::Left => Facing::Right,
            Facing::Right => Facing::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FighterState {
    pub hp: i32,
    pub energy: i32,
    /// Feet position, stage units. `y` is height above the floor.
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub facing: Facing,
    pub grounded: bool,
    /// Action id of the move currently executing.
    pub status: usize,
    pub status_frames_left: u32,
    /// 1-based frame index of the running move; 0 once it has finished.
    pub move_frame: u32,
    /// The running move has already connected (or spawned its projectile).
    pub move_spent: bool,
    /// Frames of hit reaction left. No move can start while positive.
    pub hitstun: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projectile {
    pub owner: usize,
    /// Centre of the projectile box.
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub size: [f64; 2],
    pub damage: i32,
    pub move_id: usize,
    pub frames_left: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ongoing,
    P0Win,
    P1Win,
    Tie,
}

impl Outcome {
    pub fn is_over(self) -> bool {
        self != Outcome::Ongoing
    }

    pub fn winner(self) -> Option<usize> {
        match self {
            Outcome::P0Win => Some(0),
            Outcome::P1Win => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEvents {
    pub dealt_damage: bool,
    pub took_damage: bool,
    pub dealt_damage_while_opponent_mid_move: bool,
}

impl FrameEvents {
    pub fn merge(&mut self, other: FrameEvents) {
        self.dealt_damage |= other.dealt_damage;
        self.took_damage |= other.took_damage;
        self.dealt_damage_while_opponent_mid_move |= other.dealt_damage_while_opponent_mid_move;
    }

    pub fn any(self) -> bool {
        self.dealt_damage || self.took_damage || self.dealt_damage_while_opponent_mid_move
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub fighters: [FighterState; 2],
    /// Oldest first.
    pub projectiles: Vec<Projectile>,
    pub frames_remaining: u32,
    pub round_frames: u32,
    pub outcome: Outcome,
    pub frame_events: [FrameEvents; 2],
}

impl GameState {
    /// A fighter may start a new move: it is idle in the neutral stand or its
    /// move has run out, and it is not reeling from a hit.
    pub fn is_actionable(&self, player: usize) -> bool {
        let f = &self.fighters[player];
        f.hitstun == 0 && (f.status == super::NEUTRAL || f.status_frames_left == 0)
    }

    /// +1 if `perspective` won, -1 if it lost, 0 while ongoing or on a tie.
    pub fn outcome_sign(&self, perspective: usize) -> i32 {
        match self.outcome.winner() {
            Some(w) if w == perspective => 1,
            Some(_) => -1,
            None => 0,
        }
    }
}
