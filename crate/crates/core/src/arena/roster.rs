//! Move roster: the 56 actions a fighter can take and their frame data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{NEUTRAL, NUM_ACTIONS};

const BUILTIN_ROSTER: &str = include_str!("../../data/roster.json");
pub const ROSTER_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveCategory {
    Neutral,
    Movement,
    Guard,
    Jump,
    NormalAttack,
    SpecialAttack,
    ProjectileAttack,
}

impl MoveCategory {
    pub fn is_attack(self) -> bool {
        matches!(
            self,
            MoveCategory::NormalAttack | MoveCategory::SpecialAttack | MoveCategory::ProjectileAttack
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackLevel {
    High,
    Mid,
    Low,
    None,
}

/// Where a move may be started. Moves issued in the wrong stance start
/// as a neutral stand instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Ground,
    Air,
    Any,
}

/// Axis-aligned box relative to a fighter's origin (feet, horizontal
/// centre). `x` grows in the facing direction, `y` grows upward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectileSpec {
    pub speed: f64,
    pub range: f64,
    pub damage: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveSpec {
    pub id: usize,
    pub name: String,
    pub category: MoveCategory,
    pub startup: u32,
    pub active: u32,
    pub recovery: u32,
    pub damage: i32,
    pub energy_cost: i32,
    pub energy_gain_on_hit: i32,
    pub energy_gain_on_being_hit: i32,
    pub attack_level: AttackLevel,
    pub hitbox: Option<Rect>,
    /// Velocity imparted on the defender, `dx` pointing away from the attacker.
    pub knockback: [f64; 2],
    pub hitstun: u32,
    pub projectile: Option<ProjectileSpec>,
    /// Forward/upward velocity while the move runs. A positive upward
    /// component launches the fighter at move start.
    pub motion: [f64; 2],
    pub stance: Stance,
    pub hurtbox: Rect,
    /// Attack levels this move blocks while it runs (guards only).
    #[serde(default)]
    pub blocks: Vec<AttackLevel>,
}

impl MoveSpec {
    pub fn total_frames(&self) -> u32 {
        self.startup + self.active + self.recovery
    }

    /// Whether frame `k` (1-based, counted from move start) is active.
    pub fn is_active_frame(&self, k: u32) -> bool {
        k > self.startup && k <= self.startup + self.active
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct RosterFile {
    format_version: u32,
    #[serde(default)]
    character: Option<String>,
    moves: Vec<MoveSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roster {
    moves: Vec<MoveSpec>,
    max_projectile_damage: i32,
}

impl Roster {
    pub fn builtin() -> Roster {
        Roster::from_json(BUILTIN_ROSTER).expect("builtin roster is valid")
    }

    pub fn load(path: &Path) -> Result<Roster> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: RosterFile = serde_json::from_str(&text)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        Roster::from_file(file)
    }

    pub fn from_json(text: &str) -> Result<Roster> {
        let file: RosterFile =
            serde_json::from_str(text).map_err(|e| Error::json("move roster", e))?;
        Roster::from_file(file)
    }

    fn from_file(file: RosterFile) -> Result<Roster> {
        if file.format_version != ROSTER_FORMAT_VERSION {
            return Err(Error::Roster(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        Roster::new(file.moves)
    }

    pub fn new(mut moves: Vec<MoveSpec>) -> Result<Roster> {
        if moves.len() != NUM_ACTIONS {
            return Err(Error::Roster(format!(
                "expected exactly {NUM_ACTIONS} moves, found {}",
                moves.len()
            )));
        }
        moves.sort_by_key(|m| m.id);
        for (expected, mv) in moves.iter().enumerate() {
            if mv.id != expected {
                return Err(Error::Roster(format!(
                    "move ids must be exactly 0..{NUM_ACTIONS}; id {expected} is missing or duplicated"
                )));
            }
            validate_move(mv)?;
        }
        if moves.iter().any(|m| (m.category == MoveCategory::Neutral) != (m.id == NEUTRAL)) {
            return Err(Error::Roster(format!(
                "move {NEUTRAL} must be the only neutral move"
            )));
        }
        let max_projectile_damage = moves
            .iter()
            .filter_map(|m| m.projectile.map(|p| p.damage))
            .max()
            .unwrap_or(1)
            .max(1);
        Ok(Roster { moves, max_projectile_damage })
    }

    pub fn get(&self, id: usize) -> &MoveSpec {
        &self.moves[id]
    }

    pub fn moves(&self) -> &[MoveSpec] {
        &self.moves
    }

    pub fn max_projectile_damage(&self) -> i32 {
        self.max_projectile_damage
    }

    pub fn find(&self, name: &str) -> Option<&MoveSpec> {
        self.moves.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> String {
        let file = RosterFile {
            format_version: ROSTER_FORMAT_VERSION,
            character: None,
            moves: self.moves.clone(),
        };
        serde_json::to_string_pretty(&file).expect("roster serializes")
    }
}

fn validate_move(mv: &MoveSpec) -> Result<()> {
    let fail = |msg: &str| Err(Error::Roster(format!("move {} ({}): {msg}", mv.id, mv.name)));
    if mv.category.is_attack() {
        if mv.active == 0 {
            return fail("attack moves need at least one active frame");
        }
        if mv.hitbox.is_none() {
            return fail("attack moves need a hitbox");
        }
    }
    let costly = matches!(
        mv.category,
        MoveCategory::SpecialAttack | MoveCategory::ProjectileAttack
    );
    if costly != (mv.energy_cost > 0) {
        return fail("energy_cost must be positive exactly for special and projectile attacks");
    }
    if (mv.category == MoveCategory::ProjectileAttack) != mv.projectile.is_some() {
        return fail("projectile data must be present exactly for projectile attacks");
    }
    if let Some(p) = mv.projectile {
        if !(p.speed > 0.0 && p.range > 0.0) || p.damage < 0 {
            return fail("projectile speed and range must be positive");
        }
    }
    if !mv.blocks.is_empty() && mv.category != MoveCategory::Guard {
        return fail("only guard moves may block");
    }
    if mv.total_frames() == 0 {
        return fail("move must last at least one frame");
    }
    if mv.damage < 0 || mv.energy_cost < 0 || mv.energy_gain_on_hit < 0 || mv.energy_gain_on_being_hit < 0 {
        return fail("damage and energy values must be non-negative");
    }
    let h = mv.hurtbox;
    let mut values = vec![mv.knockback[0], mv.knockback[1], mv.motion[0], mv.motion[1], h.x, h.y, h.w, h.h];
    if let Some(r) = mv.hitbox {
        values.extend([r.x, r.y, r.w, r.h]);
    }
    if !values.iter().all(|v| v.is_finite()) || h.w <= 0.0 || h.h <= 0.0 {
        return fail("boxes and velocities must be finite with positive hurtbox size");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_roster_has_every_id_once() {
        let roster = Roster::builtin();
        assert_eq!(roster.moves().len(), NUM_ACTIONS);
        for (i, m) in roster.moves().iter().enumerate() {
            assert_eq!(m.id, i);
        }
        for name in ["CROUCH_FB", "STAND_UPPERCUT", "FIREBALL", "SLIDING_KICK"] {
            assert!(roster.find(name).is_some(), "{name}");
        }
    }

    #[test]
    fn energy_cost_matches_category() {
        for m in Roster::builtin().moves() {
            let costly = matches!(
                m.category,
                MoveCategory::SpecialAttack | MoveCategory::ProjectileAttack
            );
            assert_eq!(costly, m.energy_cost > 0, "{}", m.name);
            if m.category.is_attack() {
                assert!(m.active > 0, "{}", m.name);
            }
        }
    }

    #[test]
    fn rejects_wrong_count_and_duplicates() {
        let roster = Roster::builtin();
        let mut moves = roster.moves().to_vec();
        moves.pop();
        assert!(matches!(Roster::new(moves.clone()), Err(Error::Roster(_))));

        let mut dup = roster.moves().to_vec();
        dup[55].id = 54;
        let err = Roster::new(dup).unwrap_err().to_string();
        assert!(err.contains("id 55"), "{err}");
    }

    #[test]
    fn rejects_free_projectile() {
        let mut moves = Roster::builtin().moves().to_vec();
        let fb = moves.iter_mut().find(|m| m.name == "FIREBALL").unwrap();
        fb.energy_cost = 0;
        assert!(Roster::new(moves).is_err());
    }

    #[test]
    fn json_round_trip() {
        let roster = Roster::builtin();
        assert_eq!(Roster::from_json(&roster.to_json()).unwrap(), roster);
    }
}
