//! Deterministic frame-stepped fighting-game arena.
//!
//! Two fighters share a flat stage. Each tick advances one frame: new moves
//! start for actionable fighters, motion and gravity integrate, projectiles
//! fly, and active hitboxes are tested against hurtboxes. The simulation uses
//! no randomness at all; given the same inputs every run is bit-identical.

mod observation;
mod roster;
mod state;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use observation::{encode, Observation, OBS_LEN};
pub use roster::{AttackLevel, MoveCategory, MoveSpec, ProjectileSpec, Rect, Roster, Stance};
pub use state::{Facing, FighterState, FrameEvents, GameState, Outcome, Projectile};

pub type ActionId = usize;

pub const NUM_ACTIONS: usize = 56;
/// The neutral stand.
pub const NEUTRAL: ActionId = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub max_hp: i32,
    pub max_energy: i32,
    pub round_frames: u32,
    pub stage_width: f64,
    pub stage_height: f64,
    pub gravity: f64,
    /// Speed mapped to the ends of the observation's velocity range.
    pub max_speed: f64,
    /// Spawn x of player 0 and player 1.
    pub spawn_x: [f64; 2],
    /// Half the width of the body push box.
    pub body_half_width: f64,
    pub friction: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            max_hp: 400,
            max_energy: 300,
            round_frames: 3600,
            stage_width: 960.0,
            stage_height: 640.0,
            gravity: 1.0,
            max_speed: 20.0,
            spawn_x: [330.0, 630.0],
            body_half_width: 25.0,
            friction: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("env: {msg}")));
        if self.max_hp <= 0 || self.max_energy <= 0 {
            return bad("max_hp and max_energy must be positive");
        }
        if self.round_frames == 0 {
            return bad("round_frames must be positive");
        }
        let dims = [
            self.stage_width,
            self.stage_height,
            self.gravity,
            self.max_speed,
            self.body_half_width,
        ];
        if dims.iter().any(|v| !v.is_finite() || *v <= 0.0) || !self.friction.is_finite() {
            return bad("stage dimensions, gravity, max_speed and body_half_width must be positive");
        }
        let lo = self.body_half_width;
        let hi = self.stage_width - self.body_half_width;
        if self.spawn_x.iter().any(|x| *x < lo || *x > hi) || self.spawn_x[0] >= self.spawn_x[1] {
            return bad("spawn positions must lie inside the stage with player 0 on the left");
        }
        Ok(())
    }
}

struct Hit {
    attacker: usize,
    damage: i32,
    gain_attacker: i32,
    gain_defender: i32,
    level: AttackLevel,
    knockback: [f64; 2],
    direction: f64,
    hitstun: u32,
}

/// The rules of the game: a move roster plus physical constants. Cheap to
/// clone and share across threads; all mutable state lives in [`GameState`].
#[derive(Debug, Clone)]
pub struct Arena {
    roster: Arc<Roster>,
    config: EnvConfig,
}

impl Arena {
    pub fn new(roster: Roster, config: EnvConfig) -> Result<Arena> {
        config.validate()?;
        Ok(Arena { roster: Arc::new(roster), config })
    }

    pub fn with_config(config: EnvConfig) -> Result<Arena> {
        Arena::new(Roster::builtin(), config)
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    /// Start of a round. The initial state does not depend on any seed.
    pub fn reset(&self) -> GameState {
        let c = &self.config;
        let fighter = |x: f64, facing| FighterState {
            hp: c.max_hp,
            energy: 0,
            pos: [x, 0.0],
            vel: [0.0, 0.0],
            facing,
            grounded: true,
            status: NEUTRAL,
            status_frames_left: 0,
            move_frame: 0,
            move_spent: false,
            hitstun: 0,
        };
        GameState {
            fighters: [
                fighter(c.spawn_x[0], Facing::Right),
                fighter(c.spawn_x[1], Facing::Left),
            ],
            projectiles: Vec::new(),
            frames_remaining: c.round_frames,
            round_frames: c.round_frames,
            outcome: Outcome::Ongoing,
            frame_events: [FrameEvents::default(); 2],
        }
    }

    pub fn encode(&self, state: &GameState, perspective: usize) -> Observation {
        encode(state, perspective, &self.config, &self.roster)
    }

    /// Advance one frame. An action is only consumed when its fighter is
    /// actionable; otherwise it is ignored.
    pub fn tick(&self, state: &mut GameState, actions: [Option<ActionId>; 2]) -> Result<()> {
        if state.outcome.is_over() {
            return Err(Error::RoundOver);
        }
        if let Some(a) = actions.iter().flatten().find(|a| **a >= NUM_ACTIONS) {
            return Err(Error::Config(format!("action id {a} out of range")));
        }
        state.frame_events = [FrameEvents::default(); 2];

        for p in 0..2 {
            let actionable = state.is_actionable(p);
            let opponent_x = state.fighters[1 - p].pos[0];
            let fighter = &mut state.fighters[p];
            if fighter.hitstun > 0 {
                fighter.hitstun -= 1;
            } else if let (true, Some(action)) = (actionable, actions[p]) {
                self.start_move(fighter, action, opponent_x);
            } else if fighter.status_frames_left > 0 {
                fighter.status_frames_left -= 1;
                fighter.move_frame += 1;
            } else {
                fighter.status = NEUTRAL;
                fighter.move_frame = 0;
            }
        }

        for p in 0..2 {
            self.integrate(&mut state.fighters[p]);
        }
        self.separate(&mut state.fighters);
        for p in 0..2 {
            let opponent_x = state.fighters[1 - p].pos[0];
            let f = &mut state.fighters[p];
            if f.grounded && f.hitstun == 0 && f.move_frame == 0 {
                face_towards(f, opponent_x);
            }
        }

        self.advance_projectiles(state);
        let hits = self.detect_hits(state);
        self.apply_hits(state, hits);

        state.frames_remaining -= 1;
        state.outcome = self.judge(state);
        Ok(())
    }

    fn start_move(&self, fighter: &mut FighterState, action: ActionId, opponent_x: f64) {
        let requested = self.roster.get(action);
        let stance_ok = match requested.stance {
            Stance::Ground => fighter.grounded,
            Stance::Air => !fighter.grounded,
            Stance::Any => true,
        };
        let spec = if stance_ok && fighter.energy >= requested.energy_cost {
            requested
        } else {
            self.roster.get(NEUTRAL)
        };
        if fighter.grounded {
            face_towards(fighter, opponent_x);
        }
        fighter.energy -= spec.energy_cost;
        fighter.status = spec.id;
        fighter.status_frames_left = spec.total_frames() - 1;
        fighter.move_frame = 1;
        fighter.move_spent = false;

        let dir = fighter.facing.sign();
        let [mx, my] = spec.motion;
        if my > 0.0 && fighter.grounded {
            fighter.vel = [mx * dir, my];
            fighter.grounded = false;
        } else if !fighter.grounded && (mx != 0.0 || my != 0.0) {
            fighter.vel = [mx * dir, my];
        }
    }

    fn integrate(&self, f: &mut FighterState) {
        let c = &self.config;
        let spec = self.roster.get(f.status);
        if f.grounded {
            f.vel[1] = 0.0;
            if f.hitstun > 0 {
                let vx = f.vel[0];
                f.vel[0] = vx.signum() * (vx.abs() - c.friction).max(0.0);
            } else if f.move_frame > 0 && spec.motion[0] != 0.0 && spec.motion[1] <= 0.0 {
                f.vel[0] = spec.motion[0] * f.facing.sign();
            } else {
                f.vel[0] = 0.0;
            }
        } else {
            f.vel[1] -= c.gravity;
        }
        f.pos[0] += f.vel[0];
        f.pos[1] += f.vel[1];

        if !f.grounded && f.pos[1] <= 0.0 {
            f.pos[1] = 0.0;
            f.vel = [if f.hitstun > 0 { f.vel[0] } else { 0.0 }, 0.0];
            f.grounded = true;
            if spec.stance == Stance::Air {
                f.status = NEUTRAL;
                f.status_frames_left = 0;
                f.move_frame = 0;
            }
        }
        f.pos[0] = f.pos[0].clamp(c.body_half_width, c.stage_width - c.body_half_width);
        f.pos[1] = f.pos[1].clamp(0.0, c.stage_height);
    }

    /// Push overlapping bodies apart, keeping both on stage.
    fn separate(&self, fighters: &mut [FighterState; 2]) {
        let c = &self.config;
        let min_gap = 2.0 * c.body_half_width;
        let body_height = self.roster.get(NEUTRAL).hurtbox.h;
        let dx = fighters[1].pos[0] - fighters[0].pos[0];
        let dy = (fighters[1].pos[1] - fighters[0].pos[1]).abs();
        if dy >= body_height || dx.abs() >= min_gap {
            return;
        }
        let left = if dx > 0.0 || (dx == 0.0 && fighters[0].facing == Facing::Right) { 0 } else { 1 };
        let right = 1 - left;
        let centre = (fighters[0].pos[0] + fighters[1].pos[0]) / 2.0;
        let lo = c.body_half_width;
        let hi = c.stage_width - c.body_half_width;
        let mut left_x = centre - min_gap / 2.0;
        let mut right_x = centre + min_gap / 2.0;
        if left_x < lo {
            left_x = lo;
            right_x = lo + min_gap;
        } else if right_x > hi {
            right_x = hi;
            left_x = hi - min_gap;
        }
        fighters[left].pos[0] = left_x;
        fighters[right].pos[0] = right_x;
    }

    fn advance_projectiles(&self, state: &mut GameState) {
        let width = self.config.stage_width;
        for proj in &mut state.projectiles {
            proj.pos[0] += proj.vel[0];
            proj.pos[1] += proj.vel[1];
            proj.frames_left = proj.frames_left.saturating_sub(1);
        }
        state.projectiles.retain(|p| {
            p.frames_left > 0 && p.pos[0] + p.size[0] / 2.0 >= 0.0 && p.pos[0] - p.size[0] / 2.0 <= width
        });

        for (owner, f) in state.fighters.iter_mut().enumerate() {
            let spec = self.roster.get(f.status);
            let (Some(ps), Some(hb)) = (spec.projectile, spec.hitbox) else { continue };
            if f.move_spent || f.hitstun > 0 || !spec.is_active_frame(f.move_frame) {
                continue;
            }
            let dir = f.facing.sign();
            let (x0, x1) = world_span(f.pos[0], dir, hb.x, hb.w);
            state.projectiles.push(Projectile {
                owner,
                pos: [(x0 + x1) / 2.0, f.pos[1] + hb.y + hb.h / 2.0],
                vel: [ps.speed * dir, 0.0],
                size: [hb.w, hb.h],
                damage: ps.damage,
                move_id: spec.id,
                frames_left: (ps.range / ps.speed).ceil() as u32,
            });
            f.move_spent = true;
        }
    }

    fn detect_hits(&self, state: &mut GameState) -> Vec<Hit> {
        let mut hits = Vec::new();
        for p in 0..2 {
            let f = &state.fighters[p];
            let spec = self.roster.get(f.status);
            if spec.category == MoveCategory::ProjectileAttack
                || !spec.category.is_attack()
                || f.move_spent
                || f.hitstun > 0
                || !spec.is_active_frame(f.move_frame)
            {
                continue;
            }
            let Some(hb) = spec.hitbox else { continue };
            let dir = f.facing.sign();
            let (x0, x1) = world_span(f.pos[0], dir, hb.x, hb.w);
            let y0 = f.pos[1] + hb.y;
            if overlaps((x0, x1, y0, y0 + hb.h), self.hurtbox(&state.fighters[1 - p])) {
                hits.push(Hit {
                    attacker: p,
                    damage: spec.damage,
                    gain_attacker: spec.energy_gain_on_hit,
                    gain_defender: spec.energy_gain_on_being_hit,
                    level: spec.attack_level,
                    knockback: spec.knockback,
                    direction: dir,
                    hitstun: spec.hitstun,
                });
            }
        }
        for p in 0..2 {
            state.fighters[p].move_spent |= hits.iter().any(|h| h.attacker == p);
        }

        let hurtboxes = [self.hurtbox(&state.fighters[0]), self.hurtbox(&state.fighters[1])];
        state.projectiles.retain(|proj| {
            let defender = 1 - proj.owner;
            let body = (
                proj.pos[0] - proj.size[0] / 2.0,
                proj.pos[0] + proj.size[0] / 2.0,
                proj.pos[1] - proj.size[1] / 2.0,
                proj.pos[1] + proj.size[1] / 2.0,
            );
            if !overlaps(body, hurtboxes[defender]) {
                return true;
            }
            let spec = self.roster.get(proj.move_id);
            hits.push(Hit {
                attacker: proj.owner,
                damage: proj.damage,
                gain_attacker: spec.energy_gain_on_hit,
                gain_defender: spec.energy_gain_on_being_hit,
                level: spec.attack_level,
                knockback: spec.knockback,
                direction: proj.vel[0].signum(),
                hitstun: spec.hitstun,
            });
            false
        });
        hits
    }

    fn apply_hits(&self, state: &mut GameState, hits: Vec<Hit>) {
        let max_energy = self.config.max_energy;
        // Guarding and "mid-move" are judged on the state before any hit lands.
        let before = [state.fighters[0].clone(), state.fighters[1].clone()];
        for hit in hits {
            let a = hit.attacker;
            let d = 1 - a;
            let guard = self.roster.get(before[d].status);
            let blocked = guard.category == MoveCategory::Guard
                && before[d].hitstun == 0
                && before[d].move_frame > 0
                && guard.blocks.contains(&hit.level);
            let mid_move = self.roster.get(before[d].status).category.is_attack()
                && before[d].status_frames_left > 0;

            let attacker = &mut state.fighters[a];
            attacker.energy = (attacker.energy + hit.gain_attacker).min(max_energy);
            let defender = &mut state.fighters[d];
            defender.energy = (defender.energy + hit.gain_defender).min(max_energy);

            if blocked {
                if defender.grounded {
                    defender.vel[0] = hit.knockback[0] * hit.direction * 0.5;
                }
                continue;
            }
            defender.hp = (defender.hp - hit.damage).max(0);
            defender.status = NEUTRAL;
            defender.status_frames_left = 0;
            defender.move_frame = 0;
            defender.move_spent = true;
            defender.hitstun = defender.hitstun.max(hit.hitstun);
            defender.vel = [hit.knockback[0] * hit.direction, hit.knockback[1]];
            if hit.knockback[1] > 0.0 {
                defender.grounded = false;
            }
            if hit.damage > 0 {
                state.frame_events[a].dealt_damage = true;
                state.frame_events[a].dealt_damage_while_opponent_mid_move |= mid_move;
                state.frame_events[d].took_damage = true;
            }
        }
    }

    fn judge(&self, state: &GameState) -> Outcome {
        let hp = [state.fighters[0].hp, state.fighters[1].hp];
        match (hp[0] <= 0, hp[1] <= 0) {
            (true, true) => Outcome::Tie,
            (false, true) => Outcome::P0Win,
            (true, false) => Outcome::P1Win,
            (false, false) if state.frames_remaining > 0 => Outcome::Ongoing,
            _ => match hp[0].cmp(&hp[1]) {
                std::cmp::Ordering::Greater => Outcome::P0Win,
                std::cmp::Ordering::Less => Outcome::P1Win,
                std::cmp::Ordering::Equal => Outcome::Tie,
            },
        }
    }

    fn hurtbox(&self, f: &FighterState) -> (f64, f64, f64, f64) {
        let hb = self.roster.get(f.status).hurtbox;
        let (x0, x1) = world_span(f.pos[0], f.facing.sign(), hb.x, hb.w);
        (x0, x1, f.pos[1] + hb.y, f.pos[1] + hb.y + hb.h)
    }
}

fn face_towards(f: &mut FighterState, opponent_x: f64) {
    if opponent_x > f.pos[0] {
        f.facing = Facing::Right;
    } else if opponent_x < f.pos[0] {
        f.facing = Facing::Left;
    }
}

/// Horizontal extent of a forward-relative box `[offset, offset + width]`.
fn world_span(origin: f64, dir: f64, offset: f64, width: f64) -> (f64, f64) {
    if dir >= 0.0 {
        (origin + offset, origin + offset + width)
    } else {
        (origin - offset - width, origin - offset)
    }
}

fn overlaps(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1 && a.2 < b.3 && b.2 < a.3
}

#[cfg(test)]
mod tests;
