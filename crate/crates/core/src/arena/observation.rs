//! The 143-float observation vector.
//!
//! Layout, always from the perspective player's point of view:
//!
//! | slots     | content                                                       |
//! |-----------|---------------------------------------------------------------|
//! | 0..7      | self: hp, energy, x, y, vx, vy, facing/grounded composite     |
//! | 7..14     | opponent, same seven fields                                   |
//! | 14..70    | self status one-hot (56)                                      |
//! | 70..126   | opponent status one-hot (56)                                  |
//! | 126       | frames remaining / round length                               |
//! | 127..133  | self's two newest projectiles: rel-x, rel-y, damage           |
//! | 133..139  | opponent's two newest projectiles                             |
//! | 139..143  | zero padding                                                  |
//!
//! Player 1 sees a mirrored stage (x measured from the right wall, horizontal
//! velocities negated) so both seats share one coordinate frame. The
//! composite slot is 0.5 when facing right in that frame, plus 0.25 when
//! grounded.
//!
//! Three projectile fields for two projectiles for two players make 12 slots,
//! which leaves slots 139..143 of the 16-slot tail block permanently zero.

use super::{EnvConfig, GameState, Roster, NUM_ACTIONS};
use crate::arena::Facing;

pub const OBS_LEN: usize = 143;

pub const BASIC_PER_PLAYER: usize = 7;
pub const STATUS_OFFSET: usize = 2 * BASIC_PER_PLAYER;
pub const TIME_SLOT: usize = STATUS_OFFSET + 2 * NUM_ACTIONS;
pub const PROJECTILE_OFFSET: usize = TIME_SLOT + 1;
pub const PROJECTILES_PER_PLAYER: usize = 2;

pub type Observation = [f64; OBS_LEN];

pub fn encode(state: &GameState, perspective: usize, config: &EnvConfig, roster: &Roster) -> Observation {
    let mut obs = [0.0; OBS_LEN];
    let mirror = perspective == 1;
    let width = config.stage_width;
    let height = config.stage_height;
    let unit = |v: f64| v.clamp(0.0, 1.0);
    let x_frame = |x: f64| if mirror { width - x } else { x };
    let v_frame = |vx: f64| if mirror { -vx } else { vx };
    let speed = |v: f64| unit((v.clamp(-config.max_speed, config.max_speed) + config.max_speed) / (2.0 * config.max_speed));

    let players = [perspective, 1 - perspective];
    for (slot, &p) in players.iter().enumerate() {
        let f = &state.fighters[p];
        let base = slot * BASIC_PER_PLAYER;
        let facing = if mirror { f.facing.flipped() } else { f.facing };
        obs[base] = unit(f.hp as f64 / config.max_hp as f64);
        obs[base + 1] = unit(f.energy as f64 / config.max_energy as f64);
        obs[base + 2] = unit(x_frame(f.pos[0]) / width);
        obs[base + 3] = unit(f.pos[1] / height);
        obs[base + 4] = speed(v_frame(f.vel[0]));
        obs[base + 5] = speed(f.vel[1]);
        obs[base + 6] = if facing == Facing::Right { 0.5 } else { 0.0 } + if f.grounded { 0.25 } else { 0.0 };
        obs[STATUS_OFFSET + slot * NUM_ACTIONS + f.status] = 1.0;
    }

    obs[TIME_SLOT] = unit(state.frames_remaining as f64 / state.round_frames.max(1) as f64);

    let me = &state.fighters[perspective];
    let damage_scale = roster.max_projectile_damage() as f64;
    for (slot, &owner) in players.iter().enumerate() {
        let newest = state.projectiles.iter().rev().filter(|p| p.owner == owner).take(PROJECTILES_PER_PLAYER);
        for (k, proj) in newest.enumerate() {
            let base = PROJECTILE_OFFSET + (slot * PROJECTILES_PER_PLAYER + k) * 3;
            let dx = v_frame(proj.pos[0] - me.pos[0]);
            let dy = proj.pos[1] - me.pos[1];
            obs[base] = unit((dx / width + 1.0) / 2.0);
            obs[base + 1] = unit((dy / height + 1.0) / 2.0);
            obs[base + 2] = unit(proj.damage as f64 / damage_scale);
        }
    }
    obs
}
