use super::observation::{PROJECTILE_OFFSET, STATUS_OFFSET, TIME_SLOT};
use super::*;

fn arena() -> Arena {
    Arena::with_config(EnvConfig::default()).unwrap()
}

fn id(arena: &Arena, name: &str) -> ActionId {
    arena.roster().find(name).unwrap().id
}

/// Put `player` into `move_name` as if it had already run `frames_done` frames.
fn mid_move(arena: &Arena, state: &mut GameState, player: usize, move_name: &str, frames_done: u32) {
    let spec = arena.roster().find(move_name).unwrap();
    let f = &mut state.fighters[player];
    f.status = spec.id;
    f.move_frame = frames_done;
    f.status_frames_left = spec.total_frames() - frames_done;
    f.move_spent = false;
}

#[test]
fn reset_is_full_health_and_seed_free() {
    let a = arena();
    let s = a.reset();
    for f in &s.fighters {
        assert_eq!(f.hp, 400);
        assert_eq!(f.energy, 0);
        assert_eq!(f.status, NEUTRAL);
        assert!(f.grounded);
    }
    assert_eq!(s.fighters[0].facing, Facing::Right);
    assert_eq!(s.fighters[1].facing, Facing::Left);
    assert_eq!(s.outcome, Outcome::Ongoing);
    assert_eq!(s.frames_remaining, 3600);
    assert_eq!(a.reset(), s);
}

#[test]
fn timeout_goes_to_higher_hp() {
    let a = arena();
    let mut s = a.reset();
    s.frames_remaining = 1;
    s.fighters[1].hp = 399;
    a.tick(&mut s, [None, None]).unwrap();
    assert_eq!(s.outcome, Outcome::P0Win);
    assert_eq!(s.outcome_sign(0), 1);
    assert_eq!(s.outcome_sign(1), -1);

    let mut tie = a.reset();
    tie.frames_remaining = 1;
    a.tick(&mut tie, [None, None]).unwrap();
    assert_eq!(tie.outcome, Outcome::Tie);
    assert_eq!(tie.outcome_sign(0), 0);
    assert_eq!(tie.outcome_sign(1), 0);
}

#[test]
fn ticking_a_finished_round_is_rejected() {
    let a = arena();
    let mut s = a.reset();
    s.frames_remaining = 1;
    a.tick(&mut s, [None, None]).unwrap();
    assert!(matches!(a.tick(&mut s, [None, None]), Err(Error::RoundOver)));
}

#[test]
fn out_of_range_action_is_rejected() {
    let a = arena();
    let mut s = a.reset();
    assert!(a.tick(&mut s, [Some(NUM_ACTIONS), None]).is_err());
}

#[test]
fn unaffordable_projectile_downgrades_to_neutral() {
    let a = arena();
    let mut s = a.reset();
    a.tick(&mut s, [Some(id(&a, "FIREBALL")), None]).unwrap();
    assert_eq!(s.fighters[0].status, NEUTRAL);
    assert_eq!(s.fighters[0].energy, 0);
    for _ in 0..30 {
        a.tick(&mut s, [None, None]).unwrap();
    }
    assert!(s.projectiles.is_empty());
}

#[test]
fn wrong_stance_downgrades_to_neutral() {
    let a = arena();
    let mut s = a.reset();
    a.tick(&mut s, [Some(id(&a, "AIR_A")), None]).unwrap();
    assert_eq!(s.fighters[0].status, NEUTRAL);
}

#[test]
fn actionability_boundaries() {
    let a = arena();
    let mut s = a.reset();
    assert!(s.is_actionable(0) && s.is_actionable(1));

    // STAND_UPPERCUT lasts 6 + 8 + 18 = 32 frames.
    mid_move(&a, &mut s, 0, "STAND_UPPERCUT", 3);
    assert!(!s.is_actionable(0));
    mid_move(&a, &mut s, 0, "STAND_UPPERCUT", 32);
    assert_eq!(s.fighters[0].status_frames_left, 0);
    assert!(s.is_actionable(0));

    s.fighters[1].hitstun = 5;
    assert!(!s.is_actionable(1));
}

#[test]
fn move_occupies_exactly_its_frame_count() {
    let a = arena();
    let mut s = a.reset();
    let jab = id(&a, "STAND_A");
    let total = a.roster().get(jab).total_frames();
    a.tick(&mut s, [Some(jab), None]).unwrap();
    for _ in 1..total {
        assert!(!s.is_actionable(0));
        a.tick(&mut s, [Some(NEUTRAL), None]).unwrap();
        assert_eq!(s.fighters[0].status, jab, "an ignored action must not interrupt the move");
    }
    assert!(s.is_actionable(0));
}

// STAND_A: hitbox (x 20, y 120, w 60, h 30), 5 damage, active on frames 4..=6.
// Attacker at x = 300 facing right puts the hitbox at x in [320, 380], y in [120, 150].
// Defender at x = 350 standing: hurtbox x in [325, 375], y in [0, 180] -> overlap.
#[test]
fn active_hitbox_on_hurtbox_deals_exact_damage() {
    let a = arena();
    let mut s = a.reset();
    s.fighters[0].pos = [300.0, 0.0];
    s.fighters[1].pos = [350.0, 0.0];
    mid_move(&a, &mut s, 0, "STAND_A", 2);

    a.tick(&mut s, [None, None]).unwrap(); // frame 3: still startup
    assert_eq!(s.fighters[1].hp, 400);
    assert!(!s.frame_events[0].dealt_damage);

    a.tick(&mut s, [None, None]).unwrap(); // frame 4: first active frame
    assert_eq!(s.fighters[1].hp, 395);
    assert!(s.frame_events[0].dealt_damage);
    assert!(s.frame_events[1].took_damage);
    assert!(!s.frame_events[0].dealt_damage_while_opponent_mid_move);
    assert_eq!(s.fighters[0].energy, 5);
    assert_eq!(s.fighters[1].energy, 2);
    assert_eq!(s.fighters[1].hitstun, 12);

    // One connection per move, and events only last one frame.
    a.tick(&mut s, [None, None]).unwrap();
    assert_eq!(s.fighters[1].hp, 395);
    assert!(!s.frame_events[0].any());
}

// Defender at x = 405 puts its hurtbox at [380, 430]; the hitbox ends at 380,
// so touching edges do not count.
#[test]
fn touching_boxes_do_not_hit() {
    let a = arena();
    let mut s = a.reset();
    s.fighters[0].pos = [300.0, 0.0];
    s.fighters[1].pos = [405.0, 0.0];
    mid_move(&a, &mut s, 0, "STAND_A", 3);
    a.tick(&mut s, [None, None]).unwrap();
    assert_eq!(s.fighters[1].hp, 400);
}

#[test]
fn hitting_an_attacking_opponent_flags_counter() {
    let a = arena();
    let mut s = a.reset();
    s.fighters[0].pos = [300.0, 0.0];
    s.fighters[1].pos = [350.0, 0.0];
    mid_move(&a, &mut s, 0, "STAND_A", 3);
    // Opponent is in the startup of a slow kick.
    mid_move(&a, &mut s, 1, "STAND_SPIN_KICK", 2);
    a.tick(&mut s, [None, None]).unwrap();
    assert!(s.frame_events[0].dealt_damage);
    assert!(s.frame_events[0].dealt_damage_while_opponent_mid_move);
    // The kick is cancelled by the hit.
    assert_eq!(s.fighters[1].status, NEUTRAL);
}

#[test]
fn guards_block_by_level() {
    let a = arena();
    let setup = |attack: &str, guard: &str| {
        let mut s = a.reset();
        s.fighters[0].pos = [300.0, 0.0];
        s.fighters[1].pos = [350.0, 0.0];
        let spec = a.roster().find(attack).unwrap().clone();
        mid_move(&a, &mut s, 0, attack, spec.startup);
        mid_move(&a, &mut s, 1, guard, 1);
        a.tick(&mut s, [None, None]).unwrap();
        (s, spec)
    };

    // Mid attack against standing and crouching guards: blocked, energy still flows.
    for guard in ["STAND_GUARD", "CROUCH_GUARD"] {
        let (s, spec) = setup("STAND_FB", guard);
        assert_eq!(s.fighters[1].hp, 400, "{guard}");
        assert_eq!(s.fighters[0].energy, spec.energy_gain_on_hit);
        assert_eq!(s.fighters[1].energy, spec.energy_gain_on_being_hit);
        assert!(!s.frame_events[0].dealt_damage);
    }
    // Low attack goes through a standing guard.
    let (s, spec) = setup("STAND_LOW_KICK", "STAND_GUARD");
    assert_eq!(s.fighters[1].hp, 400 - spec.damage);
    // ... but not a crouching one.
    let (s, _) = setup("STAND_LOW_KICK", "CROUCH_GUARD");
    assert_eq!(s.fighters[1].hp, 400);
}

#[test]
fn projectile_travels_and_hits() {
    let a = arena();
    let mut s = a.reset();
    s.fighters[0].energy = 10;
    let fireball = id(&a, "FIREBALL");
    a.tick(&mut s, [Some(fireball), None]).unwrap();
    assert_eq!(s.fighters[0].energy, 0);
    let mut spawned = false;
    for _ in 0..120 {
        a.tick(&mut s, [None, None]).unwrap();
        spawned |= !s.projectiles.is_empty();
        if s.fighters[1].hp < 400 {
            break;
        }
    }
    assert!(spawned);
    assert_eq!(s.fighters[1].hp, 388);
    assert!(s.projectiles.is_empty(), "projectile is consumed by the hit");
}

#[test]
fn projectiles_expire_at_range() {
    // Near-zero gravity keeps the opponent hovering above the projectile's path.
    let a = Arena::with_config(EnvConfig { gravity: 1e-6, ..EnvConfig::default() }).unwrap();
    let mut s = a.reset();
    s.fighters[1].pos = [900.0, 400.0];
    s.fighters[1].grounded = false;
    s.fighters[0].energy = 10;
    a.tick(&mut s, [Some(id(&a, "FIREBALL")), None]).unwrap();
    let mut alive_frames = 0;
    for _ in 0..200 {
        a.tick(&mut s, [None, None]).unwrap();
        assert!(s.projectiles.len() <= 1);
        alive_frames += s.projectiles.len();
    }
    assert_eq!(s.fighters[1].hp, 400);
    assert!(s.projectiles.is_empty());
    // Range 480 at speed 8: present for 60 ticks, counting the spawn tick.
    assert_eq!(alive_frames, 60);
}

#[test]
fn encoding_of_reset_state() {
    let a = arena();
    let s = a.reset();
    let obs = a.encode(&s, 0);
    assert_eq!(obs.len(), OBS_LEN);
    assert_eq!(obs[0], 1.0);
    assert_eq!(obs[7], 1.0);
    assert_eq!(obs[TIME_SLOT], 1.0);
    assert_eq!(TIME_SLOT, 126);
    assert!(obs[PROJECTILE_OFFSET..].iter().all(|v| *v == 0.0));
    assert_eq!(obs[STATUS_OFFSET + NEUTRAL], 1.0);
    assert_eq!(obs[STATUS_OFFSET + NUM_ACTIONS + NEUTRAL], 1.0);
    // Facing right, grounded.
    assert_eq!(obs[6], 0.75);
}

#[test]
fn mirrored_state_encodes_identically_from_both_seats() {
    let a = arena();
    let mut s = a.reset();
    let w = a.config().stage_width;
    s.fighters[0].pos = [300.0, 32.0];
    s.fighters[1].pos = [w - 300.0, 32.0];
    s.fighters[0].vel = [3.0, -2.0];
    s.fighters[1].vel = [-3.0, -2.0];
    s.fighters[0].grounded = false;
    s.fighters[1].grounded = false;
    for f in &mut s.fighters {
        f.hp = 250;
        f.energy = 64;
    }
    mid_move(&a, &mut s, 0, "AIR_B", 2);
    mid_move(&a, &mut s, 1, "AIR_B", 2);
    s.projectiles.push(Projectile {
        owner: 0,
        pos: [400.0, 96.0],
        vel: [8.0, 0.0],
        size: [40.0, 40.0],
        damage: 12,
        move_id: id(&a, "FIREBALL"),
        frames_left: 20,
    });
    s.projectiles.push(Projectile {
        owner: 1,
        pos: [w - 400.0, 96.0],
        vel: [-8.0, 0.0],
        size: [40.0, 40.0],
        damage: 12,
        move_id: id(&a, "FIREBALL"),
        frames_left: 20,
    });
    let from_p0 = a.encode(&s, 0);
    let from_p1 = a.encode(&s, 1);
    for i in 0..OBS_LEN {
        assert_eq!(from_p0[i], from_p1[i], "slot {i}");
    }
    assert!(from_p0[PROJECTILE_OFFSET] > 0.5);
}

#[test]
fn only_two_newest_projectiles_per_player_are_encoded() {
    let a = arena();
    let mut s = a.reset();
    for (i, damage) in [10, 20, 30].into_iter().enumerate() {
        s.projectiles.push(Projectile {
            owner: 0,
            pos: [400.0 + 10.0 * i as f64, 100.0],
            vel: [8.0, 0.0],
            size: [40.0, 40.0],
            damage,
            move_id: id(&a, "FIREBALL"),
            frames_left: 20,
        });
    }
    let obs = a.encode(&s, 0);
    let scale = a.roster().max_projectile_damage() as f64;
    assert_eq!(obs[PROJECTILE_OFFSET + 2], 30.0 / scale);
    assert_eq!(obs[PROJECTILE_OFFSET + 5], 20.0 / scale);
    assert!(obs[PROJECTILE_OFFSET + 6..].iter().all(|v| *v == 0.0));
}

#[test]
fn identical_inputs_give_identical_trajectories() {
    use rand::Rng;
    let a = arena();
    let run = || {
        let mut rng = crate::seed::rng(11);
        let mut s = a.reset();
        let mut states = Vec::new();
        while !s.outcome.is_over() {
            let acts = [rng.random_range(0..NUM_ACTIONS), rng.random_range(0..NUM_ACTIONS)];
            a.tick(&mut s, [Some(acts[0]), Some(acts[1])]).unwrap();
            states.push(s.clone());
        }
        states
    };
    assert_eq!(run(), run());
}

#[test]
fn config_validation() {
    let mut c = EnvConfig::default();
    c.round_frames = 0;
    assert!(Arena::with_config(c).is_err());
    let mut c = EnvConfig::default();
    c.spawn_x = [700.0, 300.0];
    assert!(Arena::with_config(c).is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_play_respects_invariants(seed in any::<u64>(), frames in 50u32..600) {
            use rand::Rng;
            let a = Arena::with_config(EnvConfig { round_frames: frames, ..EnvConfig::default() }).unwrap();
            let mut rng = crate::seed::rng(seed);
            let mut s = a.reset();
            let mut ticks = 0;
            let mut last_hp = [400, 400];
            while !s.outcome.is_over() {
                let acts = [rng.random_range(0..NUM_ACTIONS), rng.random_range(0..NUM_ACTIONS)];
                a.tick(&mut s, [Some(acts[0]), Some(acts[1])]).unwrap();
                ticks += 1;
                for p in 0..2 {
                    let f = &s.fighters[p];
                    prop_assert!(f.hp <= last_hp[p]);
                    last_hp[p] = f.hp;
                    prop_assert!((0..=300).contains(&f.energy));
                    prop_assert!(f.pos[0] >= 0.0 && f.pos[0] <= 960.0);
                    prop_assert!(f.pos[1] >= 0.0 && f.pos[1] <= 640.0);
                    let obs = a.encode(&s, p);
                    prop_assert!(obs.iter().all(|v| (0.0..=1.0).contains(v)));
                    let own: f64 = obs[STATUS_OFFSET..STATUS_OFFSET + NUM_ACTIONS].iter().sum();
                    let opp: f64 = obs[STATUS_OFFSET + NUM_ACTIONS..TIME_SLOT].iter().sum();
                    prop_assert_eq!(own, 1.0);
                    prop_assert_eq!(opp, 1.0);
                }
            }
            prop_assert!(ticks <= frames);
        }
    }
}
