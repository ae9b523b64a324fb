//! C ABI over the arena and trained policies.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free`. Every fallible call returns a
//! [`BrisketStatus`]; on failure, [`brisket_last_error`] describes the most
//! recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use brisket::arena::{Arena, EnvConfig, GameState, Outcome, Roster, NUM_ACTIONS, OBS_LEN};
use brisket::checkpoint::PolicyCheckpoint;
use brisket::dqn::QPolicy;
use brisket::rollout::observe;
use brisket::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrisketStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    /// Malformed roster, config or checkpoint.
    Validation = 4,
    RoundOver = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BrisketOutcome {
    Ongoing = 0,
    Player0Wins = 1,
    Player1Wins = 2,
    Tie = 3,
}

/// An arena together with the state of the round in progress.
pub struct BrisketArena {
    arena: Arena,
    state: GameState,
}

pub struct BrisketPolicy {
    policy: QPolicy,
}

/// Pass as an action to leave a player without input this frame.
pub const BRISKET_NO_ACTION: i32 = -1;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: BrisketStatus, msg: impl Into<String>) -> BrisketStatus {
    set_error(msg);
    status
}

fn from_error(err: Error) -> BrisketStatus {
    let status = match err {
        Error::Io { .. } => BrisketStatus::Io,
        Error::RoundOver => BrisketStatus::RoundOver,
        Error::Config(_) | Error::DimensionMismatch { .. } | Error::ClassOutOfRange { .. } => {
            BrisketStatus::InvalidArgument
        }
        ref e if e.is_validation() => BrisketStatus::Validation,
        _ => BrisketStatus::Internal,
    };
    fail(status, err.to_string())
}

/// Runs `f`, turning panics into `Internal`.
fn guard(f: impl FnOnce() -> BrisketStatus) -> BrisketStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(BrisketStatus::Internal, "internal panic"),
    }
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<Option<&'a Path>, BrisketStatus> {
    if p.is_null() {
        return Ok(None);
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(Some(Path::new(s))),
        Err(_) => Err(fail(BrisketStatus::InvalidArgument, "path is not valid UTF-8")),
    }
}

unsafe fn obs_arg<'a>(obs: *const f64, len: usize) -> Result<&'a [f64; OBS_LEN], BrisketStatus> {
    if obs.is_null() {
        return Err(fail(BrisketStatus::NullPointer, "observation pointer is null"));
    }
    if len != OBS_LEN {
        return Err(fail(BrisketStatus::InvalidArgument, format!("observation length must be {OBS_LEN}, got {len}")));
    }
    Ok(&*(obs as *const [f64; OBS_LEN]))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn brisket_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn brisket_observation_len() -> usize {
    OBS_LEN
}

#[no_mangle]
pub extern "C" fn brisket_num_actions() -> usize {
    NUM_ACTIONS
}

/// Creates an arena with a fresh round. `roster_path` may be null for the
/// built-in roster; `round_frames` of 0 keeps the default round length.
///
/// # Safety
/// `roster_path` must be null or a NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brisket_arena_new(
    roster_path: *const c_char,
    round_frames: u32,
    out: *mut *mut BrisketArena,
) -> BrisketStatus {
    guard(|| {
        if out.is_null() {
            return fail(BrisketStatus::NullPointer, "out is null");
        }
        let roster = match try_ffi!(path_arg(roster_path)) {
            Some(path) => try_ffi!(Roster::load(path).map_err(from_error)),
            None => Roster::builtin(),
        };
        let mut config = EnvConfig::default();
        if round_frames > 0 {
            config.round_frames = round_frames;
        }
        let arena = try_ffi!(Arena::new(roster, config).map_err(from_error));
        let state = arena.reset();
        *out = Box::into_raw(Box::new(BrisketArena { arena, state }));
        BrisketStatus::Ok
    })
}

/// # Safety
/// `arena` must be null or a handle from [`brisket_arena_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn brisket_arena_free(arena: *mut BrisketArena) {
    if !arena.is_null() {
        drop(Box::from_raw(arena));
    }
}

/// Starts a new round.
///
/// # Safety
/// `arena` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn brisket_arena_reset(arena: *mut BrisketArena) -> BrisketStatus {
    guard(|| {
        let Some(a) = arena.as_mut() else {
            return fail(BrisketStatus::NullPointer, "arena is null");
        };
        a.state = a.arena.reset();
        BrisketStatus::Ok
    })
}

/// Advances one frame. Actions are ids in `0..brisket_num_actions()` or
/// [`BRISKET_NO_ACTION`]; they only take effect for actionable players.
///
/// # Safety
/// `arena` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn brisket_arena_tick(arena: *mut BrisketArena, action0: i32, action1: i32) -> BrisketStatus {
    guard(|| {
        let Some(a) = arena.as_mut() else {
            return fail(BrisketStatus::NullPointer, "arena is null");
        };
        let mut actions = [None, None];
        for (slot, raw) in actions.iter_mut().zip([action0, action1]) {
            *slot = match raw {
                BRISKET_NO_ACTION => None,
                r if r >= 0 && (r as usize) < NUM_ACTIONS => Some(r as usize),
                r => return fail(BrisketStatus::InvalidArgument, format!("action id {r} out of range")),
            };
        }
        try_ffi!(a.arena.tick(&mut a.state, actions).map_err(from_error));
        BrisketStatus::Ok
    })
}

/// Writes `player`'s observation into `out`, which must hold exactly
/// `brisket_observation_len()` doubles.
///
/// # Safety
/// `arena` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn brisket_arena_observe(
    arena: *const BrisketArena,
    player: u32,
    out: *mut f64,
    len: usize,
) -> BrisketStatus {
    guard(|| {
        let Some(a) = arena.as_ref() else {
            return fail(BrisketStatus::NullPointer, "arena is null");
        };
        if out.is_null() {
            return fail(BrisketStatus::NullPointer, "out is null");
        }
        if player > 1 {
            return fail(BrisketStatus::InvalidArgument, format!("player must be 0 or 1, got {player}"));
        }
        if len != OBS_LEN {
            return fail(BrisketStatus::InvalidArgument, format!("observation length must be {OBS_LEN}, got {len}"));
        }
        let obs = observe(&a.arena, &a.state, player as usize);
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&obs);
        BrisketStatus::Ok
    })
}

/// # Safety
/// `arena` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brisket_arena_is_actionable(
    arena: *const BrisketArena,
    player: u32,
    out: *mut bool,
) -> BrisketStatus {
    guard(|| {
        let (Some(a), false) = (arena.as_ref(), out.is_null()) else {
            return fail(BrisketStatus::NullPointer, "arena or out is null");
        };
        if player > 1 {
            return fail(BrisketStatus::InvalidArgument, format!("player must be 0 or 1, got {player}"));
        }
        *out = a.state.is_actionable(player as usize);
        BrisketStatus::Ok
    })
}

/// # Safety
/// `arena` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brisket_arena_outcome(arena: *const BrisketArena, out: *mut BrisketOutcome) -> BrisketStatus {
    guard(|| {
        let (Some(a), false) = (arena.as_ref(), out.is_null()) else {
            return fail(BrisketStatus::NullPointer, "arena or out is null");
        };
        *out = match a.state.outcome {
            Outcome::Ongoing => BrisketOutcome::Ongoing,
            Outcome::P0Win => BrisketOutcome::Player0Wins,
            Outcome::P1Win => BrisketOutcome::Player1Wins,
            Outcome::Tie => BrisketOutcome::Tie,
        };
        BrisketStatus::Ok
    })
}

/// Current hit points of both players.
///
/// # Safety
/// `arena` must be a live handle and `out` must point to two writable ints.
#[no_mangle]
pub unsafe extern "C" fn brisket_arena_hp(arena: *const BrisketArena, out: *mut i32) -> BrisketStatus {
    guard(|| {
        let (Some(a), false) = (arena.as_ref(), out.is_null()) else {
            return fail(BrisketStatus::NullPointer, "arena or out is null");
        };
        *out = a.state.fighters[0].hp;
        *out.add(1) = a.state.fighters[1].hp;
        BrisketStatus::Ok
    })
}

/// Loads a policy checkpoint written by the trainer.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn brisket_policy_load(path: *const c_char, out: *mut *mut BrisketPolicy) -> BrisketStatus {
    guard(|| {
        if out.is_null() {
            return fail(BrisketStatus::NullPointer, "out is null");
        }
        let Some(path) = try_ffi!(path_arg(path)) else {
            return fail(BrisketStatus::NullPointer, "path is null");
        };
        let policy = try_ffi!(PolicyCheckpoint::load_policy(path).map_err(from_error));
        *out = Box::into_raw(Box::new(BrisketPolicy { policy }));
        BrisketStatus::Ok
    })
}

/// # Safety
/// `policy` must be null or a handle from [`brisket_policy_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn brisket_policy_free(policy: *mut BrisketPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Highest-valued action for an observation; ties go to the lowest id.
///
/// # Safety
/// `policy` must be a live handle, `obs` must point to `len` doubles and
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn brisket_policy_greedy_action(
    policy: *const BrisketPolicy,
    obs: *const f64,
    len: usize,
    out: *mut u32,
) -> BrisketStatus {
    guard(|| {
        let (Some(p), false) = (policy.as_ref(), out.is_null()) else {
            return fail(BrisketStatus::NullPointer, "policy or out is null");
        };
        let obs = try_ffi!(obs_arg(obs, len));
        *out = p.policy.greedy_action(obs) as u32;
        BrisketStatus::Ok
    })
}

/// Q-value of one action.
///
/// # Safety
/// As for [`brisket_policy_greedy_action`].
#[no_mangle]
pub unsafe extern "C" fn brisket_policy_q_value(
    policy: *const BrisketPolicy,
    obs: *const f64,
    len: usize,
    action: u32,
    out: *mut f64,
) -> BrisketStatus {
    guard(|| {
        let (Some(p), false) = (policy.as_ref(), out.is_null()) else {
            return fail(BrisketStatus::NullPointer, "policy or out is null");
        };
        let obs = try_ffi!(obs_arg(obs, len));
        if action as usize >= NUM_ACTIONS {
            return fail(BrisketStatus::InvalidArgument, format!("action id {action} out of range"));
        }
        *out = p.policy.q_value(obs, action as usize);
        BrisketStatus::Ok
    })
}
