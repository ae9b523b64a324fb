#ifndef BRISKET_H
#define BRISKET_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Pass as an action to leave a player without input this frame.
 */
#define BRISKET_NO_ACTION -1

/**
 * Result codes. Zero is success.
 */
typedef enum BrisketStatus {
  BRISKET_STATUS_OK = 0,
  BRISKET_STATUS_NULL_POINTER = 1,
  BRISKET_STATUS_INVALID_ARGUMENT = 2,
  BRISKET_STATUS_IO = 3,
  /**
   * Malformed roster, config or checkpoint.
   */
  BRISKET_STATUS_VALIDATION = 4,
  BRISKET_STATUS_ROUND_OVER = 5,
  BRISKET_STATUS_INTERNAL = 6,
} BrisketStatus;

typedef enum BrisketOutcome {
  BRISKET_OUTCOME_ONGOING = 0,
  BRISKET_OUTCOME_PLAYER0_WINS = 1,
  BRISKET_OUTCOME_PLAYER1_WINS = 2,
  BRISKET_OUTCOME_TIE = 3,
} BrisketOutcome;

/**
 * An arena together with the state of the round in progress.
 */
typedef struct BrisketArena BrisketArena;

typedef struct BrisketPolicy BrisketPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *brisket_last_error(void);

size_t brisket_observation_len(void);

size_t brisket_num_actions(void);

/**
 * Creates an arena with a fresh round. `roster_path` may be null for the
 * built-in roster; `round_frames` of 0 keeps the default round length.
 *
 * # Safety
 * `roster_path` must be null or a NUL-terminated string; `out` must be a
 * valid pointer.
 */
enum BrisketStatus brisket_arena_new(const char *roster_path,
                                     uint32_t round_frames,
                                     struct BrisketArena **out);

/**
 * # Safety
 * `arena` must be null or a handle from [`brisket_arena_new`] not yet freed.
 */
void brisket_arena_free(struct BrisketArena *arena);

/**
 * Starts a new round.
 *
 * # Safety
 * `arena` must be a live handle.
 */
enum BrisketStatus brisket_arena_reset(struct BrisketArena *arena);

/**
 * Advances one frame. Actions are ids in `0..brisket_num_actions()` or
 * [`BRISKET_NO_ACTION`]; they only take effect for actionable players.
 *
 * # Safety
 * `arena` must be a live handle.
 */
enum BrisketStatus brisket_arena_tick(struct BrisketArena *arena, int32_t action0, int32_t action1);

/**
 * Writes `player`'s observation into `out`, which must hold exactly
 * `brisket_observation_len()` doubles.
 *
 * # Safety
 * `arena` must be a live handle and `out` must point to `len` writable doubles.
 */
enum BrisketStatus brisket_arena_observe(const struct BrisketArena *arena,
                                         uint32_t player,
                                         double *out,
                                         size_t len);

/**
 * # Safety
 * `arena` must be a live handle and `out` a valid pointer.
 */
enum BrisketStatus brisket_arena_is_actionable(const struct BrisketArena *arena,
                                               uint32_t player,
                                               bool *out);

/**
 * # Safety
 * `arena` must be a live handle and `out` a valid pointer.
 */
enum BrisketStatus brisket_arena_outcome(const struct BrisketArena *arena,
                                         enum BrisketOutcome *out);

/**
 * Current hit points of both players.
 *
 * # Safety
 * `arena` must be a live handle and `out` must point to two writable ints.
 */
enum BrisketStatus brisket_arena_hp(const struct BrisketArena *arena, int32_t *out);

/**
 * Loads a policy checkpoint written by the trainer.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum BrisketStatus brisket_policy_load(const char *path, struct BrisketPolicy **out);

/**
 * # Safety
 * `policy` must be null or a handle from [`brisket_policy_load`] not yet freed.
 */
void brisket_policy_free(struct BrisketPolicy *policy);

/**
 * Highest-valued action for an observation; ties go to the lowest id.
 *
 * # Safety
 * `policy` must be a live handle, `obs` must point to `len` doubles and
 * `out` must be valid.
 */
enum BrisketStatus brisket_policy_greedy_action(const struct BrisketPolicy *policy,
                                                const double *obs,
                                                size_t len,
                                                uint32_t *out);

/**
 * Q-value of one action.
 *
 * # Safety
 * As for [`brisket_policy_greedy_action`].
 */
enum BrisketStatus brisket_policy_q_value(const struct BrisketPolicy *policy,
                                          const double *obs,
                                          size_t len,
                                          uint32_t action,
                                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BRISKET_H */
