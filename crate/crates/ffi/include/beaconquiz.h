#ifndef BEACONQUIZ_H
#define BEACONQUIZ_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  BQ_STATUS_OK = 0,
  BQ_STATUS_NULL_POINTER = 1,
  BQ_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The sample's UUID does not belong to any beacon of the room.
   */
  BQ_STATUS_UNKNOWN_BEACON = 3,
  /**
   * The sample is older than the last one accepted for its beacon.
   */
  BQ_STATUS_OUT_OF_ORDER = 4,
  /**
   * The event is not allowed in the current game phase.
   */
  BQ_STATUS_ILLEGAL_TRANSITION = 5,
  /**
   * The output buffer is too small; the required size was written.
   */
  BQ_STATUS_BUFFER_TOO_SMALL = 6,
  BQ_STATUS_INTERNAL = 99,
} BqStatus;

/**
 * Game phase as seen through the C ABI.
 */
typedef enum {
  BQ_PHASE_IDLE = 0,
  BQ_PHASE_QUESTION_SHOWN = 1,
  BQ_PHASE_ANSWER_HIGHLIGHTED = 2,
  BQ_PHASE_FEEDBACK = 3,
  BQ_PHASE_WON = 4,
  BQ_PHASE_GAME_OVER = 5,
} BqPhase;

typedef struct BqGame BqGame;

typedef struct BqRoom BqRoom;

typedef struct BqSimulator BqSimulator;

typedef struct BqTracker BqTracker;

/**
 * One received advertisement.
 */
typedef struct {
  uint64_t ts_ms;
  /**
   * 0 = NW, 1 = NE, 2 = SW, 3 = SE.
   */
  uint8_t beacon_id;
  uint8_t uuid[16];
  double rssi_dbm;
} BqSample;

/**
 * Output of one localization step.
 */
typedef struct {
  uint64_t ts_ms;
  /**
   * Selected corner, or -1.
   */
  int32_t selected;
  /**
   * Normalized room coordinates.
   */
  double x;
  double y;
  double distances[4];
  double confidences[4];
} BqFrame;

typedef struct {
  BqPhase phase;
  uint32_t question_index;
  uint32_t question_count;
  uint32_t score_level;
  /**
   * Highlighted corner, or -1.
   */
  int32_t highlighted;
  /**
   * 1 or 0 in the feedback phase, -1 otherwise.
   */
  int32_t feedback_correct;
} BqGameView;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread. Never null.
 */
const char *bq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bq_version(void);

/**
 * Noise-free received power at `distance_m` from a beacon.
 */
double bq_mean_rssi(double tx_power_1m, double path_loss_exponent, double d_min, double distance_m);

/**
 * Rectangular room with a beacon at each corner and default UUIDs.
 *
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
BqStatus bq_room_new(double width_m,
                     double depth_m,
                     double tx_power_1m,
                     double path_loss_exponent,
                     double noise_sigma,
                     uint64_t advertise_interval_ms,
                     BqRoom **out);

/**
 * Copies the 16 UUID bytes of beacon `corner` into `out`.
 *
 * # Safety
 * `room` must come from `bq_room_new`; `out` must hold 16 bytes.
 */
BqStatus bq_room_beacon_uuid(const BqRoom *room, int32_t corner, uint8_t *out);

/**
 * # Safety
 * `room` must come from `bq_room_new` or be null.
 */
void bq_room_free(BqRoom *room);

/**
 * Simulator for `room` with the player standing in the center. The room
 * is copied; the room handle may be freed afterwards.
 *
 * # Safety
 * `room` must come from `bq_room_new`; `out` must be writable.
 */
BqStatus bq_simulator_new(const BqRoom *room, uint64_t seed, BqSimulator **out);

/**
 * Places the player at (`x_m`, `y_m`) from the current simulated time on.
 *
 * # Safety
 * `sim` must come from `bq_simulator_new`.
 */
BqStatus bq_simulator_set_position(BqSimulator *sim, double x_m, double y_m);

/**
 * Advances the clock to `until_ms` and queues every broadcast in between.
 * `queued` receives the number of samples waiting to be drained.
 *
 * # Safety
 * `sim` must come from `bq_simulator_new`; `queued` may be null.
 */
BqStatus bq_simulator_advance(BqSimulator *sim, uint64_t until_ms, size_t *queued);

/**
 * Moves up to `cap` queued samples into `buf`, oldest first.
 *
 * # Safety
 * `buf` must hold `cap` samples; `written` must be writable.
 */
BqStatus bq_simulator_drain(BqSimulator *sim, BqSample *buf, size_t cap, size_t *written);

/**
 * # Safety
 * `sim` must come from `bq_simulator_new` or be null.
 */
void bq_simulator_free(BqSimulator *sim);

/**
 * Signal filters plus corner selection for `room`, with the default
 * selection policy.
 *
 * # Safety
 * `room` must come from `bq_room_new`; `out` must be writable.
 */
BqStatus bq_tracker_new(const BqRoom *room, size_t window_size, BqTracker **out);

/**
 * Overrides the selection thresholds (meters) and the minimum confidence.
 *
 * # Safety
 * `tracker` must come from `bq_tracker_new`.
 */
BqStatus bq_tracker_set_policy(BqTracker *tracker,
                               double enter_threshold_m,
                               double exit_threshold_m,
                               double min_confidence);

/**
 * Feeds one sample. Samples for unknown UUIDs or older than the last
 * accepted one for their beacon are rejected and leave the state alone.
 *
 * # Safety
 * `tracker` must come from `bq_tracker_new`; `sample` must be readable.
 */
BqStatus bq_tracker_push(BqTracker *tracker, const BqSample *sample);

/**
 * Runs one localization step at `now_ms` and writes the result to `out`.
 *
 * # Safety
 * `tracker` must come from `bq_tracker_new`; `out` must be writable.
 */
BqStatus bq_tracker_tick(BqTracker *tracker, uint64_t now_ms, BqFrame *out);

/**
 * Clears all filter windows and the selection.
 *
 * # Safety
 * `tracker` must come from `bq_tracker_new`.
 */
BqStatus bq_tracker_reset(BqTracker *tracker);

/**
 * # Safety
 * `tracker` must come from `bq_tracker_new` or be null.
 */
void bq_tracker_free(BqTracker *tracker);

/**
 * Game over the bundled fifteen-question bank, showing its first question.
 *
 * # Safety
 * `out` must be writable.
 */
BqStatus bq_game_new_bundled(uint64_t seed, bool shuffle, BqGame **out);

/**
 * Game over a question bank given as a JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
BqStatus bq_game_new_from_json(const char *json, uint64_t seed, bool shuffle, BqGame **out);

/**
 * Highlights `corner` (0..=3), or clears the highlight with -1. Ignored
 * outside the question phases.
 *
 * # Safety
 * `game` must come from a `bq_game_new_*` function.
 */
BqStatus bq_game_select(BqGame *game, int32_t corner);

/**
 * # Safety
 * `game` must come from a `bq_game_new_*` function.
 */
BqStatus bq_game_confirm(BqGame *game);

/**
 * # Safety
 * `game` must come from a `bq_game_new_*` function.
 */
BqStatus bq_game_advance(BqGame *game);

/**
 * Starts a new game with fresh answer placements.
 *
 * # Safety
 * `game` must come from a `bq_game_new_*` function.
 */
BqStatus bq_game_restart(BqGame *game);

/**
 * # Safety
 * `game` must come from a `bq_game_new_*` function; `out` must be writable.
 */
BqStatus bq_game_view(const BqGame *game, BqGameView *out);

/**
 * Copies the current question text into `buf`.
 *
 * # Safety
 * `buf` must hold `cap` bytes; `len` may be null.
 */
BqStatus bq_game_question_text(const BqGame *game, char *buf, size_t cap, size_t *len);

/**
 * Copies the answer shown at `corner` for the current question.
 *
 * # Safety
 * `buf` must hold `cap` bytes; `len` may be null.
 */
BqStatus bq_game_answer_text(const BqGame *game,
                             int32_t corner,
                             char *buf,
                             size_t cap,
                             size_t *len);

/**
 * Corner holding the correct answer of the current question, or -1.
 *
 * # Safety
 * `game` must come from a `bq_game_new_*` function; `out` must be writable.
 */
BqStatus bq_game_correct_corner(const BqGame *game, int32_t *out);

/**
 * # Safety
 * `game` must come from a `bq_game_new_*` function or be null.
 */
void bq_game_free(BqGame *game);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BEACONQUIZ_H */
