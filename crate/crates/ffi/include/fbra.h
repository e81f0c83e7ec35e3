/* SPDX-License-Identifier: Apache-2.0 */

#ifndef FBRA_H
#define FBRA_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum FbraStatus {
  FBRA_STATUS_OK = 0,
  FBRA_STATUS_NULL_POINTER = 1,
  FBRA_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Bad scenario text or controller parameters.
   */
  FBRA_STATUS_CONFIG = 3,
  /**
   * The simulation or metrics step failed.
   */
  FBRA_STATUS_RUNTIME = 4,
  /**
   * The report fell inside a rate-control pause; no decision was made.
   */
  FBRA_STATUS_IGNORED = 5,
  /**
   * No decision is due (tick before the feedback timeout).
   */
  FBRA_STATUS_NO_DECISION = 6,
  /**
   * FEC cannot rebuild the block (not exactly one packet missing).
   */
  FBRA_STATUS_NOT_RECOVERABLE = 7,
  FBRA_STATUS_BUFFER_TOO_SMALL = 8,
  FBRA_STATUS_PANIC = 9,
} FbraStatus;

typedef enum FbraState {
  FBRA_STATE_STAY = 0,
  FBRA_STATE_PROBE = 1,
  FBRA_STATE_UP = 2,
  FBRA_STATE_DOWN = 3,
} FbraState;

typedef enum FbraAction {
  FBRA_ACTION_HOLD = 0,
  FBRA_ACTION_ENABLE_FEC = 1,
  FBRA_ACTION_INCREMENT_FEC_INTERVAL = 2,
  FBRA_ACTION_RAISE_RATE = 3,
  FBRA_ACTION_UNDERSHOOT = 4,
  FBRA_ACTION_UNDERSHOOT_AND_DISABLE = 5,
  FBRA_ACTION_BOUNCE_BACK = 6,
  FBRA_ACTION_FEEDBACK_TIMEOUT = 7,
} FbraAction;

/**
 * Opaque controller handle.
 */
typedef struct FbraController FbraController;

/**
 * Opaque parity packet handle.
 */
typedef struct FbraFecPacket FbraFecPacket;

/**
 * A loss or discard: sequence number and receiver time.
 */
typedef struct FbraSeqEvent {
  uint16_t seq;
  uint64_t at_us;
} FbraSeqEvent;

/**
 * Receiver report. Event arrays may be NULL when their count is 0.
 */
typedef struct FbraReport {
  uint32_t ssrc;
  uint64_t report_ts_us;
  uint16_t highest_seq;
  uint32_t cumulative_lost;
  uint32_t interval_sent;
  const struct FbraSeqEvent *loss_events;
  size_t loss_count;
  const struct FbraSeqEvent *discard_events;
  size_t discard_count;
  uint64_t owd_us;
  uint32_t jitter_us;
  uint64_t lsr_us;
  uint64_t dlsr_us;
  bool is_early;
} FbraReport;

/**
 * Sender-side measurements over the interval the report closes.
 */
typedef struct FbraMeasurement {
  uint64_t sending_rate_bps;
  uint64_t goodput_bps;
  uint64_t fec_rate_bps;
  uint64_t probe_fec_rate_bps;
} FbraMeasurement;

typedef struct FbraDecision {
  enum FbraState state;
  enum FbraAction action;
  uint64_t target_rate_bps;
  bool fec_enabled;
  uint8_t fec_interval;
  /**
   * Rate control is paused until this time when `disabled` is set.
   */
  bool disabled;
  uint64_t disabled_until_us;
} FbraDecision;

/**
 * Media packet. `payload` points to `payload_len` bytes.
 */
typedef struct FbraMediaPacket {
  uint32_t ssrc;
  uint16_t seq;
  uint32_t frame_id;
  uint64_t frame_ts_us;
  uint64_t send_ts_us;
  const uint8_t *payload;
  size_t payload_len;
  bool is_fragment;
  uint16_t fragment_index;
  uint16_t fragment_count;
} FbraMediaPacket;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into the library on the same thread.
 */
const char *fbra_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fbra_version(void);

/**
 * Creates a controller with default parameters and the given FEC interval
 * bounds (2 <= min <= max <= 14).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum FbraStatus fbra_controller_new(uint8_t fec_interval_min,
                                    uint8_t fec_interval_max,
                                    struct FbraController **out);

/**
 * # Safety
 * `ctrl` must be NULL or a handle from [`fbra_controller_new`] not yet freed.
 */
void fbra_controller_free(struct FbraController *ctrl);

/**
 * Feeds one receiver report. Writes `out` and returns `FBRA_STATUS_OK` when
 * a decision was made, `FBRA_STATUS_IGNORED` during a rate-control pause.
 *
 * # Safety
 * All pointers must be valid; the report's event arrays must hold their
 * stated number of entries.
 */
enum FbraStatus fbra_controller_on_report(struct FbraController *ctrl,
                                          uint64_t now_us,
                                          const struct FbraReport *report,
                                          const struct FbraMeasurement *meas,
                                          struct FbraDecision *out);

/**
 * Checks the feedback timeout. Writes `out` and returns `FBRA_STATUS_OK`
 * when the rate was cut, `FBRA_STATUS_NO_DECISION` otherwise.
 *
 * # Safety
 * `ctrl` and `out` must be valid.
 */
enum FbraStatus fbra_controller_on_tick(struct FbraController *ctrl,
                                        uint64_t now_us,
                                        struct FbraDecision *out);

/**
 * # Safety
 * `ctrl` must be a valid handle.
 */
enum FbraState fbra_controller_state(const struct FbraController *ctrl);

/**
 * # Safety
 * `ctrl` must be a valid handle.
 */
uint64_t fbra_controller_target_rate_bps(const struct FbraController *ctrl);

/**
 * # Safety
 * `ctrl` must be a valid handle.
 */
bool fbra_controller_fec_enabled(const struct FbraController *ctrl);

/**
 * # Safety
 * `ctrl` must be a valid handle.
 */
uint8_t fbra_controller_fec_interval(const struct FbraController *ctrl);

/**
 * Rate after congestion for the given sending rate and goodput.
 */
uint64_t fbra_undershoot_bps(uint64_t sending_rate_bps, uint64_t goodput_bps);

/**
 * Rate restored after a pause. Returns false (and leaves `out` alone) when
 * the report after the pause was not clean.
 *
 * # Safety
 * `out` must be valid.
 */
bool fbra_bounce_back_bps(uint64_t stored_goodput_bps, bool report_clean, uint64_t *out);

/**
 * Whether 16-bit sequence number `a` comes after `b`, modulo wraparound.
 */
bool fbra_seq_after(uint16_t a, uint16_t b);

/**
 * Builds a parity packet over `count` (2..14) consecutive packets.
 *
 * # Safety
 * `packets` must point to `count` packets with valid payload pointers;
 * `out` must be valid.
 */
enum FbraStatus fbra_fec_encode(const struct FbraMediaPacket *packets,
                                size_t count,
                                uint64_t send_ts_us,
                                struct FbraFecPacket **out);

/**
 * # Safety
 * `fec` must be NULL or a handle from [`fbra_fec_encode`] not yet freed.
 */
void fbra_fec_free(struct FbraFecPacket *fec);

/**
 * Number of media packets the parity packet covers.
 *
 * # Safety
 * `fec` must be a valid handle.
 */
uint8_t fbra_fec_block_len(const struct FbraFecPacket *fec);

/**
 * Bytes on the wire, header included.
 *
 * # Safety
 * `fec` must be a valid handle.
 */
size_t fbra_fec_wire_size(const struct FbraFecPacket *fec);

/**
 * Rebuilds the one packet of the block missing from `received`. On success
 * the payload is copied into `buf` and `out.payload` points at it.
 *
 * # Safety
 * `fec` must be a valid handle, `received` must hold `count` packets with
 * valid payloads, `buf` must have `buf_len` writable bytes and `out` must be
 * valid.
 */
enum FbraStatus fbra_fec_recover(const struct FbraFecPacket *fec,
                                 const struct FbraMediaPacket *received,
                                 size_t count,
                                 uint8_t *buf,
                                 size_t buf_len,
                                 struct FbraMediaPacket *out);

/**
 * Runs a scenario given as config text with the given seed and returns its
 * metrics summary as a JSON string, to be released with
 * [`fbra_string_free`]. A schedule file path in the text is resolved
 * against `base_dir` (NULL means the working directory).
 *
 * # Safety
 * `config` must be a NUL-terminated string, `base_dir` NULL or one, and
 * `out_json` valid.
 */
enum FbraStatus fbra_run_scenario(const char *config,
                                  const char *base_dir,
                                  uint64_t seed,
                                  char **out_json);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a string from this library not yet freed.
 */
void fbra_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FBRA_H */
