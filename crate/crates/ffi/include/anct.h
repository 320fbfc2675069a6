#ifndef ANCT_H
#define ANCT_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

enum AnctStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  ANCT_STATUS_OK = 0,
  ANCT_STATUS_NULL_POINTER = -1,
  ANCT_STATUS_INVALID_UTF8 = -2,
  ANCT_STATUS_INVALID_CONFIG = -3,
  ANCT_STATUS_BUFFER_TOO_SMALL = -4,
  ANCT_STATUS_INVALID_ARGUMENT = -5,
  ANCT_STATUS_PANIC = -6,
};
#ifndef __cplusplus
typedef int32_t AnctStatus;
#endif // __cplusplus

/**
 * Scenario configuration handle.
 */
typedef struct AnctConfig AnctConfig;

/**
 * Results of one finished run.
 */
typedef struct AnctSummary AnctSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Writes the last error message of this thread into `buf`.
 */
AnctStatus anct_last_error_message(char *buf, size_t len, size_t *needed);

/**
 * New configuration holding the reference scenario.
 */
struct AnctConfig *anct_config_new(void);

/**
 * Parses scenario text (`key = value` lines) into a new handle.
 */
AnctStatus anct_config_parse(const char *text, struct AnctConfig **out);

AnctStatus anct_config_set(struct AnctConfig *cfg, const char *key, const char *value);

/**
 * Checks every scenario invariant without running.
 */
AnctStatus anct_config_validate(const struct AnctConfig *cfg);

void anct_config_free(struct AnctConfig *cfg);

/**
 * Validates and runs the scenario to completion.
 */
AnctStatus anct_run(const struct AnctConfig *cfg, struct AnctSummary **out);

/**
 * Packet delivery ratio in [0, 1]; NaN for a NULL handle.
 */
double anct_summary_pdr(const struct AnctSummary *s);

/**
 * Mean end-to-end delay in milliseconds; NaN when nothing was delivered.
 */
double anct_summary_mean_delay_ms(const struct AnctSummary *s);

uint64_t anct_summary_data_sent(const struct AnctSummary *s);

uint64_t anct_summary_delivered(const struct AnctSummary *s);

uint64_t anct_summary_control_bytes(const struct AnctSummary *s);

uint64_t anct_summary_drops_attacker(const struct AnctSummary *s);

/**
 * Number of distinct nodes some neighbor marked malicious.
 */
uint64_t anct_summary_marked_nodes(const struct AnctSummary *s);

/**
 * Writes the summary CSV row (without header) into `buf`.
 */
AnctStatus anct_summary_csv_row(const struct AnctSummary *s, char *buf, size_t len, size_t *needed);

void anct_summary_free(struct AnctSummary *s);

/**
 * Counter-mode transform of `len` bytes (encryption and decryption are the
 * same operation). `cipher` is 0 for AES-128 and 1 for the test cipher; the
 * counter is big-endian. `input` and `output` may alias.
 */
AnctStatus anct_ctr_apply(uint32_t cipher,
                          const uint8_t (*key)[16],
                          const uint8_t (*counter)[16],
                          const uint8_t *input,
                          size_t len,
                          uint8_t *output);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANCT_H */
