#ifndef FAIRSIM_H
#define FAIRSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FsStatus {
  FS_STATUS_OK = 0,
  FS_STATUS_NULL_ARGUMENT = 1,
  FS_STATUS_INVALID_UTF8 = 2,
  FS_STATUS_CONFIG = 3,
  FS_STATUS_NOT_FOUND = 4,
  FS_STATUS_RUN = 5,
  FS_STATUS_BOOK = 6,
  FS_STATUS_AUDIT = 7,
  FS_STATUS_IO = 8,
  FS_STATUS_PANIC = 9,
} FsStatus;

typedef enum FsSide {
  FS_SIDE_BID = 0,
  FS_SIDE_ASK = 1,
} FsSide;

// Order book whose arrival clock advances by 1ns per message.
typedef struct FsBook FsBook;

typedef struct FsRun FsRun;

typedef struct FsScenario FsScenario;

typedef struct FsRequirements {
  uint64_t req1_max_spread_ns;
  uint64_t req2_violations;
  uint64_t req3_violations;
} FsRequirements;

// Best price level on one side; `present` is false for an empty side.
typedef struct FsBest {
  bool present;
  int64_t price;
  uint64_t qty;
} FsBest;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread, or "" after a
// success. Valid until the next fairsim call on the same thread.
const char *fs_last_error(void);

// # Safety
// `s` must be null or a string returned by this library.
void fs_string_free(char *s);

// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum FsStatus fs_scenario_from_json(const char *json, struct FsScenario **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FsStatus fs_scenario_from_file(const char *path, struct FsScenario **out);

// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum FsStatus fs_scenario_bundled(const char *name, struct FsScenario **out);

// Override the number of stimuli.
//
// # Safety
// `scenario` must be a live handle.
enum FsStatus fs_scenario_set_races(struct FsScenario *scenario, uint64_t races);

// # Safety
// `scenario` must be null or a live handle, not used afterwards.
void fs_scenario_free(struct FsScenario *scenario);

// Run `scenario` with `seed`. The event trace is not kept.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum FsStatus fs_run(const struct FsScenario *scenario, uint64_t seed, struct FsRun **out);

// # Safety
// `run` must be null or a live handle, not used afterwards.
void fs_run_free(struct FsRun *run);

// Number of judgeable races.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum FsStatus fs_run_race_count(const struct FsRun *run, uint64_t *out);

// Estimated ε at `delta`.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum FsStatus fs_run_epsilon_at(const struct FsRun *run, double delta, uint64_t *out);

// Estimated common latency `l` in ns.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum FsStatus fs_run_l_hat(const struct FsRun *run, int64_t *out);

// # Safety
// `run` must be a live handle; `out` must be writable.
enum FsStatus fs_run_requirements(const struct FsRun *run, struct FsRequirements *out);

// The fairness report as JSON. Free with `fs_string_free`.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum FsStatus fs_run_fairness_json(const struct FsRun *run, char **out);

// Per-race CSV. Free with `fs_string_free`.
//
// # Safety
// `run` must be a live handle; `out` must be writable.
enum FsStatus fs_run_races_csv(const struct FsRun *run, char **out);

// Write the standard run artifacts into `dir`.
//
// # Safety
// `run` must be a live handle; `dir` must be a NUL-terminated string.
enum FsStatus fs_run_write_outputs(const struct FsRun *run, const char *dir);

// Judge one race: entry `i` reacted in `reaction_ns[i]` and arrived at
// `arrival_ns[i]`, for an event at `t_e_ns`. Needs at least two entries.
//
// # Safety
// Both arrays must hold `n` elements; `fair` must be writable.
enum FsStatus fs_judge_race(uint64_t t_e_ns,
                            const uint64_t *reaction_ns,
                            const uint64_t *arrival_ns,
                            uintptr_t n,
                            uint64_t epsilon_ns,
                            bool *fair);

struct FsBook *fs_book_new(void);

// # Safety
// `book` must be null or a live handle, not used afterwards.
void fs_book_free(struct FsBook *book);

// Submit a limit order. `filled` (may be null) receives the quantity
// executed on entry; any remainder rests.
//
// # Safety
// `book` must be a live handle.
enum FsStatus fs_book_limit(struct FsBook *book,
                            uint64_t id,
                            uint32_t participant,
                            enum FsSide side,
                            int64_t price,
                            uint64_t qty,
                            uint64_t *filled);

// Submit a market order; the unfilled remainder is discarded.
//
// # Safety
// `book` must be a live handle.
enum FsStatus fs_book_market(struct FsBook *book,
                             uint64_t id,
                             uint32_t participant,
                             enum FsSide side,
                             uint64_t qty,
                             uint64_t *filled);

// Cancel a resting order. `cancelled` is false when the order is gone or
// belongs to someone else.
//
// # Safety
// `book` must be a live handle; `cancelled` must be writable.
enum FsStatus fs_book_cancel(struct FsBook *book,
                             uint64_t id,
                             uint32_t participant,
                             bool *cancelled);

// # Safety
// `book` must be a live handle; `out` must be writable.
enum FsStatus fs_book_best(const struct FsBook *book, enum FsSide side, struct FsBest *out);

// Library version; a static string, never freed.
const char *fs_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAIRSIM_H */
