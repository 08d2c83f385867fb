#ifndef COREECS_H
#define COREECS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum CoreecsStatus {
  COREECS_STATUS_OK = 0,
  COREECS_STATUS_NULL_POINTER = 1,
  COREECS_STATUS_INVALID_ARGUMENT = 2,
  COREECS_STATUS_UNKNOWN_SCENARIO = 3,
  COREECS_STATUS_SCHEMA = 4,
  COREECS_STATUS_CAPACITY = 5,
  COREECS_STATUS_SHAPE = 6,
  COREECS_STATUS_TOO_MANY_LINEARIZATIONS = 7,
  COREECS_STATUS_ANALYSIS = 8,
  COREECS_STATUS_RUNTIME = 9,
  COREECS_STATUS_PANIC = 10,
} CoreecsStatus;

typedef enum CoreecsVerdict {
  COREECS_VERDICT_SAFE = 0,
  COREECS_VERDICT_UNSAFE = 1,
  COREECS_VERDICT_UNKNOWN = 2,
} CoreecsVerdict;

// A scenario together with its current state.
typedef struct CoreecsWorld CoreecsWorld;

typedef struct CoreecsFuzzSummary {
  uint64_t instances;
  uint64_t safe_deterministic;
  uint64_t unknown_deterministic;
  uint64_t unknown_nondeterministic;
  uint64_t skipped;
  uint64_t safe_nondeterministic;
  uint64_t parallel_divergences;
  uint64_t undeclared_writes;
} CoreecsFuzzSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates a world running the named scenario, at its start state.
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer. The
// handle written to `*out` must be released with [`coreecs_world_free`].
enum CoreecsStatus coreecs_world_new(const char *name, struct CoreecsWorld **out);

// Releases a world. Null is ignored.
//
// # Safety
// `w` must come from [`coreecs_world_new`] and not be used afterwards.
void coreecs_world_free(struct CoreecsWorld *w);

// Advances the world by `frames` frames. `workers == 0` uses the reference
// interpreter; otherwise the threaded runtime runs with `workers` threads and
// a per-frame seed derived from `seed`.
//
// # Safety
// `w` must be a live handle.
enum CoreecsStatus coreecs_world_step(struct CoreecsWorld *w,
                                      uint32_t frames,
                                      uint32_t workers,
                                      uint64_t seed);

// Number of frames run so far.
//
// # Safety
// `w` must be a live handle and `out` a valid pointer.
enum CoreecsStatus coreecs_world_frame(const struct CoreecsWorld *w, uint64_t *out);

// The id the next fresh entity would receive.
//
// # Safety
// `w` must be a live handle and `out` a valid pointer.
enum CoreecsStatus coreecs_world_next_fresh(const struct CoreecsWorld *w, uint64_t *out);

// Renders the current state as one line of text.
//
// # Safety
// `w` must be a live handle and `out` a valid pointer. The string written
// to `*out` must be released with [`coreecs_string_free`].
enum CoreecsStatus coreecs_world_render(const struct CoreecsWorld *w, char **out);

// Safety verdict of the scenario's schedule at the current state.
//
// # Safety
// `w` must be a live handle and `out` a valid pointer.
enum CoreecsStatus coreecs_world_check(const struct CoreecsWorld *w, enum CoreecsVerdict *out);

// Runs the randomised determinism check.
//
// # Safety
// `out` must be a valid pointer.
enum CoreecsStatus coreecs_fuzz(uint32_t instances,
                                uint32_t max_invocations,
                                uint64_t seed,
                                struct CoreecsFuzzSummary *out);

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *coreecs_last_error(void);

// Releases a string returned by the library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void coreecs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COREECS_H */
