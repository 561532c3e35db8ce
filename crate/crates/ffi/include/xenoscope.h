#ifndef XENOSCOPE_H
#define XENOSCOPE_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum XsActionCategory {
  XS_ACTION_CATEGORY_INDIRECT = 0,
  XS_ACTION_CATEGORY_DIRECT = 1,
} XsActionCategory;

typedef enum XsCountryStrategy {
  XS_COUNTRY_STRATEGY_ACTOR1_FIRST = 0,
  XS_COUNTRY_STRATEGY_NON_REF_ACTOR = 1,
  XS_COUNTRY_STRATEGY_ACTION_GEO = 2,
} XsCountryStrategy;

typedef enum XsMatchMode {
  XS_MATCH_MODE_PREFIX = 0,
  XS_MATCH_MODE_EXACT_SET = 1,
} XsMatchMode;

typedef enum XsStatus {
  XS_STATUS_OK = 0,
  XS_STATUS_NULL_POINTER = 1,
  XS_STATUS_INVALID_UTF8 = 2,
  XS_STATUS_INVALID_ARGUMENT = 3,
  XS_STATUS_PARSE_ERROR = 4,
  XS_STATUS_NOT_FOUND = 5,
  XS_STATUS_INDEX_OUT_OF_RANGE = 6,
  XS_STATUS_PANIC = 99,
} XsStatus;

// Country code lookup table.
typedef struct XsRegistry XsRegistry;

// Output of [`xs_session_run`].
typedef struct XsResult XsResult;

// Accumulates GDELT lines of all three kinds for one filter run.
typedef struct XsSession XsSession;

typedef struct XsCounters {
  uint64_t initial_records;
  uint64_t after_ref_actor;
  uint64_t after_country_code;
  uint64_t unique_events;
} XsCounters;

// One retained event. `country` is a NUL-terminated alpha-3 code;
// `root_code` is 0 when the event has no usable CAMEO root code.
typedef struct XsEvent {
  uint64_t global_event_id;
  char country[4];
  uint8_t root_code;
  uint32_t n_source_documents;
} XsEvent;

typedef struct XsGlobalSplit {
  uint64_t direct;
  uint64_t indirect;
  uint64_t unclassified;
} XsGlobalSplit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next library call on the same thread.
const char *xs_last_error_message(void);

// # Safety
// `s` must come from this library and not have been freed.
void xs_string_free(char *s);

// Library version as a static NUL-terminated string.
const char *xs_version(void);

// `F * TP / RP`. Fails with `InvalidArgument` when `rp` is 0, `tp` is 0
// or `rp > tp`.
//
// # Safety
// `out` must be valid for writes.
enum XsStatus xs_scaled_frequency(uint64_t f, uint64_t rp, uint64_t tp, double *out);

// # Safety
// `out` must be valid for writes.
enum XsStatus xs_categorize(uint8_t root_code, enum XsActionCategory *out);

// Parses a textual root code such as `"14"`.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be valid for writes.
enum XsStatus xs_parse_root_code(const char *text, uint8_t *out);

// Round-half-up percentage of `part` in `total`.
//
// # Safety
// `out` must be valid for writes.
enum XsStatus xs_rounded_percent(uint64_t part, uint64_t total, uint64_t *out);

// # Safety
// `out` must be valid for writes.
enum XsStatus xs_registry_new(struct XsRegistry **out);

// # Safety
// `registry` must come from [`xs_registry_new`] and not have been freed.
void xs_registry_free(struct XsRegistry *registry);

// Resolves a country label (alpha-3, alpha-2, name or alias) and writes
// the alpha-3 code plus NUL into `out`.
//
// # Safety
// `registry` must be a live handle, `raw` a NUL-terminated string and
// `out` valid for 4 bytes.
enum XsStatus xs_registry_normalize(const struct XsRegistry *registry, const char *raw, char *out);

// # Safety
// `out` must be valid for writes.
enum XsStatus xs_session_new(enum XsMatchMode match_mode,
                             enum XsCountryStrategy strategy,
                             struct XsSession **out);

// # Safety
// `session` must come from [`xs_session_new`] and not have been freed.
void xs_session_free(struct XsSession *session);

// Adds one tab-separated Event export line. A malformed line is
// counted as skipped and reported with `ParseError`.
//
// # Safety
// `session` must be a live handle and `line` a NUL-terminated string.
enum XsStatus xs_session_add_event_line(struct XsSession *session, const char *line);

// # Safety
// As [`xs_session_add_event_line`].
enum XsStatus xs_session_add_mention_line(struct XsSession *session, const char *line);

// # Safety
// As [`xs_session_add_event_line`].
enum XsStatus xs_session_add_gkg_line(struct XsSession *session, const char *line);

// Number of lines rejected so far.
//
// # Safety
// `session` must be a live handle.
uint64_t xs_session_skipped_lines(const struct XsSession *session);

// Runs the filter cascade over everything added so far. The session
// stays usable.
//
// # Safety
// `session` must be a live handle; `out` must be valid for writes.
enum XsStatus xs_session_run(const struct XsSession *session, struct XsResult **out);

// # Safety
// `result` must come from [`xs_session_run`] and not have been freed.
void xs_result_free(struct XsResult *result);

// # Safety
// `result` must be a live handle; `out` must be valid for writes.
enum XsStatus xs_result_counters(const struct XsResult *result, struct XsCounters *out);

// Number of retained events; 0 for a null handle.
//
// # Safety
// `result` must be a live handle or null.
size_t xs_result_event_count(const struct XsResult *result);

// Event `index`, in ascending GLOBALEVENTID order.
//
// # Safety
// `result` must be a live handle; `out` must be valid for writes.
enum XsStatus xs_result_event(const struct XsResult *result, size_t index, struct XsEvent *out);

// Direct / Indirect / unclassified totals over the retained events.
//
// # Safety
// `result` must be a live handle; `out` must be valid for writes.
enum XsStatus xs_result_global_split(const struct XsResult *result, struct XsGlobalSplit *out);

// Counters and diagnostics as `key=value` lines. Free with
// [`xs_string_free`].
//
// # Safety
// `result` must be a live handle or null.
char *xs_result_report(const struct XsResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XENOSCOPE_H */
