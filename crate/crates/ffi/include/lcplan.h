#ifndef LCPLAN_H
#define LCPLAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LcStatus {
  LC_STATUS_OK = 0,
  LC_STATUS_NULL_POINTER = 1,
  LC_STATUS_INVALID_UTF8 = 2,
  LC_STATUS_PARSE = 3,
  LC_STATUS_INVALID_GRAPH = 4,
  LC_STATUS_INFEASIBLE = 5,
  LC_STATUS_INSTANCE_TOO_LARGE = 6,
  LC_STATUS_INTERNAL = 7,
} LcStatus;

// Opaque exchange graph with any contexts loaded alongside it.
typedef struct LcGraph LcGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parses a graph or world JSON document into a new handle.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum LcStatus lcplan_graph_from_json(const char *json, struct LcGraph **out);

// Releases a handle; null is ignored.
//
// # Safety
// `g` must come from [`lcplan_graph_from_json`] and not be used afterwards.
void lcplan_graph_free(struct LcGraph *g);

// # Safety
// `g` must be a live handle and `out` a valid pointer.
enum LcStatus lcplan_graph_num_vertices(const struct LcGraph *g, uintptr_t *out);

// # Safety
// `g` must be a live handle and `out` a valid pointer.
enum LcStatus lcplan_graph_num_edges(const struct LcGraph *g, uintptr_t *out);

// # Safety
// `g` must be a live handle and `out` a valid pointer.
enum LcStatus lcplan_graph_max_degree(const struct LcGraph *g, uintptr_t *out);

// Runs a planner. `request_json` holds the solve request (objective,
// algorithm, comm, b, bi, k, ki, kij, lazy, seed); on success `*out`
// receives the plan JSON, to be freed with [`lcplan_string_free`].
//
// # Safety
// `g` must be a live handle, `request_json` NUL-terminated and `out` valid.
enum LcStatus lcplan_solve(const struct LcGraph *g, const char *request_json, char **out);

// A-priori Submodular-Greedy ratio for budgets `b`, `k` and maximum degree `delta`.
double lcplan_guarantee_alpha(uintptr_t b, uintptr_t k, uintptr_t delta);

// # Safety
// `s` must come from this library and not be used afterwards; null is ignored.
void lcplan_string_free(char *s);

// Message of the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *lcplan_last_error_message(void);

// Library version as a static string.
const char *lcplan_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LCPLAN_H */
