#ifndef MGKERNEL_H
#define MGKERNEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MgStatus {
  MG_STATUS_OK = 0,
  // malformed graph, point or parameter
  MG_STATUS_INVALID_INPUT = 1,
  // a numerical method could not meet its tolerance
  MG_STATUS_NUMERICAL = 2,
  MG_STATUS_UNSUPPORTED = 3,
  MG_STATUS_NULL_POINTER = 4,
  // a Rust panic was caught at the boundary
  MG_STATUS_PANIC = 5,
} MgStatus;

// A metric graph.
typedef struct MgGraph MgGraph;

// Eigenvalues found in a window, ascending.
typedef struct MgSpectrum MgSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread. Valid until the next
// failing call on the same thread; never null.
const char *mg_last_error(void);

// Library version as a static string.
const char *mg_version(void);

// Parse a graph from its JSON description.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum MgStatus mg_graph_from_json(const char *json, struct MgGraph **out);

// # Safety
// `g` must come from `mg_graph_from_json` and not be freed twice. Null is ignored.
void mg_graph_free(struct MgGraph *g);

// # Safety
// `g` must be a live graph handle or null (which gives 0).
size_t mg_graph_edge_count(const struct MgGraph *g);

// # Safety
// `g` must be a live graph handle or null (which gives 0).
size_t mg_graph_vertex_count(const struct MgGraph *g);

// Heat kernel K_t(x, y) between (x_edge, x_pos) and (y_edge, y_pos), with the
// certified truncation bound written to `bound`.
//
// # Safety
// `g` must be a live graph handle; `value` and `bound` valid pointers.
enum MgStatus mg_heat_kernel(const struct MgGraph *g,
                             size_t x_edge,
                             double x_pos,
                             size_t y_edge,
                             double y_pos,
                             double t,
                             double eps,
                             double *value,
                             double *bound);

// Kirchhoff Laplacian eigenvalues in [lo, hi] on an equilateral graph.
//
// # Safety
// `g` must be a live graph handle and `out` a valid pointer.
enum MgStatus mg_spectrum(const struct MgGraph *g, double lo, double hi, struct MgSpectrum **out);

// Number of distinct eigenvalues away from the Dirichlet points.
//
// # Safety
// `s` must be a live spectrum handle or null (which gives 0).
size_t mg_spectrum_len(const struct MgSpectrum *s);

// # Safety
// `s` must be a live spectrum handle; `lambda` and `multiplicity` valid pointers.
enum MgStatus mg_spectrum_get(const struct MgSpectrum *s,
                              size_t index,
                              double *lambda,
                              size_t *multiplicity);

// Number of Dirichlet points in the window, where the reduction is not used.
//
// # Safety
// `s` must be a live spectrum handle or null (which gives 0).
size_t mg_spectrum_dirichlet_len(const struct MgSpectrum *s);

// # Safety
// `s` must be from `mg_spectrum` and not be freed twice. Null is ignored.
void mg_spectrum_free(struct MgSpectrum *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MGKERNEL_H */
