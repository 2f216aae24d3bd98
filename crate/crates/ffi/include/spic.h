#ifndef SPIC_H
#define SPIC_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Feature distribution of generated graphs.
 */
#define SPIC_FEATURES_RANDOM_UNIFORM 0

#define SPIC_FEATURES_ONEHOT_BLOCK_NOISY 1

/**
 * Result code of every fallible call.
 */
typedef enum SpicStatus {
  SPIC_STATUS_OK = 0,
  SPIC_STATUS_NULL_POINTER = 1,
  SPIC_STATUS_INVALID_ARGUMENT = 2,
  SPIC_STATUS_IO = 3,
  SPIC_STATUS_PARSE = 4,
  SPIC_STATUS_DIMENSION = 5,
  SPIC_STATUS_NUMERIC = 6,
  SPIC_STATUS_PANIC = 7,
} SpicStatus;

/**
 * Opaque aggregator handle (operator plus shift).
 */
typedef struct SpicAggregator SpicAggregator;

/**
 * Opaque graph handle.
 */
typedef struct SpicGraph SpicGraph;

/**
 * Settings for [`spic_run_experiment`]; start from
 * [`spic_run_options_default`].
 */
typedef struct SpicRunOptions {
  /**
   * NUL-terminated model name: dad, da, agnn, gat_sym, gat_asym,
   * rl_sym, rl_am, appnp or poly.
   */
  const char *model;
  /**
   * NUL-terminated head variant: linear, relu1, general or w. Null
   * selects linear (or the polynomial head for poly).
   */
  const char *variant;
  size_t k;
  uint32_t beta;
  double alpha;
  double eps;
  size_t runs;
  size_t epochs;
  double learning_rate;
  double weight_decay;
  size_t hidden;
  uint64_t seed;
} SpicRunOptions;

/**
 * Aggregate of one experiment. Metrics are fractions in [0, 1].
 */
typedef struct SpicRunSummary {
  double mean;
  double std;
  size_t runs;
  double seconds_per_run;
  /**
   * 1 when the metric is micro-F1, 0 for accuracy.
   */
  uint32_t multilabel;
} SpicRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *spic_version(void);

/**
 * Message of the last failed call on this thread ("" if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *spic_last_error_message(void);

/**
 * Loads a graph directory.
 *
 * # Safety
 * `dir` is a NUL-terminated path; `out` is writable.
 */
enum SpicStatus spic_graph_load(const char *dir, struct SpicGraph **out);

/**
 * Writes a graph directory.
 *
 * # Safety
 * `graph` is a live handle; `dir` is a NUL-terminated path.
 */
enum SpicStatus spic_graph_save(const struct SpicGraph *graph, const char *dir);

/**
 * Samples a stochastic block model with `blocks` equal blocks of `size`
 * nodes; `feature_mode` is one of the `SPIC_FEATURES_*` constants.
 *
 * # Safety
 * `out` is writable.
 */
enum SpicStatus spic_graph_generate_sbm(size_t blocks,
                                        size_t size,
                                        double p_in,
                                        double p_out,
                                        size_t labeled_per_block,
                                        size_t features,
                                        uint32_t feature_mode,
                                        uint64_t seed,
                                        struct SpicGraph **out);

/**
 * Copy of `graph` with `d` i.i.d. Uniform[0,1) feature columns.
 *
 * # Safety
 * `graph` is a live handle; `out` is writable.
 */
enum SpicStatus spic_graph_randomize_features(const struct SpicGraph *graph,
                                              size_t d,
                                              uint64_t seed,
                                              struct SpicGraph **out);

/**
 * Releases a graph; null is ignored.
 *
 * # Safety
 * `graph` is null or a handle not yet freed.
 */
void spic_graph_free(struct SpicGraph *graph);

/**
 * # Safety
 * `graph` is null or a live handle.
 */
size_t spic_graph_num_nodes(const struct SpicGraph *graph);

/**
 * # Safety
 * `graph` is null or a live handle.
 */
size_t spic_graph_num_features(const struct SpicGraph *graph);

/**
 * # Safety
 * `graph` is null or a live handle.
 */
size_t spic_graph_num_classes(const struct SpicGraph *graph);

/**
 * Undirected edge count.
 *
 * # Safety
 * `graph` is null or a live handle.
 */
size_t spic_graph_num_edges(const struct SpicGraph *graph);

/**
 * Copies the n × d feature matrix into `out` (row-major, `len` = n·d).
 *
 * # Safety
 * `graph` is a live handle; `out` holds `len` doubles.
 */
enum SpicStatus spic_graph_features(const struct SpicGraph *graph, double *out, size_t len);

/**
 * Builds the aggregator of a named model (see [`SpicRunOptions::model`];
 * appnp and poly give DAD) with shift `beta`. `eps` is the AGNN
 * temperature; `seed` drives the random families.
 *
 * # Safety
 * `graph` is a live handle; `model` is NUL-terminated; `out` is writable.
 */
enum SpicStatus spic_aggregator_build(const struct SpicGraph *graph,
                                      const char *model,
                                      uint32_t beta,
                                      double eps,
                                      uint64_t seed,
                                      struct SpicAggregator **out);

/**
 * # Safety
 * `agg` is null or a handle not yet freed.
 */
void spic_aggregator_free(struct SpicAggregator *agg);

/**
 * Node count of the operator.
 *
 * # Safety
 * `agg` is null or a live handle.
 */
size_t spic_aggregator_size(const struct SpicAggregator *agg);

/**
 * `out = (βI + M)^k x` for a row-major n × d `x`; `normalize` ≠ 0 rescales
 * columns by their max-abs value after each iteration. `x` and `out` may
 * not overlap.
 *
 * # Safety
 * `agg` is a live handle; `x` and `out` each hold n·d doubles.
 */
enum SpicStatus spic_propagate(const struct SpicAggregator *agg,
                               const double *x,
                               size_t n,
                               size_t d,
                               size_t k,
                               int32_t normalize,
                               double *out);

/**
 * Natural-log entropy of every row of the operator into `out` (`len` =
 * node count).
 *
 * # Safety
 * `agg` is a live handle; `out` holds `len` doubles.
 */
enum SpicStatus spic_attention_entropy(const struct SpicAggregator *agg, double *out, size_t len);

/**
 * Defaults matching the command line: dad, linear head, k = 2, 20 runs
 * of 100 epochs.
 */
struct SpicRunOptions spic_run_options_default(void);

/**
 * Trains `options.runs` models on `graph` and writes the aggregate.
 *
 * # Safety
 * `graph` is a live handle; `options` points to initialized options with
 * valid strings; `summary` is writable.
 */
enum SpicStatus spic_run_experiment(const struct SpicGraph *graph,
                                    const struct SpicRunOptions *options,
                                    struct SpicRunSummary *summary);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPIC_H */
