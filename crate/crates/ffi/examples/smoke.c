/* Minimal C client: generate a graph, propagate, train. */
#include <stdio.h>
#include <stdlib.h>

#include "spic.h"

static int fail(const char *what) {
    fprintf(stderr, "%s failed: %s\n", what, spic_last_error_message());
    return 1;
}

int main(void) {
    SpicGraph *g = NULL;
    if (spic_graph_generate_sbm(2, 30, 0.3, 0.02, 3, 8, SPIC_FEATURES_RANDOM_UNIFORM, 7, &g) != SPIC_STATUS_OK)
        return fail("generate");
    size_t n = spic_graph_num_nodes(g), d = spic_graph_num_features(g);

    SpicAggregator *agg = NULL;
    if (spic_aggregator_build(g, "dad", 0, 1.0, 0, &agg) != SPIC_STATUS_OK)
        return fail("aggregator");
    double *x = malloc(n * d * sizeof *x), *y = malloc(n * d * sizeof *y);
    if (spic_graph_features(g, x, n * d) != SPIC_STATUS_OK)
        return fail("features");
    if (spic_propagate(agg, x, n, d, 2, 0, y) != SPIC_STATUS_OK)
        return fail("propagate");

    if (spic_propagate(agg, x, n + 1, d, 2, 0, y) != SPIC_STATUS_DIMENSION)
        return fail("dimension check");

    SpicRunOptions opts = spic_run_options_default();
    opts.runs = 2;
    opts.epochs = 30;
    SpicRunSummary summary;
    if (spic_run_experiment(g, &opts, &summary) != SPIC_STATUS_OK)
        return fail("run");

    printf("spic %s: n=%zu d=%zu y[0]=%.6f mean=%.4f runs=%zu\n", spic_version(), n, d, y[0], summary.mean,
           summary.runs);
    free(x);
    free(y);
    spic_aggregator_free(agg);
    spic_graph_free(g);
    return 0;
}
