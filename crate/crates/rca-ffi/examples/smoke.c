/* Minimal C consumer of the rca ABI.
 *
 * Build from the workspace root:
 *   cargo build -p rca-ffi --release
 *   cc -I crates/rca-ffi/include crates/rca-ffi/examples/smoke.c \
 *      target/release/librca_ffi.a -lm -o smoke && ./smoke
 */
#include <assert.h>
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "rca.h"

int main(void) {
    RcaGraph *graph = NULL;
    RcaStatus status = rca_graph_from_json(
        "{\"nodes\": [\"X1\",\"X2\",\"X3\"], \"edges\": [[\"X1\",\"X2\"],[\"X2\",\"X3\"]]}",
        &graph);
    assert(status == RCA_STATUS_OK);

    bool polytree = false;
    assert(rca_graph_is_polytree(graph, &polytree) == RCA_STATUS_OK && polytree);

    const char *names[] = {"X1", "X2", "X3"};
    double values[] = {2.0, 9.0, 10.0};
    RcaScores *scores = NULL;
    assert(rca_scores_new(names, values, 3, 1000000, &scores) == RCA_STATUS_OK);

    char *json = NULL;
    assert(rca_smooth_traversal(scores, graph, "X3", &json) == RCA_STATUS_OK);
    assert(strstr(json, "\"chosen\":\"X2\"") != NULL);
    printf("smooth traversal: %s\n", json);
    rca_string_free(json);

    assert(fabs(rca_pval_maxjump(5.0, 10) - 0.059032563351928746) < 1e-14);
    assert(isnan(rca_pval_joint(1.0, 1)));

    rca_scores_free(scores);
    rca_graph_free(graph);
    printf("C smoke test passed\n");
    return 0;
}
