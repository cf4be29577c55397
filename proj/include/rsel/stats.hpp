#pragma once

#include <cstdint>

namespace rsel {

// Query/update instrumentation. Counters are cumulative; per-query figures
// are derived by the caller from deltas.
struct Stats {
    uint64_t tree_nodes_visited = 0;   // main-tree nodes touched by queries
    uint64_t rank_nodes_visited = 0;   // ranking-tree nodes touched by queries
    uint64_t good_cases = 0;           // packed-section branch resolved cheaply
    uint64_t bad_cases = 0;            // fell back to exact binary search
    uint64_t slow_fallbacks = 0;       // sections exhausted, exact evaluation
    uint64_t matrix_flushes = 0;
    uint64_t rebuilds = 0;
    uint64_t last_query_bad_cases = 0; // reset at the start of each selection

    void reset_query() { last_query_bad_cases = 0; }
};

// Space accounting in bits, by component. Sizes are derived from the
// structures' own bookkeeping (payload capacity, summary vectors, node
// overhead), so reports are deterministic for a given content.
struct SpaceBreakdown {
    uint64_t string_payload = 0;
    uint64_t string_summaries = 0;
    uint64_t string_nodes = 0;
    uint64_t ranking_sums = 0;
    uint64_t ranking_matrix_tables = 0;
    uint64_t ranking_matrix_packed = 0;
    uint64_t ranking_nodes = 0;
    uint64_t tree_nodes = 0;
    uint64_t order_index = 0;

    uint64_t total() const {
        return string_payload + string_summaries + string_nodes + ranking_sums +
               ranking_matrix_tables + ranking_matrix_packed + ranking_nodes +
               tree_nodes + order_index;
    }
};

} // namespace rsel
