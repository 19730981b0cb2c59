#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "csv/common.hpp"

namespace csv {

// Global partition plan: size bounds (L,H) and per-ROI supervertex counts
// K_r with sum K_total, each K_r inside [ceil(n_r/H), floor(n_r/L)].
struct PartitionPlan {
    int L = 1;
    int H = 1;
    std::map<int, int> counts;  // ROI id -> K_r
    int k_total = 0;
    int relaxation_rank = 0;  // index of the (L,H) candidate used, 0 = tightest
};

// [ceil(n_r/H), floor(n_r/L)], or nullopt when empty.
std::optional<std::pair<int, int>> feasible_range(int n_r, int L, int H);

// Bound candidates from tightest to loosest: start at
// (floor(s_bar), ceil(s_bar) + delta0) with delta0 = ceil(delta0_frac*s_bar),
// then widen by one on each side per step, L never below 1, H capped at
// max n_r (any larger H admits the same allocations and the same size
// checks). The last candidate is (1, max n_r).
std::vector<std::pair<int, int>> candidate_bounds(const std::map<int, int>& sizes,
                                                  int k_total, double delta0_frac = 0.15);

// Exact allocation minimizing sum_r (n_r/K_r - s_bar)^2 subject to
// sum K_r = k_total and the per-ROI ranges; lexicographically smallest by
// ROI id among optima. nullopt when no allocation exists for these bounds.
std::optional<PartitionPlan> plan_allocation(const std::map<int, int>& sizes, int k_total,
                                             std::pair<int, int> bounds);

// First candidate (starting at start_rank) admitting a feasible allocation.
// Throws unpartitionable_error with per-ROI range diagnostics when all
// candidates are exhausted.
PartitionPlan plan(const std::map<int, int>& sizes, int k_total, int start_rank = 0,
                   double delta0_frac = 0.15);

// Resume after a downstream rejection of `rejected`.
PartitionPlan plan_next(const std::map<int, int>& sizes, const PartitionPlan& rejected,
                        double delta0_frac = 0.15);

double plan_objective(const std::map<int, int>& sizes, int k_total,
                      const std::map<int, int>& counts);

}  // namespace csv
