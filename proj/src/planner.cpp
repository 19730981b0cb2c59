#include "csv/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace csv {

std::optional<std::pair<int, int>> feasible_range(int n_r, int L, int H) {
    if (n_r < 1) throw validation_error("ROI size must be >= 1");
    if (L < 1 || L > H) throw validation_error("bounds must satisfy 1 <= L <= H");
    int lo = (n_r + H - 1) / H;
    int hi = n_r / L;
    if (lo > hi) return std::nullopt;
    return std::make_pair(lo, hi);
}

std::vector<std::pair<int, int>> candidate_bounds(const std::map<int, int>& sizes,
                                                  int k_total, double delta0_frac) {
    if (sizes.empty()) throw validation_error("no ROIs to plan");
    if (k_total < static_cast<int>(sizes.size()))
        throw validation_error("k_total below ROI count: some K_r would be 0");

    std::int64_t total = 0;
    int max_n = 0;
    for (const auto& [roi, n] : sizes) {
        if (n < 1) throw validation_error("ROI size must be >= 1");
        total += n;
        max_n = std::max(max_n, n);
    }
    const double s_bar = static_cast<double>(total) / k_total;
    const int delta0 = static_cast<int>(std::ceil(delta0_frac * s_bar));

    int L = std::max(1, static_cast<int>(std::floor(s_bar)));
    int H = std::min(max_n, static_cast<int>(std::ceil(s_bar)) + delta0);
    H = std::max(H, L);

    std::vector<std::pair<int, int>> out;
    out.emplace_back(L, H);
    while (L > 1 || H < max_n) {
        L = std::max(1, L - 1);
        H = std::min(max_n, H + 1);
        out.emplace_back(L, H);
    }
    return out;
}

double plan_objective(const std::map<int, int>& sizes, int k_total,
                      const std::map<int, int>& counts) {
    std::int64_t total = 0;
    for (const auto& [roi, n] : sizes) total += n;
    const double s_bar = static_cast<double>(total) / k_total;
    double obj = 0.0;
    for (const auto& [roi, n] : sizes) {
        double d = static_cast<double>(n) / counts.at(roi) - s_bar;
        obj += d * d;
    }
    return obj;
}

std::optional<PartitionPlan> plan_allocation(const std::map<int, int>& sizes, int k_total,
                                             std::pair<int, int> bounds) {
    const auto [L, H] = bounds;
    const int R = static_cast<int>(sizes.size());

    std::vector<int> roi_ids, n, lo, hi;
    roi_ids.reserve(R);
    for (const auto& [roi, size] : sizes) {
        auto range = feasible_range(size, L, H);
        if (!range) return std::nullopt;
        roi_ids.push_back(roi);
        n.push_back(size);
        lo.push_back(range->first);
        hi.push_back(range->second);
    }

    std::int64_t total = 0;
    for (int v : n) total += v;
    const double s_bar = static_cast<double>(total) / k_total;

    auto term = [&](int i, int k) {
        double d = static_cast<double>(n[i]) / k - s_bar;
        return d * d;
    };

    // Exact DP over (ROI suffix, remaining budget). The per-ROI cost term is
    // not convex in K_r over its whole range, so marginal-gain greedy can
    // miss the optimum; the DP cannot. dp[i][k] = min cost of allocating k
    // supervertices to ROIs i..R-1.
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> dp(R + 1, std::vector<double>(k_total + 1, INF));
    dp[R][0] = 0.0;
    for (int i = R - 1; i >= 0; --i) {
        for (int k = 0; k <= k_total; ++k) {
            double best = INF;
            for (int c = lo[i]; c <= std::min(hi[i], k); ++c) {
                double rest = dp[i + 1][k - c];
                if (rest == INF) continue;
                double cand = term(i, c) + rest;
                if (cand < best) best = cand;
            }
            dp[i][k] = best;
        }
    }
    if (dp[0][k_total] == INF) return std::nullopt;

    // Reconstruct, picking the smallest K_r at each ROI: lexicographically
    // smallest allocation by ROI id among the optima.
    PartitionPlan plan;
    plan.L = L;
    plan.H = H;
    plan.k_total = k_total;
    int remaining = k_total;
    for (int i = 0; i < R; ++i) {
        for (int c = lo[i]; c <= std::min(hi[i], remaining); ++c) {
            double rest = dp[i + 1][remaining - c];
            if (rest == INF) continue;
            if (term(i, c) + rest == dp[i][remaining]) {
                plan.counts[roi_ids[i]] = c;
                remaining -= c;
                break;
            }
        }
    }
    return plan;
}

PartitionPlan plan(const std::map<int, int>& sizes, int k_total, int start_rank,
                   double delta0_frac) {
    auto candidates = candidate_bounds(sizes, k_total, delta0_frac);
    for (int rank = start_rank; rank < static_cast<int>(candidates.size()); ++rank) {
        auto result = plan_allocation(sizes, k_total, candidates[rank]);
        if (result) {
            result->relaxation_rank = rank;
            return *result;
        }
    }

    std::ostringstream diag;
    auto [L, H] = candidates.back();
    diag << "no feasible allocation for k_total=" << k_total << "; at loosest bounds (L="
         << L << ",H=" << H << ") per-ROI ranges:";
    for (const auto& [roi, n] : sizes) {
        auto range = feasible_range(n, L, H);
        diag << " roi" << roi << "(n=" << n << ")->";
        if (range)
            diag << "[" << range->first << "," << range->second << "]";
        else
            diag << "empty";
    }
    throw unpartitionable_error(diag.str());
}

PartitionPlan plan_next(const std::map<int, int>& sizes, const PartitionPlan& rejected,
                        double delta0_frac) {
    return plan(sizes, rejected.k_total, rejected.relaxation_rank + 1, delta0_frac);
}

}  // namespace csv
