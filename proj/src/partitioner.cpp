#include "csv/partitioner.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "csv/parallel.hpp"

namespace csv {

LocalGraph build_local_graph(const std::vector<int>& component, const Adjacency& adj) {
    LocalGraph g;
    g.global = component;
    std::sort(g.global.begin(), g.global.end());
    g.global.erase(std::unique(g.global.begin(), g.global.end()), g.global.end());

    g.nbr.resize(g.global.size());
    auto local_of = [&](int v) -> int {
        auto it = std::lower_bound(g.global.begin(), g.global.end(), v);
        if (it == g.global.end() || *it != v) return -1;
        return static_cast<int>(it - g.global.begin());
    };
    for (int i = 0; i < g.size(); ++i) {
        for (int u : adj.neighbors[g.global[i]]) {
            int lu = local_of(u);
            if (lu >= 0) g.nbr[i].push_back(lu);
        }
    }
    return g;
}

namespace {

std::vector<int> near_equal_quotas(int n, int k) {
    std::vector<int> quotas(k, n / k);
    for (int i = 0; i < n % k; ++i) ++quotas[i];
    return quotas;
}

// Greedy FPS on direction vectors, local indices. The distance update and
// the argmax scan are the hot loops; both parallelize with each element
// owned by one thread, so results do not depend on the thread count.
std::vector<int> fps_local(const LocalGraph& g, const std::vector<Vec3>& positions, int k) {
    const int n = g.size();
    std::vector<int> seeds{0};  // smallest global index
    std::vector<double> mind(n);

    const Vec3 p0 = positions[g.global[0]];
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) mind[i] = distance(positions[g.global[i]], p0);

    while (static_cast<int>(seeds.size()) < k) {
        double best_d = -1.0;
        int best = n;
#pragma omp parallel
        {
            double loc_d = -1.0;
            int loc = n;
#pragma omp for schedule(static) nowait
            for (int i = 0; i < n; ++i) {
                if (mind[i] > loc_d || (mind[i] == loc_d && i < loc)) {
                    loc_d = mind[i];
                    loc = i;
                }
            }
#pragma omp critical
            {
                if (loc_d > best_d || (loc_d == best_d && loc < best)) {
                    best_d = loc_d;
                    best = loc;
                }
            }
        }
        seeds.push_back(best);
        const Vec3 ps = positions[g.global[best]];
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i)
            mind[i] = std::min(mind[i], distance(positions[g.global[i]], ps));
    }
    return seeds;
}

// Vertex minimizing total hop distance to the part, computed inside the
// part's induced subgraph. Ties break to the smaller local index.
int medoid_of_part(const LocalGraph& g, const std::vector<int>& part) {
    std::vector<char> in_part(g.size(), 0);
    for (int v : part) in_part[v] = 1;

    int best = part.front();
    std::int64_t best_total = std::numeric_limits<std::int64_t>::max();
    std::vector<int> dist(g.size());
    std::vector<int> queue;
    for (int src : part) {
        std::fill(dist.begin(), dist.end(), -1);
        queue.clear();
        queue.push_back(src);
        dist[src] = 0;
        std::int64_t total = 0;
        for (size_t head = 0; head < queue.size(); ++head) {
            int v = queue[head];
            total += dist[v];
            for (int u : g.nbr[v])
                if (in_part[u] && dist[u] < 0) {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
        }
        if (queue.size() == part.size() && total < best_total) {
            best_total = total;
            best = src;
        }
    }
    return best;
}

struct GrowState {
    std::vector<int> sv_of;    // -1 = unassigned
    std::vector<int> sizes;
    std::vector<std::set<int>> frontier;
    int assigned = 0;
};

GrowState init_grow(const LocalGraph& g, const std::vector<int>& seeds) {
    GrowState st;
    const int k = static_cast<int>(seeds.size());
    st.sv_of.assign(g.size(), -1);
    st.sizes.assign(k, 0);
    st.frontier.resize(k);
    for (int s = 0; s < k; ++s) {
        st.sv_of[seeds[s]] = s;
        st.sizes[s] = 1;
        ++st.assigned;
        for (int u : g.nbr[seeds[s]])
            if (st.sv_of[u] < 0) st.frontier[s].insert(u);
    }
    return st;
}

// fill-ratio comparison by integer cross-multiplication; ties to smaller SV
bool lower_fill(int size_a, int quota_a, int idx_a, int size_b, int quota_b, int idx_b) {
    std::int64_t lhs = static_cast<std::int64_t>(size_a) * quota_b;
    std::int64_t rhs = static_cast<std::int64_t>(size_b) * quota_a;
    if (lhs != rhs) return lhs < rhs;
    return idx_a < idx_b;
}

// Absorb one frontier vertex into SV s: the one with the most neighbors
// already in s, ties to the smaller index. Returns -1 when the frontier is
// empty after purging assigned entries.
int absorb_best(const LocalGraph& g, GrowState& st, int s) {
    auto& fr = st.frontier[s];
    int best = -1, best_count = -1;
    for (auto it = fr.begin(); it != fr.end();) {
        if (st.sv_of[*it] >= 0) {
            it = fr.erase(it);
            continue;
        }
        int count = 0;
        for (int u : g.nbr[*it])
            if (st.sv_of[u] == s) ++count;
        if (count > best_count) {  // ascending iteration keeps the smaller index on ties
            best_count = count;
            best = *it;
        }
        ++it;
    }
    if (best < 0) return -1;
    fr.erase(best);
    st.sv_of[best] = s;
    ++st.sizes[s];
    ++st.assigned;
    for (int u : g.nbr[best])
        if (st.sv_of[u] < 0) fr.insert(u);
    return best;
}

// One quota-strict growing attempt. On starvation the partial state is
// returned so the caller can recompute seeds from it.
bool grow_once(const LocalGraph& g, const std::vector<int>& seeds,
               const std::vector<int>& quotas, GrowState& st) {
    const int k = static_cast<int>(seeds.size());
    st = init_grow(g, seeds);
    while (st.assigned < g.size()) {
        int s = -1;
        for (int i = 0; i < k; ++i) {
            if (st.sizes[i] >= quotas[i]) continue;
            if (s < 0 || lower_fill(st.sizes[i], quotas[i], i, st.sizes[s], quotas[s], s))
                s = i;
        }
        if (s < 0) break;  // all quotas met but vertices remain: cannot happen when sums match
        if (absorb_best(g, st, s) < 0) return false;  // starved
    }
    return st.assigned == g.size();
}

std::vector<int> medoid_seeds(const LocalGraph& g, const GrowState& st, int k) {
    std::vector<std::vector<int>> parts(k);
    for (int v = 0; v < g.size(); ++v)
        if (st.sv_of[v] >= 0) parts[st.sv_of[v]].push_back(v);
    std::vector<int> seeds(k);
    for (int s = 0; s < k; ++s) seeds[s] = medoid_of_part(g, parts[s]);
    return seeds;
}

struct GrowLocal {
    bool success = false;
    std::vector<int> sv_of;
};

GrowLocal grow_local(const LocalGraph& g, std::vector<int> seeds,
                     const std::vector<int>& quotas, int max_retries) {
    const int k = static_cast<int>(seeds.size());
    GrowState st;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        if (grow_once(g, seeds, quotas, st)) return {true, st.sv_of};
        if (attempt < max_retries) seeds = medoid_seeds(g, st, k);
    }
    return {false, st.sv_of};
}

// After a failed grow, assign the leftover vertices anyway so the component
// stays fully covered; quotas may overflow and balancing sorts out the
// bounds (or rejects the plan).
void overflow_complete(const LocalGraph& g, GrowState& st, const std::vector<int>& quotas) {
    const int k = static_cast<int>(quotas.size());
    while (st.assigned < g.size()) {
        int s = -1;
        for (int i = 0; i < k; ++i) {
            // purge, then consider only SVs with a live frontier
            auto& fr = st.frontier[i];
            for (auto it = fr.begin(); it != fr.end();)
                it = (st.sv_of[*it] >= 0) ? fr.erase(it) : std::next(it);
            if (fr.empty()) continue;
            if (s < 0 || lower_fill(st.sizes[i], quotas[i], i, st.sizes[s], quotas[s], s))
                s = i;
        }
        if (s < 0) throw validation_error("component not connected during overflow completion");
        absorb_best(g, st, s);
    }
}

GrowState rebuild_state(const LocalGraph& g, const std::vector<int>& sv_of, int k) {
    GrowState st;
    st.sv_of = sv_of;
    st.sizes.assign(k, 0);
    st.frontier.resize(k);
    for (int v = 0; v < g.size(); ++v) {
        int s = st.sv_of[v];
        if (s < 0) continue;
        ++st.sizes[s];
        ++st.assigned;
        for (int u : g.nbr[v])
            if (st.sv_of[u] < 0) st.frontier[s].insert(u);
    }
    return st;
}

std::vector<std::vector<int>> local_sv_adjacency(const LocalGraph& g,
                                                 const std::vector<int>& sv_of, int k) {
    std::vector<std::set<int>> sets(k);
    for (int v = 0; v < g.size(); ++v)
        for (int u : g.nbr[v]) {
            int a = sv_of[v], b = sv_of[u];
            if (a >= 0 && b >= 0 && a != b) sets[a].insert(b);
        }
    std::vector<std::vector<int>> out(k);
    for (int s = 0; s < k; ++s) out[s].assign(sets[s].begin(), sets[s].end());
    return out;
}

// Is SV `s` still connected after removing vertex `skip`?
bool connected_without(const LocalGraph& g, const std::vector<int>& sv_of, int s, int skip,
                       int sv_size) {
    if (sv_size <= 1) return false;  // would empty the SV
    int start = -1;
    for (int v = 0; v < g.size(); ++v)
        if (sv_of[v] == s && v != skip) {
            start = v;
            break;
        }
    std::vector<int> queue{start};
    std::set<int> seen{start};
    for (size_t head = 0; head < queue.size(); ++head)
        for (int u : g.nbr[queue[head]])
            if (u != skip && sv_of[u] == s && seen.insert(u).second) queue.push_back(u);
    return static_cast<int>(seen.size()) == sv_size - 1;
}

bool balance_local(const LocalGraph& g, std::vector<int>& sv_of, int k, int L, int H,
                   int max_passes, bool first_improvement) {
    std::vector<int> sizes(k, 0);
    for (int v = 0; v < g.size(); ++v)
        if (sv_of[v] >= 0) ++sizes[sv_of[v]];

    auto viol = [&](int size) { return std::max(0, L - size) + std::max(0, size - H); };
    auto total_violation = [&]() {
        int t = 0;
        for (int s = 0; s < k; ++s) t += viol(sizes[s]);
        return t;
    };

    int violation = total_violation();
    for (int pass = 0; pass < max_passes && violation > 0; ++pass) {
        int best_gain = 0, best_v = -1, best_b = -1;
        for (int v = 0; v < g.size() && !(first_improvement && best_gain > 0); ++v) {
            int a = sv_of[v];
            if (a < 0) continue;
            // candidate receivers: SVs owning a neighbor of v
            std::set<int> receivers;
            for (int u : g.nbr[v])
                if (sv_of[u] >= 0 && sv_of[u] != a) receivers.insert(sv_of[u]);
            bool donor_checked = false, donor_ok = false;
            for (int b : receivers) {
                int gain = viol(sizes[a]) + viol(sizes[b]) - viol(sizes[a] - 1) -
                           viol(sizes[b] + 1);
                if (gain <= best_gain) continue;
                if (!donor_checked) {
                    donor_ok = connected_without(g, sv_of, a, v, sizes[a]);
                    donor_checked = true;
                }
                if (!donor_ok) break;
                best_gain = gain;
                best_v = v;
                best_b = b;
                if (first_improvement) break;
            }
        }
        if (best_gain <= 0) break;
        int a = sv_of[best_v];
        sv_of[best_v] = best_b;
        --sizes[a];
        ++sizes[best_b];
        violation -= best_gain;
    }
    return violation == 0;
}

}  // namespace

std::optional<std::vector<int>> distribute_counts(
    const std::vector<std::vector<int>>& components, int k_r, int L, int H) {
    const int m = static_cast<int>(components.size());
    if (m == 0) return std::nullopt;

    std::vector<int> size(m), lo(m), hi(m);
    std::int64_t total = 0, sum_lo = 0, sum_hi = 0;
    for (int i = 0; i < m; ++i) {
        size[i] = static_cast<int>(components[i].size());
        auto range = feasible_range(size[i], L, H);
        if (!range || range->first < 1) return std::nullopt;  // component below L
        lo[i] = range->first;
        hi[i] = range->second;
        total += size[i];
        sum_lo += lo[i];
        sum_hi += hi[i];
    }
    if (k_r < sum_lo || k_r > sum_hi) return std::nullopt;

    // largest remainder on proportional shares
    std::vector<int> k(m);
    std::vector<std::pair<double, int>> rem(m);
    int assigned = 0;
    for (int i = 0; i < m; ++i) {
        double ideal = static_cast<double>(k_r) * size[i] / static_cast<double>(total);
        k[i] = static_cast<int>(std::floor(ideal));
        rem[i] = {ideal - k[i], i};
        assigned += k[i];
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int j = 0; j < k_r - assigned; ++j) ++k[rem[j % m].second];

    for (int i = 0; i < m; ++i) k[i] = std::clamp(k[i], lo[i], hi[i]);

    // repair the sum inside the feasible ranges, moving the count where the
    // per-SV load is most (or least) strained
    int sum = std::accumulate(k.begin(), k.end(), 0);
    while (sum != k_r) {
        int pick = -1;
        for (int i = 0; i < m; ++i) {
            if (sum < k_r && k[i] >= hi[i]) continue;
            if (sum > k_r && k[i] <= lo[i]) continue;
            if (pick < 0) {
                pick = i;
                continue;
            }
            // compare loads size/k by cross-multiplication
            std::int64_t lhs = static_cast<std::int64_t>(size[i]) * k[pick];
            std::int64_t rhs = static_cast<std::int64_t>(size[pick]) * k[i];
            bool better = (sum < k_r) ? (lhs > rhs) : (lhs < rhs);
            if (better) pick = i;
        }
        if (pick < 0) return std::nullopt;
        k[pick] += (sum < k_r) ? 1 : -1;
        sum += (sum < k_r) ? 1 : -1;
    }
    return k;
}

std::vector<int> fps_seeds(const std::vector<int>& component, int k,
                           const std::vector<Vec3>& positions, std::uint64_t) {
    if (k < 1) throw validation_error("k must be >= 1");
    if (k > static_cast<int>(component.size()))
        throw validation_error("k exceeds component size");
    for (int v : component)
        if (v < 0 || v >= static_cast<int>(positions.size()))
            throw validation_error("component vertex out of range");

    LocalGraph g;
    g.global = component;
    std::sort(g.global.begin(), g.global.end());
    auto local = fps_local(g, positions, k);
    std::vector<int> seeds(local.size());
    for (size_t i = 0; i < local.size(); ++i) seeds[i] = g.global[local[i]];
    return seeds;
}

RefineResult refine_seeds(const std::vector<int>& component, const Adjacency& adj,
                          const std::vector<int>& seeds, const std::vector<int>& quotas,
                          const KwayPartitioner& partitioner) {
    if (seeds.size() != quotas.size())
        throw validation_error("seeds/quotas size mismatch");

    LocalGraph g = build_local_graph(component, adj);
    auto local_of = [&](int v) {
        return static_cast<int>(std::lower_bound(g.global.begin(), g.global.end(), v) -
                                g.global.begin());
    };
    std::vector<int> seeds_local(seeds.size());
    for (size_t i = 0; i < seeds.size(); ++i) seeds_local[i] = local_of(seeds[i]);

    KwayPartitioner impl = partitioner;
    if (!impl) {
        // greedy-BFS balanced partitioner: one strict quota-grow attempt
        impl = [](const LocalGraph& lg, const std::vector<int>& s, const std::vector<int>& q) {
            GrowState st;
            if (!grow_once(lg, s, q, st))
                throw validation_error("greedy balanced partition starved");
            return st.sv_of;
        };
    }

    const int k = static_cast<int>(seeds.size());
    try {
        std::vector<int> part = impl(g, seeds_local, quotas);
        if (static_cast<int>(part.size()) != g.size())
            throw validation_error("refiner returned wrong assignment size");
        std::vector<std::vector<int>> parts(k);
        for (int v = 0; v < g.size(); ++v) {
            if (part[v] < 0 || part[v] >= k)
                throw validation_error("refiner left vertices unassigned");
            parts[part[v]].push_back(v);
        }
        std::vector<int> out(k);
        for (int s = 0; s < k; ++s) {
            if (parts[s].empty()) throw validation_error("refiner produced an empty part");
            out[s] = g.global[medoid_of_part(g, parts[s])];
        }
        return {out, false};
    } catch (const std::exception&) {
        return {seeds, true};  // fallback contract: never fails outward
    }
}

GrowResult grow(const std::vector<int>& component, const Adjacency& adj,
                const std::vector<int>& seeds, const std::vector<int>& quotas,
                int max_retries) {
    if (seeds.size() != quotas.size()) throw validation_error("seeds/quotas size mismatch");
    int qmin = *std::min_element(quotas.begin(), quotas.end());
    int qmax = *std::max_element(quotas.begin(), quotas.end());
    if (qmax - qmin > 1) throw validation_error("quotas must be near-equal (max-min <= 1)");
    if (std::accumulate(quotas.begin(), quotas.end(), 0) !=
        static_cast<int>(component.size()))
        throw validation_error("quotas must sum to the component size");

    LocalGraph g = build_local_graph(component, adj);
    auto local_of = [&](int v) {
        return static_cast<int>(std::lower_bound(g.global.begin(), g.global.end(), v) -
                                g.global.begin());
    };
    std::vector<int> seeds_local(seeds.size());
    for (size_t i = 0; i < seeds.size(); ++i) {
        seeds_local[i] = local_of(seeds[i]);
        if (seeds_local[i] >= g.size() || g.global[seeds_local[i]] != seeds[i])
            throw validation_error("seed not in component");
    }

    auto r = grow_local(g, seeds_local, quotas, max_retries);
    return {r.success, r.sv_of};
}

SvAdjacency sv_adjacency(const std::vector<int>& component, const std::vector<int>& sv_of,
                         int num_svs, const Adjacency& adj) {
    if (component.size() != sv_of.size())
        throw validation_error("component/assignment size mismatch");
    LocalGraph g = build_local_graph(component, adj);
    return {local_sv_adjacency(g, sv_of, num_svs)};
}

bool balance(const std::vector<int>& component, const Adjacency& adj, std::vector<int>& sv_of,
             const SvAdjacency& sv_adj, int L, int H, int max_passes, bool first_improvement) {
    LocalGraph g = build_local_graph(component, adj);
    const int k = static_cast<int>(sv_adj.neighbors.size());
    return balance_local(g, sv_of, k, L, H, max_passes, first_improvement);
}

// ---------------------------------------------------------------------------
// Hemisphere orchestration

namespace {

struct ComponentResult {
    LocalGraph graph;            // nodes of this component
    std::vector<int> sv_of;      // per node
    int num_svs = 0;
};

struct RoiResult {
    bool ok = false;
    std::string failure;
    std::vector<ComponentResult> components;
    std::vector<std::string> events;
    int overflows = 0;
    int refine_fallbacks = 0;
};

// Seed/grow/balance every component of one ROI under the current plan.
RoiResult partition_roi(const LocalGraph& roi_graph, const std::vector<Vec3>& positions,
                        int roi, int k_r, const PartitionPlan& plan,
                        const PartitionConfig& config) {
    RoiResult result;

    // components of the ROI subgraph, in (size desc, min index) order
    std::vector<std::vector<int>> comps_local;
    {
        std::vector<char> seen(roi_graph.size(), 0);
        for (int start = 0; start < roi_graph.size(); ++start) {
            if (seen[start]) continue;
            std::vector<int> comp{start};
            seen[start] = 1;
            for (size_t head = 0; head < comp.size(); ++head)
                for (int u : roi_graph.nbr[comp[head]])
                    if (!seen[u]) {
                        seen[u] = 1;
                        comp.push_back(u);
                    }
            std::sort(comp.begin(), comp.end());
            comps_local.push_back(std::move(comp));
        }
        std::sort(comps_local.begin(), comps_local.end(), [](const auto& a, const auto& b) {
            if (a.size() != b.size()) return a.size() > b.size();
            return a.front() < b.front();
        });
    }

    std::vector<std::vector<int>> comps_global(comps_local.size());
    for (size_t c = 0; c < comps_local.size(); ++c)
        for (int v : comps_local[c]) comps_global[c].push_back(roi_graph.global[v]);

    auto counts = distribute_counts(comps_global, k_r, plan.L, plan.H);
    if (!counts) {
        result.failure = "roi " + std::to_string(roi) + ": component counts infeasible at (L=" +
                         std::to_string(plan.L) + ",H=" + std::to_string(plan.H) + ")";
        return result;
    }

    for (size_t c = 0; c < comps_local.size(); ++c) {
        LocalGraph g;
        g.global = comps_global[c];
        g.nbr.resize(comps_local[c].size());
        {
            // remap the ROI-local neighbor lists into component-local ids
            std::vector<int> comp_local_of(roi_graph.size(), -1);
            for (size_t i = 0; i < comps_local[c].size(); ++i)
                comp_local_of[comps_local[c][i]] = static_cast<int>(i);
            for (size_t i = 0; i < comps_local[c].size(); ++i)
                for (int u : roi_graph.nbr[comps_local[c][i]])
                    if (comp_local_of[u] >= 0) g.nbr[i].push_back(comp_local_of[u]);
        }

        const int k = (*counts)[c];
        std::vector<int> quotas = near_equal_quotas(g.size(), k);
        std::vector<int> seeds = fps_local(g, positions, k);

        if (config.refine) {
            // greedy-BFS balanced partition, seeds replaced by part medoids;
            // starvation falls back to the FPS seeds
            GrowState st;
            if (grow_once(g, seeds, quotas, st)) {
                seeds = medoid_seeds(g, st, k);
            } else {
                ++result.refine_fallbacks;
                result.events.push_back("roi " + std::to_string(roi) + " component " +
                                        std::to_string(c) + ": seed refinement fell back");
            }
        }

        auto grown = grow_local(g, seeds, quotas, config.max_retries);
        std::vector<int> sv_of = grown.sv_of;
        if (!grown.success) {
            GrowState st = rebuild_state(g, sv_of, k);
            overflow_complete(g, st, quotas);
            sv_of = st.sv_of;
            ++result.overflows;
            result.events.push_back("roi " + std::to_string(roi) + " component " +
                                    std::to_string(c) + ": grow starved, overflow completion");
        }

        if (!balance_local(g, sv_of, k, plan.L, plan.H, config.max_passes,
                           config.first_improvement)) {
            result.failure = "roi " + std::to_string(roi) + " component " + std::to_string(c) +
                             ": bound violation persists after balancing";
            return result;
        }

        ComponentResult cr;
        cr.graph = std::move(g);
        cr.sv_of = std::move(sv_of);
        cr.num_svs = k;
        result.components.push_back(std::move(cr));
    }

    result.ok = true;
    return result;
}

struct CoreResult {
    PartitionPlan plan;
    std::vector<RoiResult> rois;  // aligned with roi_ids
};

// Plan-retry loop shared by the vertex and face modes: try a plan, run every
// ROI, and step to the next candidate bounds when any ROI rejects it.
CoreResult partition_core(const std::vector<LocalGraph>& roi_graphs,
                          const std::vector<int>& roi_ids, const std::vector<Vec3>& positions,
                          const std::map<int, int>& sizes, int k_total,
                          const PartitionConfig& config, PartitionDiagnostics& d) {
    const int num_rois = static_cast<int>(roi_ids.size());
    PartitionPlan current = plan(sizes, k_total, 0, config.delta0_frac);
    while (true) {
        std::vector<RoiResult> results(num_rois);

        // ROIs are independent under a fixed plan
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < num_rois; ++i)
            results[i] = partition_roi(roi_graphs[i], positions, roi_ids[i],
                                       current.counts.at(roi_ids[i]), current, config);

        int failed = -1;
        for (int i = 0; i < num_rois && failed < 0; ++i)
            if (!results[i].ok) failed = i;

        if (failed < 0) {
            for (int i = 0; i < num_rois; ++i) {
                d.grow_overflows += results[i].overflows;
                d.refine_fallbacks += results[i].refine_fallbacks;
                for (const auto& ev : results[i].events) d.events.push_back(ev);
            }
            d.plan_rank = current.relaxation_rank;
            return {current, std::move(results)};
        }

        d.events.push_back("plan rank " + std::to_string(current.relaxation_rank) +
                           " rejected: " + results[failed].failure);
        current = plan_next(sizes, current, config.delta0_frac);
    }
}

Vec3 face_centroid(const Mesh& mesh, const Face& f) {
    return ((mesh.positions[f[0]] + mesh.positions[f[1]] + mesh.positions[f[2]]) *
            (1.0 / 3.0))
        .normalized();
}

// Majority label of a face's three vertices, smallest id on a three-way tie.
// Returns -1 when the majority label is excluded (face dropped).
int face_label(const Face& f, const AtlasLabeling& atlas) {
    int a = atlas.labels[f[0]], b = atlas.labels[f[1]], c = atlas.labels[f[2]];
    int label;
    if (a == b || a == c)
        label = a;
    else if (b == c)
        label = b;
    else
        label = std::min({a, b, c});
    return atlas.excluded_labels.count(label) ? -1 : label;
}

// Ablation mode: partition faces instead of vertices, then derive each
// CSV's vertex set from its faces. Boundary vertices get duplicated across
// CSVs, which is exactly the artifact this mode demonstrates.
CsvMap partition_faces(const Mesh& mesh, const AtlasLabeling& atlas, int k_total,
                       const PartitionConfig& config, PartitionDiagnostics& d) {
    const int nf = mesh.face_count();

    std::vector<int> label_of_face(nf);
    std::map<int, int> sizes;
    for (int f = 0; f < nf; ++f) {
        label_of_face[f] = face_label(mesh.faces[f], atlas);
        if (label_of_face[f] >= 0) ++sizes[label_of_face[f]];
    }
    if (sizes.empty()) throw validation_error("no cortical faces to partition");

    // face adjacency via shared edges, restricted to same-label faces
    std::map<std::pair<int, int>, std::vector<int>> edge_faces;
    for (int f = 0; f < nf; ++f)
        for (int i = 0; i < 3; ++i) {
            auto key = std::minmax(mesh.faces[f][i], mesh.faces[f][(i + 1) % 3]);
            edge_faces[key].push_back(f);
        }

    std::vector<int> roi_ids;
    for (const auto& [roi, n] : sizes) roi_ids.push_back(roi);
    const int num_rois = static_cast<int>(roi_ids.size());

    std::vector<LocalGraph> roi_graphs(num_rois);
    std::vector<Vec3> centroids(nf);
    for (int f = 0; f < nf; ++f) centroids[f] = face_centroid(mesh, mesh.faces[f]);
    for (int i = 0; i < num_rois; ++i) {
        LocalGraph& g = roi_graphs[i];
        for (int f = 0; f < nf; ++f)
            if (label_of_face[f] == roi_ids[i]) g.global.push_back(f);
        g.nbr.resize(g.global.size());
        std::vector<int> local_of(nf, -1);
        for (size_t j = 0; j < g.global.size(); ++j) local_of[g.global[j]] = static_cast<int>(j);
        for (const auto& [edge, faces] : edge_faces) {
            if (faces.size() != 2) continue;
            int la = local_of[faces[0]], lb = local_of[faces[1]];
            if (la >= 0 && lb >= 0) {
                g.nbr[la].push_back(lb);
                g.nbr[lb].push_back(la);
            }
        }
        for (auto& nb : g.nbr) std::sort(nb.begin(), nb.end());
    }

    CoreResult core = partition_core(roi_graphs, roi_ids, centroids, sizes, k_total, config, d);

    CsvMap map;
    map.face_based = true;
    map.plan = core.plan;
    map.csv_of.assign(mesh.vertex_count(), CsvMap::NONE);
    for (int i = 0; i < num_rois; ++i) {
        for (const auto& cr : core.rois[i].components) {
            int base = map.csv_count();
            for (int s = 0; s < cr.num_svs; ++s) {
                map.members.emplace_back();
                map.roi_of_csv.push_back(roi_ids[i]);
            }
            for (int fl = 0; fl < cr.graph.size(); ++fl) {
                const Face& face = mesh.faces[cr.graph.global[fl]];
                auto& m = map.members[base + cr.sv_of[fl]];
                m.insert(m.end(), face.begin(), face.end());
            }
        }
    }
    for (auto& m : map.members) {
        std::sort(m.begin(), m.end());
        m.erase(std::unique(m.begin(), m.end()), m.end());
        map.v_max = std::max(map.v_max, static_cast<int>(m.size()));
    }
    for (int c = 0; c < map.csv_count(); ++c)
        for (int v : map.members[c])
            if (map.csv_of[v] == CsvMap::NONE) map.csv_of[v] = c;
    return map;
}

}  // namespace

CsvMap partition_hemisphere(const Mesh& mesh, const AtlasLabeling& atlas, int k_total,
                            const PartitionConfig& config, PartitionDiagnostics* diag) {
    if (atlas.labels.size() != static_cast<size_t>(mesh.vertex_count()))
        throw validation_error("atlas does not match mesh vertex count");

    PartitionDiagnostics local_diag;
    PartitionDiagnostics& d = diag ? *diag : local_diag;

    if (config.face_based) return partition_faces(mesh, atlas, k_total, config, d);

    const Adjacency adj = one_ring(mesh);
    const auto sizes = roi_sizes(atlas);
    if (sizes.empty()) throw validation_error("no cortical vertices to partition");

    std::vector<int> roi_ids;
    for (const auto& [roi, n] : sizes) roi_ids.push_back(roi);
    const int num_rois = static_cast<int>(roi_ids.size());

    // ROI subgraphs are fixed across plan retries; build once
    std::vector<LocalGraph> roi_graphs(num_rois);
    for (int i = 0; i < num_rois; ++i) {
        std::vector<int> members;
        for (int v = 0; v < mesh.vertex_count(); ++v)
            if (atlas.labels[v] == roi_ids[i]) members.push_back(v);
        roi_graphs[i] = build_local_graph(members, adj);
    }

    CoreResult core =
        partition_core(roi_graphs, roi_ids, mesh.positions, sizes, k_total, config, d);

    // assemble: CSV ids contiguous in (ROI id, component order, seed order)
    CsvMap map;
    map.plan = core.plan;
    map.csv_of.assign(mesh.vertex_count(), CsvMap::NONE);
    for (int i = 0; i < num_rois; ++i) {
        for (const auto& cr : core.rois[i].components) {
            int base = map.csv_count();
            for (int s = 0; s < cr.num_svs; ++s) {
                map.members.emplace_back();
                map.roi_of_csv.push_back(roi_ids[i]);
            }
            for (int v = 0; v < cr.graph.size(); ++v) {
                int id = base + cr.sv_of[v];
                map.csv_of[cr.graph.global[v]] = id;
                map.members[id].push_back(cr.graph.global[v]);
            }
        }
    }
    for (auto& m : map.members) {
        std::sort(m.begin(), m.end());
        map.v_max = std::max(map.v_max, static_cast<int>(m.size()));
    }
    return map;
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate(const CsvMap& map, const Mesh& mesh, const AtlasLabeling& atlas) {
    ValidationReport report;
    report.face_based = map.face_based;
    const int n = mesh.vertex_count();
    const Adjacency adj = one_ring(mesh);

    std::vector<int> owner_count(n, 0);
    for (const auto& m : map.members)
        for (int v : m) {
            if (v < 0 || v >= n) {
                owner_count.clear();
                break;
            }
            ++owner_count[v];
        }
    if (owner_count.empty()) {
        report.checks.push_back({"lossless", false, true, "member vertex index out of range"});
        return report;
    }

    for (int v = 0; v < n; ++v)
        report.duplication_count += std::max(0, owner_count[v] - 1);

    auto add = [&](const std::string& name, bool pass, const std::string& detail,
                   bool enforced) {
        report.checks.push_back({name, pass, enforced, detail});
    };
    const bool strict = !map.face_based;

    {  // lossless: cortical vertices covered exactly once, excluded not at all
        std::ostringstream detail;
        bool pass = true;
        int shown = 0;
        for (int v = 0; v < n && shown < 5; ++v) {
            bool cortical = atlas.is_cortical(v);
            if (cortical && owner_count[v] != 1) {
                pass = false;
                detail << " v" << v << "(x" << owner_count[v] << ")";
                ++shown;
            } else if (!cortical && owner_count[v] != 0) {
                pass = false;
                detail << " v" << v << "(excluded,x" << owner_count[v] << ")";
                ++shown;
            }
        }
        add("lossless", pass, pass ? "" : "bad coverage:" + detail.str(), strict);
    }

    {  // disjoint
        bool pass = report.duplication_count == 0;
        add("disjoint", pass,
            pass ? "" : "duplicated vertices: " + std::to_string(report.duplication_count),
            strict);
    }

    {  // ROI purity
        std::ostringstream detail;
        bool pass = true;
        for (int c = 0; c < map.csv_count() && pass; ++c)
            for (int v : map.members[c])
                if (atlas.labels[v] != map.roi_of_csv[c]) {
                    pass = false;
                    detail << "csv " << c << " contains v" << v << " of roi "
                           << atlas.labels[v] << " (owner roi " << map.roi_of_csv[c] << ")";
                    break;
                }
        add("roi_pure", pass, detail.str(), strict);
    }

    {  // connectivity of each CSV's induced subgraph
        std::ostringstream detail;
        bool pass = true;
        for (int c = 0; c < map.csv_count(); ++c) {
            if (map.members[c].empty()) {
                pass = false;
                detail << "csv " << c << " is empty";
                break;
            }
            auto comps = connected_components(map.members[c], adj);
            if (comps.size() != 1) {
                pass = false;
                detail << "csv " << c << " has " << comps.size() << " components";
                break;
            }
        }
        add("connected", pass, detail.str(), true);
    }

    {  // size bounds and v_max consistency
        std::ostringstream detail;
        bool pass = true;
        int max_size = 0;
        for (int c = 0; c < map.csv_count(); ++c) {
            int size = static_cast<int>(map.members[c].size());
            max_size = std::max(max_size, size);
            if (size < map.plan.L || size > map.plan.H) {
                if (pass) detail << "csv " << c << " size " << size << " outside [" <<
                    map.plan.L << "," << map.plan.H << "]";
                pass = false;
            }
        }
        if (max_size != map.v_max) {
            if (pass) detail << "v_max " << map.v_max << " != max size " << max_size;
            pass = false;
        }
        add("size_bounds", pass, detail.str(), strict);
    }

    {  // count
        bool pass = map.csv_count() == map.plan.k_total;
        add("count", pass,
            pass ? "" : std::to_string(map.csv_count()) + " CSVs, expected " +
                        std::to_string(map.plan.k_total),
            true);
    }

    return report;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {
bool has_json_ext(const std::string& path) {
    return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}
constexpr std::uint32_t kNoneId = 0xFFFFFFFFu;
}  // namespace

void save_csvmap(const CsvMap& map, const std::string& path) {
    auto os = io::open_out(path);
    if (has_json_ext(path)) {
        std::string text = csvmap_to_json(map);
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        return;
    }
    io::write_magic(os, "CSVMAP1");
    io::write_u32(os, static_cast<std::uint32_t>(map.plan.k_total));
    io::write_u32(os, static_cast<std::uint32_t>(map.v_max));
    io::write_u32(os, static_cast<std::uint32_t>(map.csv_of.size()));
    io::write_u32(os, static_cast<std::uint32_t>(map.plan.L));
    io::write_u32(os, static_cast<std::uint32_t>(map.plan.H));
    io::write_u32(os, static_cast<std::uint32_t>(map.plan.relaxation_rank));
    for (int id : map.csv_of)
        io::write_u32(os, id == CsvMap::NONE ? kNoneId : static_cast<std::uint32_t>(id));
    for (int roi : map.roi_of_csv) io::write_i32(os, roi);
    io::write_u32(os, static_cast<std::uint32_t>(map.plan.counts.size()));
    for (const auto& [roi, count] : map.plan.counts) {
        io::write_i32(os, roi);
        io::write_u32(os, static_cast<std::uint32_t>(count));
    }
    io::write_pod<std::uint8_t>(os, map.face_based ? 1 : 0);
    if (map.face_based) {
        // overlapping member lists are not derivable from csv_of
        for (const auto& m : map.members) {
            io::write_u32(os, static_cast<std::uint32_t>(m.size()));
            for (int v : m) io::write_u32(os, static_cast<std::uint32_t>(v));
        }
    }
}

CsvMap load_csvmap(const std::string& path) {
    auto is = io::open_in(path);
    if (has_json_ext(path)) {
        std::ostringstream ss;
        ss << is.rdbuf();
        return csvmap_from_json(ss.str());
    }
    io::expect_magic(is, "CSVMAP1");
    CsvMap map;
    map.plan.k_total = static_cast<int>(io::read_u32(is));
    map.v_max = static_cast<int>(io::read_u32(is));
    auto nv = io::read_u32(is);
    map.plan.L = static_cast<int>(io::read_u32(is));
    map.plan.H = static_cast<int>(io::read_u32(is));
    map.plan.relaxation_rank = static_cast<int>(io::read_u32(is));
    map.csv_of.resize(nv);
    for (auto& id : map.csv_of) {
        auto raw = io::read_u32(is);
        id = (raw == kNoneId) ? CsvMap::NONE : static_cast<int>(raw);
    }
    map.roi_of_csv.resize(map.plan.k_total);
    for (auto& roi : map.roi_of_csv) roi = io::read_i32(is);
    auto nroi = io::read_u32(is);
    for (std::uint32_t i = 0; i < nroi; ++i) {
        int roi = io::read_i32(is);
        map.plan.counts[roi] = static_cast<int>(io::read_u32(is));
    }
    map.face_based = io::read_pod<std::uint8_t>(is) != 0;
    map.members.assign(map.plan.k_total, {});
    if (map.face_based) {
        for (auto& m : map.members) {
            m.resize(io::read_u32(is));
            for (auto& v : m) v = static_cast<int>(io::read_u32(is));
        }
    } else {
        for (std::uint32_t v = 0; v < nv; ++v)
            if (map.csv_of[v] != CsvMap::NONE) map.members[map.csv_of[v]].push_back(v);
    }
    return map;
}

std::string csvmap_to_json(const CsvMap& map) {
    nlohmann::json j;
    j["k_total"] = map.plan.k_total;
    j["v_max"] = map.v_max;
    j["face_based"] = map.face_based;
    j["plan"] = {{"L", map.plan.L},
                 {"H", map.plan.H},
                 {"relaxation_rank", map.plan.relaxation_rank}};
    auto& counts = j["plan"]["counts"] = nlohmann::json::object();
    for (const auto& [roi, count] : map.plan.counts) counts[std::to_string(roi)] = count;
    j["csv_of"] = map.csv_of;
    j["roi_of_csv"] = map.roi_of_csv;
    j["members"] = map.members;
    return j.dump();
}

CsvMap csvmap_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    CsvMap map;
    map.plan.k_total = j.at("k_total").get<int>();
    map.v_max = j.at("v_max").get<int>();
    map.face_based = j.at("face_based").get<bool>();
    map.plan.L = j.at("plan").at("L").get<int>();
    map.plan.H = j.at("plan").at("H").get<int>();
    map.plan.relaxation_rank = j.at("plan").at("relaxation_rank").get<int>();
    for (const auto& [key, val] : j.at("plan").at("counts").items())
        map.plan.counts[std::stoi(key)] = val.get<int>();
    map.csv_of = j.at("csv_of").get<std::vector<int>>();
    map.roi_of_csv = j.at("roi_of_csv").get<std::vector<int>>();
    map.members = j.at("members").get<std::vector<std::vector<int>>>();
    return map;
}

}  // namespace csv
