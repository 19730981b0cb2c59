#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csv/atlas.hpp"
#include "csv/mesh.hpp"
#include "csv/planner.hpp"

namespace csv {

// Final partition of one hemisphere into cortical supervertices.
// Default (vertex-based) maps are lossless over cortex, non-overlapping,
// ROI-pure, connected and size-bounded. Face-based maps (ablation mode) may
// duplicate boundary vertices; members is then the authoritative record and
// csv_of holds the smallest owning CSV id.
struct CsvMap {
    static constexpr int NONE = -1;

    std::vector<int> csv_of;                // per vertex, NONE for excluded
    std::vector<std::vector<int>> members;  // per CSV, sorted ascending
    std::vector<int> roi_of_csv;
    int v_max = 0;
    PartitionPlan plan;
    bool face_based = false;

    int csv_count() const { return static_cast<int>(members.size()); }
    int vertex_count() const { return static_cast<int>(csv_of.size()); }
};

// CSVs sharing at least one mesh edge.
struct SvAdjacency {
    std::vector<std::vector<int>> neighbors;
};

struct PartitionConfig {
    int max_retries = 3;     // seed-grow retries per component
    int max_passes = 50;     // balancing moves per component
    bool refine = false;     // seed refinement via balanced k-way partition
    bool first_improvement = false;  // balancing move selection
    bool face_based = false;         // ablation: partition faces, not vertices
    double delta0_frac = 0.15;       // planner tightening schedule
    std::uint64_t rng_seed = 0;
};

struct PartitionDiagnostics {
    std::vector<std::string> events;
    int plan_rank = 0;
    int grow_overflows = 0;
    int refine_fallbacks = 0;
};

// Component-local view used by the seed/grow/balance core. Nodes are vertices
// in the default mode and faces in the ablation mode.
struct LocalGraph {
    std::vector<int> global;                // local -> global id, ascending
    std::vector<std::vector<int>> nbr;      // local indices, sorted

    int size() const { return static_cast<int>(global.size()); }
};

LocalGraph build_local_graph(const std::vector<int>& component, const Adjacency& adj);

// Split K_r among a ROI's connected components: proportional by size
// (largest remainder), repaired into each component's feasible range.
// nullopt = plan rejection (e.g. a component smaller than L).
std::optional<std::vector<int>> distribute_counts(const std::vector<std::vector<int>>& components,
                                                  int k_r, int L, int H);

// Greedy farthest-point sampling on vertex direction vectors. First seed is
// the smallest-index vertex of the component; ties in the max-min-distance
// step break toward the smaller vertex index. rng_seed is accepted for
// interface stability but the procedure is fully deterministic.
std::vector<int> fps_seeds(const std::vector<int>& component, int k,
                           const std::vector<Vec3>& positions, std::uint64_t rng_seed = 0);

// Pluggable balanced k-way partitioner used by seed refinement; returns a
// per-node SV index. Throwing or returning an invalid assignment triggers
// the FPS fallback.
using KwayPartitioner = std::function<std::vector<int>(const LocalGraph&,
                                                       const std::vector<int>& seeds_local,
                                                       const std::vector<int>& quotas)>;

struct RefineResult {
    std::vector<int> seeds;
    bool fell_back = false;
};

// Balanced-partition the component, then return per-part medoids as the new
// seeds. Any failure returns the input seeds unchanged.
RefineResult refine_seeds(const std::vector<int>& component, const Adjacency& adj,
                          const std::vector<int>& seeds, const std::vector<int>& quotas,
                          const KwayPartitioner& partitioner = {});

struct GrowResult {
    bool success = false;
    // SV index per component vertex (aligned with the sorted component);
    // -1 where the final attempt left a vertex unassigned.
    std::vector<int> sv_of;
};

// Quota-driven region growing: the SV with the lowest fill ratio absorbs the
// unassigned frontier vertex with the most neighbors already inside it. On
// starvation, seeds are recomputed as medoids of the partial SVs and the
// grow restarts, up to max_retries.
GrowResult grow(const std::vector<int>& component, const Adjacency& adj,
                const std::vector<int>& seeds, const std::vector<int>& quotas,
                int max_retries);

SvAdjacency sv_adjacency(const std::vector<int>& component, const std::vector<int>& sv_of,
                         int num_svs, const Adjacency& adj);

// Boundary-vertex transfers between adjacent SVs until L <= |SV| <= H.
// A move must keep the donor connected and strictly reduce the total bound
// violation. Returns false when violations remain; sv_of is updated in
// place either way.
bool balance(const std::vector<int>& component, const Adjacency& adj, std::vector<int>& sv_of,
             const SvAdjacency& sv_adj, int L, int H, int max_passes,
             bool first_improvement = false);

// Full per-hemisphere pipeline: plan, per-ROI seed/grow/balance with
// rejection back to the planner at looser bounds. Deterministic for fixed
// inputs and config, independent of worker count.
CsvMap partition_hemisphere(const Mesh& mesh, const AtlasLabeling& atlas, int k_total,
                            const PartitionConfig& config = {},
                            PartitionDiagnostics* diag = nullptr);

struct ValidationReport {
    struct Check {
        std::string name;
        bool pass = false;
        bool enforced = true;  // informational in face-based mode
        std::string detail;
    };
    std::vector<Check> checks;
    std::int64_t duplication_count = 0;
    bool face_based = false;

    bool all_passed() const {
        for (const auto& c : checks)
            if (c.enforced && !c.pass) return false;
        return true;
    }
    const Check* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

ValidationReport validate(const CsvMap& map, const Mesh& mesh, const AtlasLabeling& atlas);

// CsvMap files: binary "CSVMAP1" or a JSON variant for .json paths.
void save_csvmap(const CsvMap& map, const std::string& path);
CsvMap load_csvmap(const std::string& path);
std::string csvmap_to_json(const CsvMap& map);
CsvMap csvmap_from_json(const std::string& text);

}  // namespace csv
