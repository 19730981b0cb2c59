#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "csv/mesh.hpp"

namespace csv {

// Per-vertex ROI labels plus the set of label ids treated as non-cortical
// (the synthetic medial wall). labels.size() must equal the mesh vertex
// count.
struct AtlasLabeling {
    std::vector<int> labels;
    std::set<int> excluded_labels;
    std::map<int, std::string> roi_names;

    bool is_cortical(int vertex) const {
        return excluded_labels.count(labels[vertex]) == 0;
    }
};

struct CleanResult {
    AtlasLabeling labeling;
    std::vector<std::string> warnings;  // fragments left in place
};

// Synthetic desk-scale atlas: a connected excluded cap of about
// excluded_fraction * V vertices, then num_rois labels grown by nearest-seed
// BFS from FPS-spread seeds over the remaining vertices. Deterministic for a
// given rng_seed.
AtlasLabeling synth_atlas(const Mesh& mesh, int num_rois, double excluded_fraction,
                          std::uint64_t rng_seed);

// Reassign every connected ROI fragment smaller than threshold * (ROI size
// at the start of the pass) to the neighboring cortical ROI with the largest
// edge contact, iterating to fixpoint. Fragments with no cortical neighbor
// are left in place and reported as warnings.
CleanResult reassign_minor_fragments(const AtlasLabeling& labeling, const Adjacency& adj,
                                     double threshold = 0.10);

std::vector<int> cortical_vertices(const AtlasLabeling& labeling);

// Cortical ROI id -> vertex count. Excluded labels never appear.
std::map<int, int> roi_sizes(const AtlasLabeling& labeling);

// Atlas files: JSON {labels, excluded, names} or binary "ATLAS1" when the
// path does not end in .json.
void save_atlas(const AtlasLabeling& atlas, const std::string& path);
AtlasLabeling load_atlas(const std::string& path);

std::string atlas_to_json(const AtlasLabeling& atlas);
AtlasLabeling atlas_from_json(const std::string& text);

}  // namespace csv
