#include "csv/atlas.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

namespace csv {

namespace {

// BFS ball of exactly `target` vertices around `center`; the last layer is
// cut in ascending index order.
std::vector<int> grow_cap(int center, int target, const Adjacency& adj) {
    std::vector<int> cap;
    if (target <= 0) return cap;
    std::vector<char> taken(adj.vertex_count(), 0);
    std::vector<int> frontier{center};
    taken[center] = 1;
    cap.push_back(center);
    while (static_cast<int>(cap.size()) < target && !frontier.empty()) {
        std::vector<int> next;
        for (int v : frontier)
            for (int u : adj.neighbors[v])
                if (!taken[u]) {
                    taken[u] = 1;
                    next.push_back(u);
                }
        std::sort(next.begin(), next.end());
        for (int u : next) {
            if (static_cast<int>(cap.size()) >= target) break;
            cap.push_back(u);
        }
        frontier = std::move(next);
    }
    return cap;
}

// Greedy FPS on direction vectors over an arbitrary candidate set with a
// caller-chosen start vertex.
std::vector<int> fps_spread(const std::vector<int>& candidates, int k, int start,
                            const std::vector<Vec3>& positions) {
    std::vector<int> seeds{start};
    std::vector<double> mind(candidates.size());
    for (size_t i = 0; i < candidates.size(); ++i)
        mind[i] = distance(positions[candidates[i]], positions[start]);

    while (static_cast<int>(seeds.size()) < k) {
        int best = -1;
        double best_d = -1.0;
        for (size_t i = 0; i < candidates.size(); ++i) {
            if (mind[i] > best_d || (mind[i] == best_d && best >= 0 && candidates[i] < best)) {
                best_d = mind[i];
                best = candidates[i];
            }
        }
        seeds.push_back(best);
        for (size_t i = 0; i < candidates.size(); ++i)
            mind[i] = std::min(mind[i], distance(positions[candidates[i]], positions[best]));
    }
    return seeds;
}

}  // namespace

AtlasLabeling synth_atlas(const Mesh& mesh, int num_rois, double excluded_fraction,
                          std::uint64_t rng_seed) {
    const int n = mesh.vertex_count();
    if (num_rois < 1 || num_rois > n)
        throw validation_error("num_rois must be in [1, vertex count]");
    if (excluded_fraction < 0.0 || excluded_fraction >= 1.0)
        throw validation_error("excluded_fraction must be in [0,1)");

    Adjacency adj = one_ring(mesh);
    std::mt19937_64 rng(rng_seed);

    AtlasLabeling atlas;
    atlas.labels.assign(n, -1);

    const int wall_label = num_rois;
    const int wall_size = static_cast<int>(std::lround(excluded_fraction * n));
    std::vector<char> is_wall(n, 0);
    if (wall_size > 0) {
        int center = static_cast<int>(rng() % n);
        for (int v : grow_cap(center, wall_size, adj)) {
            is_wall[v] = 1;
            atlas.labels[v] = wall_label;
        }
        atlas.excluded_labels.insert(wall_label);
        atlas.roi_names[wall_label] = "medial_wall";
    }

    std::vector<int> cortical;
    for (int v = 0; v < n; ++v)
        if (!is_wall[v]) cortical.push_back(v);
    if (num_rois > static_cast<int>(cortical.size()))
        throw validation_error("num_rois exceeds cortical vertex count");

    int start = cortical[rng() % cortical.size()];
    std::vector<int> seeds = fps_spread(cortical, num_rois, start, mesh.positions);

    // Nearest-seed growth by multi-source BFS; equal-distance claims resolve
    // to the smallest seed rank.
    std::vector<int> frontier;
    for (int r = 0; r < num_rois; ++r) {
        atlas.labels[seeds[r]] = r;
        frontier.push_back(seeds[r]);
        atlas.roi_names[r] = "roi_" + std::to_string(r);
    }
    while (!frontier.empty()) {
        std::vector<std::pair<int, int>> claims;  // (vertex, label)
        for (int v : frontier)
            for (int u : adj.neighbors[v])
                if (!is_wall[u] && atlas.labels[u] < 0)
                    claims.emplace_back(u, atlas.labels[v]);
        std::sort(claims.begin(), claims.end());
        std::vector<int> next;
        for (const auto& [u, label] : claims) {
            if (atlas.labels[u] >= 0) continue;
            atlas.labels[u] = label;
            next.push_back(u);
        }
        frontier = std::move(next);
    }

    // Cortical islands unreachable from any seed (possible when the wall
    // separates the sphere) fall back to the Euclidean-nearest seed.
    for (int v : cortical) {
        if (atlas.labels[v] >= 0) continue;
        int best = 0;
        double best_d = std::numeric_limits<double>::max();
        for (int r = 0; r < num_rois; ++r) {
            double d = distance(mesh.positions[v], mesh.positions[seeds[r]]);
            if (d < best_d) {
                best_d = d;
                best = r;
            }
        }
        atlas.labels[v] = best;
    }

    return atlas;
}

CleanResult reassign_minor_fragments(const AtlasLabeling& labeling, const Adjacency& adj,
                                     double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0)
        throw validation_error("threshold must be in (0,1)");
    if (labeling.labels.size() != static_cast<size_t>(adj.vertex_count()))
        throw validation_error("labeling/adjacency size mismatch");

    CleanResult result;
    result.labeling = labeling;
    auto& labels = result.labeling.labels;

    std::set<int> cortical_rois;
    for (size_t v = 0; v < labels.size(); ++v)
        if (labeling.excluded_labels.count(labels[v]) == 0) cortical_rois.insert(labels[v]);

    const int max_passes = static_cast<int>(cortical_rois.size());
    for (int pass = 0; pass < max_passes; ++pass) {
        // sizes at the start of this pass are the comparison reference
        std::map<int, int> size0;
        for (size_t v = 0; v < labels.size(); ++v)
            if (labeling.excluded_labels.count(labels[v]) == 0) ++size0[labels[v]];

        result.warnings.clear();
        bool changed = false;
        for (const auto& [roi, ref_size] : size0) {
            std::vector<int> members;
            for (size_t v = 0; v < labels.size(); ++v)
                if (labels[v] == roi) members.push_back(static_cast<int>(v));
            auto comps = connected_components(members, adj);
            if (comps.size() <= 1) continue;

            for (const auto& frag : comps) {
                if (static_cast<double>(frag.size()) >= threshold * ref_size) continue;

                // boundary edge count toward each neighboring cortical ROI
                std::map<int, int> contact;
                for (int v : frag)
                    for (int u : adj.neighbors[v]) {
                        int lu = labels[u];
                        if (lu == roi) continue;
                        if (labeling.excluded_labels.count(lu)) continue;
                        ++contact[lu];
                    }
                if (contact.empty()) {
                    result.warnings.push_back(
                        "roi " + std::to_string(roi) + " fragment of size " +
                        std::to_string(frag.size()) + " at vertex " +
                        std::to_string(frag.front()) + " has no cortical neighbor");
                    continue;
                }
                int best_roi = -1, best_edges = -1;
                for (const auto& [cand, edges] : contact)
                    if (edges > best_edges) {  // map order makes ties pick the smaller id
                        best_edges = edges;
                        best_roi = cand;
                    }
                for (int v : frag) labels[v] = best_roi;
                changed = true;
            }
        }
        if (!changed) break;
    }

    return result;
}

std::vector<int> cortical_vertices(const AtlasLabeling& labeling) {
    std::vector<int> out;
    for (size_t v = 0; v < labeling.labels.size(); ++v)
        if (labeling.excluded_labels.count(labeling.labels[v]) == 0)
            out.push_back(static_cast<int>(v));
    return out;
}

std::map<int, int> roi_sizes(const AtlasLabeling& labeling) {
    std::map<int, int> sizes;
    for (int label : labeling.labels)
        if (labeling.excluded_labels.count(label) == 0) ++sizes[label];
    return sizes;
}

std::string atlas_to_json(const AtlasLabeling& atlas) {
    nlohmann::json j;
    j["labels"] = atlas.labels;
    j["excluded"] = std::vector<int>(atlas.excluded_labels.begin(), atlas.excluded_labels.end());
    auto& names = j["names"] = nlohmann::json::object();
    for (const auto& [id, name] : atlas.roi_names) names[std::to_string(id)] = name;
    return j.dump();
}

AtlasLabeling atlas_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    AtlasLabeling atlas;
    atlas.labels = j.at("labels").get<std::vector<int>>();
    for (int e : j.at("excluded")) atlas.excluded_labels.insert(e);
    if (j.contains("names"))
        for (const auto& [key, val] : j.at("names").items())
            atlas.roi_names[std::stoi(key)] = val.get<std::string>();
    return atlas;
}

namespace {
bool has_json_ext(const std::string& path) {
    return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}
}  // namespace

void save_atlas(const AtlasLabeling& atlas, const std::string& path) {
    auto os = io::open_out(path);
    if (has_json_ext(path)) {
        std::string text = atlas_to_json(atlas);
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        return;
    }
    io::write_magic(os, "ATLAS1");
    io::write_u32(os, static_cast<std::uint32_t>(atlas.labels.size()));
    for (int label : atlas.labels) io::write_i32(os, label);
    io::write_u32(os, static_cast<std::uint32_t>(atlas.excluded_labels.size()));
    for (int e : atlas.excluded_labels) io::write_i32(os, e);
    io::write_u32(os, static_cast<std::uint32_t>(atlas.roi_names.size()));
    for (const auto& [id, name] : atlas.roi_names) {
        io::write_i32(os, id);
        io::write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
}

AtlasLabeling load_atlas(const std::string& path) {
    auto is = io::open_in(path);
    if (has_json_ext(path)) {
        std::ostringstream ss;
        ss << is.rdbuf();
        return atlas_from_json(ss.str());
    }
    io::expect_magic(is, "ATLAS1");
    AtlasLabeling atlas;
    atlas.labels.resize(io::read_u32(is));
    for (auto& label : atlas.labels) label = io::read_i32(is);
    auto ne = io::read_u32(is);
    for (std::uint32_t i = 0; i < ne; ++i) atlas.excluded_labels.insert(io::read_i32(is));
    auto nn = io::read_u32(is);
    for (std::uint32_t i = 0; i < nn; ++i) {
        int id = io::read_i32(is);
        auto len = io::read_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        atlas.roi_names[id] = name;
    }
    return atlas;
}

}  // namespace csv
