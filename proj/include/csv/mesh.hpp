#pragma once

#include <string>
#include <vector>

#include "csv/common.hpp"

namespace csv {

// Unit-sphere icosphere at a given subdivision level.
// level L: 10*4^L + 2 vertices, 20*4^L faces, 30*4^L edges.
struct Mesh {
    int level = 0;
    std::vector<Vec3> positions;  // unit vectors
    std::vector<Face> faces;

    int vertex_count() const { return static_cast<int>(positions.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
};

// 1-ring adjacency: per-vertex sorted neighbor lists, symmetric, no
// self-loops or duplicates.
struct Adjacency {
    std::vector<std::vector<int>> neighbors;

    int vertex_count() const { return static_cast<int>(neighbors.size()); }
    std::int64_t edge_count() const;
};

// Midpoint subdivision of the regular icosahedron, re-projected to the unit
// sphere after every split. Base vertices come first, midpoints follow in
// face-iteration order, so output is identical across runs.
// Levels above 8 are rejected (resource_limit_error).
Mesh build_icosphere(int level);

Adjacency one_ring(const Mesh& mesh);

// Connected components of the subgraph induced by `vertices`.
// Components are sorted internally ascending and returned in decreasing
// size, ties broken by smallest contained vertex index.
std::vector<std::vector<int>> connected_components(const std::vector<int>& vertices,
                                                   const Adjacency& adj);

// Mesh files: binary "ICOMESH1" (level, counts, f64 positions, u32 faces)
// or a JSON variant {level, positions, faces} when the path ends in .json.
void save_mesh(const Mesh& mesh, const std::string& path);
Mesh load_mesh(const std::string& path);

void save_mesh_binary(const Mesh& mesh, std::ostream& os);
Mesh load_mesh_binary(std::istream& is);
std::string mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const std::string& text);

}  // namespace csv
