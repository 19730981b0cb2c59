#include "csv/mesh.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <sstream>

#include <json.hpp>

namespace csv {

std::int64_t Adjacency::edge_count() const {
    std::int64_t twice = 0;
    for (const auto& nb : neighbors) twice += static_cast<std::int64_t>(nb.size());
    return twice / 2;
}

namespace {

Mesh base_icosahedron() {
    Mesh m;
    m.level = 0;
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;

    const Vec3 raw[12] = {
        {-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t},   {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1},   {-t, 0, -1}, {-t, 0, 1},
    };
    for (const Vec3& v : raw) m.positions.push_back(v.normalized());

    m.faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };
    return m;
}

}  // namespace

Mesh build_icosphere(int level) {
    if (level < 0) throw validation_error("icosphere level must be >= 0");
    if (level > 8)
        throw resource_limit_error("icosphere level " + std::to_string(level) +
                                   " exceeds guard (max 8)");

    Mesh mesh = base_icosahedron();

    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Vec3 p = ((mesh.positions[a] + mesh.positions[b]) * 0.5).normalized();
            int idx = mesh.vertex_count();
            mesh.positions.push_back(p);
            midpoint.emplace(key, idx);
            return idx;
        };

        std::vector<Face> next;
        next.reserve(mesh.faces.size() * 4);
        for (const Face& f : mesh.faces) {
            int a = mid(f[0], f[1]);
            int b = mid(f[1], f[2]);
            int c = mid(f[2], f[0]);
            next.push_back({f[0], a, c});
            next.push_back({f[1], b, a});
            next.push_back({f[2], c, b});
            next.push_back({a, b, c});
        }
        mesh.faces = std::move(next);
    }

    mesh.level = level;
    return mesh;
}

Adjacency one_ring(const Mesh& mesh) {
    const int n = mesh.vertex_count();
    Adjacency adj;
    adj.neighbors.assign(n, {});

    for (const Face& f : mesh.faces) {
        for (int i = 0; i < 3; ++i) {
            if (f[i] < 0 || f[i] >= n)
                throw validation_error("face references invalid vertex index " +
                                       std::to_string(f[i]));
        }
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            throw validation_error("degenerate face with repeated vertex");
        for (int i = 0; i < 3; ++i) {
            int u = f[i], v = f[(i + 1) % 3];
            adj.neighbors[u].push_back(v);
            adj.neighbors[v].push_back(u);
        }
    }

    for (auto& nb : adj.neighbors) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    return adj;
}

std::vector<std::vector<int>> connected_components(const std::vector<int>& vertices,
                                                   const Adjacency& adj) {
    const int n = adj.vertex_count();
    std::vector<char> in_set(n, 0), seen(n, 0);
    for (int v : vertices) {
        if (v < 0 || v >= n) throw validation_error("vertex index out of range");
        in_set[v] = 1;
    }

    std::vector<int> sorted(vertices);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<std::vector<int>> comps;
    std::vector<int> queue;
    for (int start : sorted) {
        if (seen[start]) continue;
        std::vector<int> comp;
        queue.clear();
        queue.push_back(start);
        seen[start] = 1;
        while (!queue.empty()) {
            int v = queue.back();
            queue.pop_back();
            comp.push_back(v);
            for (int u : adj.neighbors[v]) {
                if (in_set[u] && !seen[u]) {
                    seen[u] = 1;
                    queue.push_back(u);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }

    // size-desc, then smallest contained index
    std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.front() < b.front();
    });
    return comps;
}

void save_mesh_binary(const Mesh& mesh, std::ostream& os) {
    io::write_magic(os, "ICOMESH1");
    io::write_u32(os, static_cast<std::uint32_t>(mesh.level));
    io::write_u64(os, static_cast<std::uint64_t>(mesh.positions.size()));
    io::write_u64(os, static_cast<std::uint64_t>(mesh.faces.size()));
    for (const Vec3& p : mesh.positions) {
        io::write_f64(os, p.x);
        io::write_f64(os, p.y);
        io::write_f64(os, p.z);
    }
    for (const Face& f : mesh.faces)
        for (int idx : f) io::write_u32(os, static_cast<std::uint32_t>(idx));
}

Mesh load_mesh_binary(std::istream& is) {
    io::expect_magic(is, "ICOMESH1");
    Mesh mesh;
    mesh.level = static_cast<int>(io::read_u32(is));
    auto nv = io::read_u64(is);
    auto nf = io::read_u64(is);
    mesh.positions.resize(nv);
    for (auto& p : mesh.positions) {
        p.x = io::read_f64(is);
        p.y = io::read_f64(is);
        p.z = io::read_f64(is);
    }
    mesh.faces.resize(nf);
    for (auto& f : mesh.faces)
        for (int i = 0; i < 3; ++i) f[i] = static_cast<int>(io::read_u32(is));
    return mesh;
}

std::string mesh_to_json(const Mesh& mesh) {
    nlohmann::json j;
    j["level"] = mesh.level;
    auto& pos = j["positions"] = nlohmann::json::array();
    for (const Vec3& p : mesh.positions) pos.push_back({p.x, p.y, p.z});
    auto& fc = j["faces"] = nlohmann::json::array();
    for (const Face& f : mesh.faces) fc.push_back({f[0], f[1], f[2]});
    return j.dump();
}

Mesh mesh_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Mesh mesh;
    mesh.level = j.at("level").get<int>();
    for (const auto& p : j.at("positions"))
        mesh.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>(),
                                  p.at(2).get<double>()});
    for (const auto& f : j.at("faces"))
        mesh.faces.push_back({f.at(0).get<int>(), f.at(1).get<int>(), f.at(2).get<int>()});
    return mesh;
}

namespace {
bool has_json_ext(const std::string& path) {
    return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}
}  // namespace

void save_mesh(const Mesh& mesh, const std::string& path) {
    auto os = io::open_out(path);
    if (has_json_ext(path)) {
        std::string text = mesh_to_json(mesh);
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
    } else {
        save_mesh_binary(mesh, os);
    }
    if (!os) throw io_error("write failed: " + path);
}

Mesh load_mesh(const std::string& path) {
    auto is = io::open_in(path);
    if (has_json_ext(path)) {
        std::ostringstream ss;
        ss << is.rdbuf();
        return mesh_from_json(ss.str());
    }
    return load_mesh_binary(is);
}

}  // namespace csv
