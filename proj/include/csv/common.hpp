#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csv {

// Error hierarchy. Every failure mode the pipeline can signal maps to one
// of these; the CLI translates them into its exit-code contract.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct validation_error : error {
    using error::error;
};

struct resource_limit_error : error {
    using error::error;
};

struct io_error : error {
    using error::error;
};

struct numeric_error : error {
    using error::error;
};

// Raised when a metric is requested on single-class input.
struct undefined_metric_error : error {
    using error::error;
};

// Raised when every candidate bound has been exhausted without a valid
// partition; carries the per-stage diagnostic trail.
struct unpartitionable_error : error {
    using error::error;
};

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }

    Vec3 normalized() const {
        double n = norm();
        return {x / n, y / n, z / n};
    }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

using Face = std::array<int, 3>;

// ---------------------------------------------------------------------------
// Little-endian binary I/O. All file formats in this project are fixed-layout
// and written field by field, so serialization is byte-deterministic.

namespace io {

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw io_error("unexpected end of file");
    return v;
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_pod(os, v); }
inline void write_i32(std::ostream& os, std::int32_t v) { write_pod(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_pod(os, v); }
inline void write_f64(std::ostream& os, double v) { write_pod(os, v); }
inline void write_f32(std::ostream& os, float v) { write_pod(os, v); }

inline std::uint32_t read_u32(std::istream& is) { return read_pod<std::uint32_t>(is); }
inline std::int32_t read_i32(std::istream& is) { return read_pod<std::int32_t>(is); }
inline std::uint64_t read_u64(std::istream& is) { return read_pod<std::uint64_t>(is); }
inline double read_f64(std::istream& is) { return read_pod<double>(is); }
inline float read_f32(std::istream& is) { return read_pod<float>(is); }

inline void write_magic(std::ostream& os, const std::string& magic) {
    os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, const std::string& magic) {
    std::string got(magic.size(), '\0');
    is.read(got.data(), static_cast<std::streamsize>(magic.size()));
    if (!is || got != magic)
        throw io_error("bad magic: expected \"" + magic + "\"");
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for writing: " + path);
    return os;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open for reading: " + path);
    return is;
}

}  // namespace io

}  // namespace csv
