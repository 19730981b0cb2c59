#pragma once

#include <string>
#include <vector>

#include "csv/partitioner.hpp"

namespace csv {

// CSV-to-vertex lookup, both hemispheres: N rows of v_max entries, each row
// the sorted member vertices of one CSV followed by -1 padding. Right
// hemisphere vertex indices are offset by the left vertex count.
struct IndexTable {
    int n = 0;
    int v_max = 0;
    std::vector<std::int32_t> table;  // row-major n x v_max

    std::int32_t at(int row, int col) const { return table[static_cast<size_t>(row) * v_max + col]; }
};

// Gathered model input: x is B x C x N x V_max with zeros at padded slots,
// mask is N x V_max with 1 where a vertex is present.
struct PaddedBatch {
    int b = 0, c = 0, n = 0, v_max = 0;
    std::vector<double> x;
    std::vector<std::uint8_t> mask;

    double& at(int bi, int ci, int row, int col) {
        return x[((static_cast<size_t>(bi) * c + ci) * n + row) * v_max + col];
    }
    double at(int bi, int ci, int row, int col) const {
        return x[((static_cast<size_t>(bi) * c + ci) * n + row) * v_max + col];
    }
};

IndexTable build_index_table(const CsvMap& left, const CsvMap& right);

std::vector<std::uint8_t> build_mask(const IndexTable& table);

// Per-subject features are flat C x V_total arrays (channel-major). Gathers
// x[b][c][i][j] = features[b][c * v_total + table(i,j)] where the mask is
// set, zero elsewhere.
PaddedBatch gather(const std::vector<std::vector<double>>& subjects, int channels,
                   const IndexTable& table, const std::vector<std::uint8_t>& mask);

// Feature file: u32 vertex count, u32 channels, then f32 values per channel.
void save_features(const std::vector<double>& features, int vertex_count, int channels,
                   const std::string& path);
std::vector<double> load_features(const std::string& path, int& vertex_count, int& channels);

// Index table file: "CSVIDX1", u32 N, u32 v_max, i32 row-major entries.
void save_index_table(const IndexTable& table, const std::string& path);
IndexTable load_index_table(const std::string& path);

}  // namespace csv
