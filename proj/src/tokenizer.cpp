#include "csv/tokenizer.hpp"

#include <algorithm>

namespace csv {

IndexTable build_index_table(const CsvMap& left, const CsvMap& right) {
    if (left.vertex_count() == 0 || right.vertex_count() == 0)
        throw validation_error("empty hemisphere map");

    IndexTable t;
    t.n = left.csv_count() + right.csv_count();
    t.v_max = std::max(left.v_max, right.v_max);
    t.table.assign(static_cast<size_t>(t.n) * t.v_max, -1);

    const int offset = left.vertex_count();
    int row = 0;
    for (const auto& m : left.members) {
        for (size_t j = 0; j < m.size(); ++j)
            t.table[static_cast<size_t>(row) * t.v_max + j] = m[j];
        ++row;
    }
    for (const auto& m : right.members) {
        for (size_t j = 0; j < m.size(); ++j)
            t.table[static_cast<size_t>(row) * t.v_max + j] = m[j] + offset;
        ++row;
    }
    return t;
}

std::vector<std::uint8_t> build_mask(const IndexTable& table) {
    std::vector<std::uint8_t> mask(table.table.size());
    for (size_t i = 0; i < table.table.size(); ++i) mask[i] = table.table[i] >= 0 ? 1 : 0;
    return mask;
}

PaddedBatch gather(const std::vector<std::vector<double>>& subjects, int channels,
                   const IndexTable& table, const std::vector<std::uint8_t>& mask) {
    if (channels < 1) throw validation_error("channels must be >= 1");
    if (mask.size() != table.table.size()) throw validation_error("mask/table size mismatch");

    PaddedBatch batch;
    batch.b = static_cast<int>(subjects.size());
    batch.c = channels;
    batch.n = table.n;
    batch.v_max = table.v_max;
    batch.x.assign(static_cast<size_t>(batch.b) * channels * table.n * table.v_max, 0.0);

    // exceptions must not cross the parallel region: validate up front
    std::int32_t max_index = -1;
    for (const std::int32_t v : table.table) max_index = std::max(max_index, v);
    for (const auto& subject : subjects) {
        if (subject.size() % channels != 0)
            throw validation_error("subject feature length not divisible by channel count");
        if (max_index >= static_cast<std::int32_t>(subject.size() / channels))
            throw validation_error("index table entry out of feature range");
    }

#pragma omp parallel for schedule(static) collapse(2)
    for (int bi = 0; bi < batch.b; ++bi) {
        for (int row = 0; row < table.n; ++row) {
            const auto& subject = subjects[bi];
            const int v_total = static_cast<int>(subject.size()) / channels;
            for (int col = 0; col < table.v_max; ++col) {
                const size_t flat = static_cast<size_t>(row) * table.v_max + col;
                if (!mask[flat]) continue;
                const std::int32_t v = table.table[flat];
                for (int ci = 0; ci < channels; ++ci)
                    batch.at(bi, ci, row, col) = subject[static_cast<size_t>(ci) * v_total + v];
            }
        }
    }
    batch.mask = mask;
    return batch;
}

void save_features(const std::vector<double>& features, int vertex_count, int channels,
                   const std::string& path) {
    if (features.size() != static_cast<size_t>(vertex_count) * channels)
        throw validation_error("feature buffer does not match vertex_count * channels");
    auto os = io::open_out(path);
    io::write_u32(os, static_cast<std::uint32_t>(vertex_count));
    io::write_u32(os, static_cast<std::uint32_t>(channels));
    for (double v : features) io::write_f32(os, static_cast<float>(v));
}

std::vector<double> load_features(const std::string& path, int& vertex_count, int& channels) {
    auto is = io::open_in(path);
    vertex_count = static_cast<int>(io::read_u32(is));
    channels = static_cast<int>(io::read_u32(is));
    std::vector<double> features(static_cast<size_t>(vertex_count) * channels);
    for (double& v : features) v = io::read_f32(is);
    return features;
}

void save_index_table(const IndexTable& table, const std::string& path) {
    auto os = io::open_out(path);
    io::write_magic(os, "CSVIDX1");
    io::write_u32(os, static_cast<std::uint32_t>(table.n));
    io::write_u32(os, static_cast<std::uint32_t>(table.v_max));
    for (std::int32_t v : table.table) io::write_i32(os, v);
}

IndexTable load_index_table(const std::string& path) {
    auto is = io::open_in(path);
    io::expect_magic(is, "CSVIDX1");
    IndexTable t;
    t.n = static_cast<int>(io::read_u32(is));
    t.v_max = static_cast<int>(io::read_u32(is));
    t.table.resize(static_cast<size_t>(t.n) * t.v_max);
    for (auto& v : t.table) v = io::read_i32(is);
    return t;
}

}  // namespace csv
