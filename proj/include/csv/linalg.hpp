#pragma once

#include <cstddef>
#include <vector>

namespace csv {

// Row-major dense matrix of doubles. The kernels below parallelize so each
// output element is written by exactly one thread with a serial inner loop;
// output bytes are therefore identical for any thread count.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return data.size(); }
};

// C = A * B
void matmul(const Mat& a, const Mat& b, Mat& c);
// C = A^T * B  (row-parallel over C's rows, serial accumulation over A rows)
void matmul_at_b(const Mat& a, const Mat& b, Mat& c);
// C = A * B^T
void matmul_a_bt(const Mat& a, const Mat& b, Mat& c);

void add_row_vector(Mat& m, const std::vector<double>& bias);
// column sums, one output element per column
std::vector<double> column_sums(const Mat& m);

}  // namespace csv
