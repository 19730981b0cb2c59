#include "csv/linalg.hpp"

#include <cassert>

namespace csv {

void matmul(const Mat& a, const Mat& b, Mat& c) {
    assert(a.cols == b.rows);
    c = Mat(a.rows, b.cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_at_b(const Mat& a, const Mat& b, Mat& c) {
    assert(a.rows == b.rows);
    c = Mat(a.cols, b.cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < a.cols; ++i) {
        double* crow = c.row(i);
        for (int m = 0; m < a.rows; ++m) {
            const double av = a.at(m, i);
            if (av == 0.0) continue;
            const double* brow = b.row(m);
            for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_a_bt(const Mat& a, const Mat& b, Mat& c) {
    assert(a.cols == b.cols);
    c = Mat(a.rows, b.rows);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row(i);
        double* crow = c.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row(j);
            double sum = 0.0;
            for (int k = 0; k < a.cols; ++k) sum += arow[k] * brow[k];
            crow[j] = sum;
        }
    }
}

void add_row_vector(Mat& m, const std::vector<double>& bias) {
    assert(static_cast<int>(bias.size()) == m.cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m.rows; ++i) {
        double* row = m.row(i);
        for (int j = 0; j < m.cols; ++j) row[j] += bias[j];
    }
}

std::vector<double> column_sums(const Mat& m) {
    std::vector<double> sums(m.cols, 0.0);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < m.rows; ++i) s += m.at(i, j);
        sums[j] = s;
    }
    return sums;
}

}  // namespace csv
