#pragma once

#include <cstddef>
#include <vector>

namespace drowsy {

// Row-major dense matrix of doubles. Every matmul computes each output
// element in a single thread with a fixed summation order, so results do not
// depend on the thread count.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

    double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }
    std::size_t size() const { return a.size(); }
};

// out[BxM] (+)= A[BxK] * W[MxK]^T
void matmul_nt(const Mat& a, const Mat& w, Mat& out, bool accumulate = false);
// out[BxM] (+)= A[BxK] * W[KxM]
void matmul_nn(const Mat& a, const Mat& w, Mat& out, bool accumulate = false);
// out[MxK] (+)= A[BxM]^T * X[BxK]
void matmul_tn(const Mat& a, const Mat& x, Mat& out, bool accumulate = false);

// adds v to every row of m (v.size() == m.cols)
void add_row_vector(Mat& m, const std::vector<double>& v);
std::vector<double> col_sums(const Mat& m);

} // namespace drowsy
