#include "drowsy/mat.hpp"

#include <stdexcept>

#include "drowsy/util.hpp"

namespace drowsy {

namespace {
// Threading pays off only for reasonably large products.
constexpr std::size_t kParallelFlopThreshold = 131072;

void check(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("matmul: shape mismatch: ") + what);
}
} // namespace

// out[b,m] = sum_k A[b,k] * W[m,k]; batch rows are processed four at a time
// so each W row is streamed once per block.
void matmul_nt(const Mat& a, const Mat& w, Mat& out, bool accumulate) {
    check(a.cols == w.cols, "A.cols != W.cols (nt)");
    check(out.rows == a.rows && out.cols == w.rows, "out shape (nt)");
    const int k = a.cols;
    const std::size_t flops = static_cast<std::size_t>(a.rows) * w.rows * k;
    auto body = [&](std::size_t lo, std::size_t hi) {
        std::size_t b = lo;
        for (; b + 4 <= hi; b += 4) {
            const double* a0 = a.row(static_cast<int>(b));
            const double* a1 = a.row(static_cast<int>(b) + 1);
            const double* a2 = a.row(static_cast<int>(b) + 2);
            const double* a3 = a.row(static_cast<int>(b) + 3);
            double* o0 = out.row(static_cast<int>(b));
            double* o1 = out.row(static_cast<int>(b) + 1);
            double* o2 = out.row(static_cast<int>(b) + 2);
            double* o3 = out.row(static_cast<int>(b) + 3);
            for (int m = 0; m < w.rows; ++m) {
                const double* wr = w.row(m);
                double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
                for (int j = 0; j < k; ++j) {
                    const double wj = wr[j];
                    s0 += a0[j] * wj;
                    s1 += a1[j] * wj;
                    s2 += a2[j] * wj;
                    s3 += a3[j] * wj;
                }
                if (accumulate) {
                    o0[m] += s0;
                    o1[m] += s1;
                    o2[m] += s2;
                    o3[m] += s3;
                } else {
                    o0[m] = s0;
                    o1[m] = s1;
                    o2[m] = s2;
                    o3[m] = s3;
                }
            }
        }
        for (; b < hi; ++b) {
            const double* ar = a.row(static_cast<int>(b));
            double* orow = out.row(static_cast<int>(b));
            for (int m = 0; m < w.rows; ++m) {
                const double* wr = w.row(m);
                double acc = 0.0;
                for (int j = 0; j < k; ++j) acc += ar[j] * wr[j];
                if (accumulate)
                    orow[m] += acc;
                else
                    orow[m] = acc;
            }
        }
    };
    if (flops >= kParallelFlopThreshold)
        parallel_for(0, static_cast<std::size_t>(a.rows), body);
    else
        body(0, static_cast<std::size_t>(a.rows));
}

void matmul_nn(const Mat& a, const Mat& w, Mat& out, bool accumulate) {
    check(a.cols == w.rows, "A.cols != W.rows (nn)");
    check(out.rows == a.rows && out.cols == w.cols, "out shape (nn)");
    const std::size_t flops = static_cast<std::size_t>(a.rows) * a.cols * w.cols;
    auto body = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t b = lo; b < hi; ++b) {
            const double* ar = a.row(static_cast<int>(b));
            double* orow = out.row(static_cast<int>(b));
            if (!accumulate) {
                for (int m = 0; m < out.cols; ++m) orow[m] = 0.0;
            }
            for (int j = 0; j < a.cols; ++j) {
                const double s = ar[j];
                if (s == 0.0) continue;
                const double* wr = w.row(j);
                for (int m = 0; m < out.cols; ++m) orow[m] += s * wr[m];
            }
        }
    };
    if (flops >= kParallelFlopThreshold)
        parallel_for(0, static_cast<std::size_t>(a.rows), body);
    else
        body(0, static_cast<std::size_t>(a.rows));
}

// out[m,:] += sum_b A[b,m] * X[b,:]; four batch rows per pass.
void matmul_tn(const Mat& a, const Mat& x, Mat& out, bool accumulate) {
    check(a.rows == x.rows, "A.rows != X.rows (tn)");
    check(out.rows == a.cols && out.cols == x.cols, "out shape (tn)");
    const std::size_t flops = static_cast<std::size_t>(a.rows) * a.cols * x.cols;
    const int n = x.cols;
    auto body = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t m = lo; m < hi; ++m) {
            double* orow = out.row(static_cast<int>(m));
            if (!accumulate) {
                for (int j = 0; j < n; ++j) orow[j] = 0.0;
            }
            int b = 0;
            for (; b + 4 <= a.rows; b += 4) {
                const double s0 = a.at(b, static_cast<int>(m));
                const double s1 = a.at(b + 1, static_cast<int>(m));
                const double s2 = a.at(b + 2, static_cast<int>(m));
                const double s3 = a.at(b + 3, static_cast<int>(m));
                const double* x0 = x.row(b);
                const double* x1 = x.row(b + 1);
                const double* x2 = x.row(b + 2);
                const double* x3 = x.row(b + 3);
                for (int j = 0; j < n; ++j) orow[j] += s0 * x0[j] + s1 * x1[j] + s2 * x2[j] + s3 * x3[j];
            }
            for (; b < a.rows; ++b) {
                const double s = a.at(b, static_cast<int>(m));
                if (s == 0.0) continue;
                const double* xr = x.row(b);
                for (int j = 0; j < n; ++j) orow[j] += s * xr[j];
            }
        }
    };
    if (flops >= kParallelFlopThreshold)
        parallel_for(0, static_cast<std::size_t>(a.cols), body);
    else
        body(0, static_cast<std::size_t>(a.cols));
}

void add_row_vector(Mat& m, const std::vector<double>& v) {
    check(static_cast<std::size_t>(m.cols) == v.size(), "bias length");
    for (int r = 0; r < m.rows; ++r) {
        double* row = m.row(r);
        for (int c = 0; c < m.cols; ++c) row[c] += v[static_cast<std::size_t>(c)];
    }
}

std::vector<double> col_sums(const Mat& m) {
    std::vector<double> out(static_cast<std::size_t>(m.cols), 0.0);
    for (int r = 0; r < m.rows; ++r) {
        const double* row = m.row(r);
        for (int c = 0; c < m.cols; ++c) out[static_cast<std::size_t>(c)] += row[c];
    }
    return out;
}

} // namespace drowsy
