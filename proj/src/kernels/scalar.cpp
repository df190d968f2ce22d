// Portable reference kernels. These define the expected results for the
// vectorized variants; keep them straightforward.

#include "marc/kernels.hpp"

#include <cmath>

namespace marc::kernels {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i) y[i] = dot_scalar(a + i * cols, x, cols);
}

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        if (!accumulate)
            for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * lda + p];
            const double* brow = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void csr_matvec_scalar(const CsrView& w, const double* x, double* y) {
    for (std::size_t i = 0; i < w.rows; ++i) {
        double acc = 0.0;
        for (std::int32_t p = w.row_ptr[i]; p < w.row_ptr[i + 1]; ++p) acc += w.values[p] * x[w.col_idx[p]];
        y[i] = acc;
    }
}

void tanh_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void sigmoid_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void leaky_tanh_scalar(const double* pre, double* r, double leak, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) r[i] += leak * (std::tanh(pre[i]) - r[i]);
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{
        "scalar",     dot_scalar,   axpy_scalar,    gemv_scalar,       gemm_scalar,
        csr_matvec_scalar, tanh_scalar, sigmoid_scalar, leaky_tanh_scalar,
    };
    return table;
}

}  // namespace marc::kernels
