#pragma once

// Data-parallel inner loops used by the reservoir and the autoencoder.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2/FMA
// variant compiled in a separate translation unit. The active table is picked
// once at startup from CPUID; MARC_KERNELS=scalar|avx2 overrides the choice.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace marc::kernels {

/// Compressed sparse row view. Column indices are 32-bit so the AVX2 variant
/// can feed them straight into gather instructions.
struct CsrView {
    std::size_t rows = 0;
    std::size_t cols = 0;
    const std::int32_t* row_ptr = nullptr;  // rows + 1 entries
    const std::int32_t* col_idx = nullptr;
    const double* values = nullptr;
};

struct KernelTable {
    std::string_view name;

    double (*dot)(const double* x, const double* y, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y = A x, A row-major rows x cols
    void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
    // C (m x n) = A (m x k) * B (k x n), or C += A * B when accumulate is set.
    // All operands row-major with the given leading dimensions.
    void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
    // y = W x
    void (*csr_matvec)(const CsrView& w, const double* x, double* y);
    void (*tanh)(const double* x, double* y, std::size_t n);
    void (*sigmoid)(const double* x, double* y, std::size_t n);
    // r += leak * (tanh(pre) - r), the forward-Euler leaky-integrator update
    void (*leaky_tanh)(const double* pre, double* r, double leak, std::size_t n);
};

const KernelTable& scalar_table();

/// nullptr when the build or the CPU lacks AVX2 + FMA.
const KernelTable* avx2_table();

const KernelTable& active();

/// Force a table by name ("scalar", "avx2", "auto"). Returns false if the
/// requested table is unavailable, leaving the selection unchanged.
bool select(std::string_view name);

// Span front-ends over the active table.

double dot(std::span<const double> x, std::span<const double> y);
void axpy(double a, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y);
void csr_matvec(const CsrView& w, std::span<const double> x, std::span<double> y);
void tanh(std::span<const double> x, std::span<double> y);
void sigmoid(std::span<const double> x, std::span<double> y);
void leaky_tanh(std::span<const double> pre, std::span<double> r, double leak);

/// Dense row-major product with optional accumulation; thin wrapper that
/// checks the extents and forwards to the active table.
void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
          std::span<const double> b, std::span<double> c, bool accumulate = false);

}  // namespace marc::kernels
