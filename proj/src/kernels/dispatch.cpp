#include "marc/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace marc::kernels {

#if defined(MARC_HAVE_AVX2_TU)
const KernelTable& avx2_table_impl();
#endif

const KernelTable* avx2_table() {
#if defined(MARC_HAVE_AVX2_TU)
    static const bool supported = [] {
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    }();
    return supported ? &avx2_table_impl() : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable* best_available() {
    if (const KernelTable* t = avx2_table()) return t;
    return &scalar_table();
}

const KernelTable* initial_table() {
    if (const char* env = std::getenv("MARC_KERNELS")) {
        const std::string_view want{env};
        if (want == "scalar") return &scalar_table();
        if (want == "avx2" && avx2_table() != nullptr) return avx2_table();
    }
    return best_available();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("kernel extent mismatch: ") + what);
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(std::string_view name) {
    const KernelTable* t = nullptr;
    if (name == "scalar")
        t = &scalar_table();
    else if (name == "avx2")
        t = avx2_table();
    else if (name == "auto")
        t = best_available();
    if (t == nullptr) return false;
    current().store(t, std::memory_order_release);
    return true;
}

double dot(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "dot");
    return active().dot(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size(), "axpy");
    active().axpy(a, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y) {
    require(a.size() == rows * cols && x.size() == cols && y.size() == rows, "gemv");
    active().gemv(a.data(), rows, cols, x.data(), y.data());
}

void csr_matvec(const CsrView& w, std::span<const double> x, std::span<double> y) {
    require(x.size() == w.cols && y.size() == w.rows, "csr_matvec");
    active().csr_matvec(w, x.data(), y.data());
}

void tanh(std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size(), "tanh");
    active().tanh(x.data(), y.data(), x.size());
}

void sigmoid(std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size(), "sigmoid");
    active().sigmoid(x.data(), y.data(), x.size());
}

void leaky_tanh(std::span<const double> pre, std::span<double> r, double leak) {
    require(pre.size() == r.size(), "leaky_tanh");
    active().leaky_tanh(pre.data(), r.data(), leak, r.size());
}

void gemm(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a, std::span<const double> b,
          std::span<double> c, bool accumulate) {
    require(a.size() == m * k && b.size() == k * n && c.size() == m * n, "gemm");
    active().gemm(m, n, k, a.data(), k, b.data(), n, c.data(), n, accumulate);
}

}  // namespace marc::kernels
