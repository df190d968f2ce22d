// AVX2 + FMA kernels. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here may be called unless dispatch confirmed support.

#include "marc/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace marc::kernels {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Cephes-style exp: range reduction by ln 2 and a (3,4) Pade approximant on
// the remainder. Accurate to about one ulp over the clamped range.
inline __m256d exp_pd(__m256d x) {
    const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
    const __m256d c1 = _mm256_set1_pd(6.93145751953125E-1);
    const __m256d c2 = _mm256_set1_pd(1.42860682030941723212E-6);
    const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 1.5 * 2^52

    x = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(-708.0)), _mm256_set1_pd(709.0));
    const __m256d fx = _mm256_floor_pd(_mm256_fmadd_pd(x, log2e, _mm256_set1_pd(0.5)));
    x = _mm256_fnmadd_pd(fx, c1, x);
    x = _mm256_fnmadd_pd(fx, c2, x);

    const __m256d xx = _mm256_mul_pd(x, x);
    __m256d px = _mm256_set1_pd(1.26177193074810590878E-4);
    px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(3.02994407707441961300E-2));
    px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(9.99999999999999999910E-1));
    px = _mm256_mul_pd(px, x);
    __m256d qx = _mm256_set1_pd(3.00198505138664455042E-6);
    qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.52448340349684104192E-3));
    qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.27265548208155028766E-1));
    qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.00000000000000000009E0));
    x = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
    x = _mm256_fmadd_pd(_mm256_set1_pd(2.0), x, _mm256_set1_pd(1.0));

    // 2^fx assembled directly in the exponent field
    __m256i n = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(fx, magic)), _mm256_castpd_si256(magic));
    n = _mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52);
    return _mm256_mul_pd(x, _mm256_castsi256_pd(n));
}

// tanh: odd rational approximation below 0.625, 1 - 2/(exp(2|x|)+1) above.
inline __m256d tanh_pd(__m256d x) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d ax = _mm256_andnot_pd(sign_mask, x);

    const __m256d z = _mm256_mul_pd(x, x);
    __m256d p = _mm256_set1_pd(-9.64399179425052238628E-1);
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(-9.92877231001918586564E1));
    p = _mm256_fmadd_pd(p, z, _mm256_set1_pd(-1.61468768441708447952E3));
    __m256d q = _mm256_add_pd(z, _mm256_set1_pd(1.12811678491632931402E2));
    q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(2.23548839060100448583E3));
    q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(4.84406305325125486048E3));
    const __m256d small = _mm256_fmadd_pd(_mm256_mul_pd(x, z), _mm256_div_pd(p, q), x);

    const __m256d e = exp_pd(_mm256_mul_pd(_mm256_set1_pd(2.0), _mm256_min_pd(ax, _mm256_set1_pd(22.0))));
    __m256d large = _mm256_sub_pd(_mm256_set1_pd(1.0),
                                  _mm256_div_pd(_mm256_set1_pd(2.0), _mm256_add_pd(e, _mm256_set1_pd(1.0))));
    large = _mm256_or_pd(large, _mm256_and_pd(sign_mask, x));

    const __m256d use_small = _mm256_cmp_pd(ax, _mm256_set1_pd(0.625), _CMP_LT_OQ);
    return _mm256_blendv_pd(large, small, use_small);
}

inline __m256d sigmoid_pd(__m256d x) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), x));
    return _mm256_div_pd(one, _mm256_add_pd(one, e));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
        a2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), a2);
        a3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), a3);
    }
    for (; i + 4 <= n; i += 4) a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    double acc = hsum(_mm256_add_pd(_mm256_add_pd(a0, a1), _mm256_add_pd(a2, a3)));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i) y[i] = dot_avx2(a + i * cols, x, cols);
}

// Blocked GEMM: packed A panels of kMr rows, packed B panels of kNr columns,
// 6x8 register tile.
constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 8;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 72;
constexpr std::size_t kNc = 1024;

void micro_kernel(std::size_t kc, const double* pa, const double* pb, double* c, std::size_t ldc, std::size_t mr,
                  std::size_t nr) {
    __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
    __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
    __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
    __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
    __m256d c40 = _mm256_setzero_pd(), c41 = _mm256_setzero_pd();
    __m256d c50 = _mm256_setzero_pd(), c51 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < kc; ++p) {
        const __m256d b0 = _mm256_loadu_pd(pb);
        const __m256d b1 = _mm256_loadu_pd(pb + 4);
        __m256d a = _mm256_broadcast_sd(pa);
        c00 = _mm256_fmadd_pd(a, b0, c00);
        c01 = _mm256_fmadd_pd(a, b1, c01);
        a = _mm256_broadcast_sd(pa + 1);
        c10 = _mm256_fmadd_pd(a, b0, c10);
        c11 = _mm256_fmadd_pd(a, b1, c11);
        a = _mm256_broadcast_sd(pa + 2);
        c20 = _mm256_fmadd_pd(a, b0, c20);
        c21 = _mm256_fmadd_pd(a, b1, c21);
        a = _mm256_broadcast_sd(pa + 3);
        c30 = _mm256_fmadd_pd(a, b0, c30);
        c31 = _mm256_fmadd_pd(a, b1, c31);
        a = _mm256_broadcast_sd(pa + 4);
        c40 = _mm256_fmadd_pd(a, b0, c40);
        c41 = _mm256_fmadd_pd(a, b1, c41);
        a = _mm256_broadcast_sd(pa + 5);
        c50 = _mm256_fmadd_pd(a, b0, c50);
        c51 = _mm256_fmadd_pd(a, b1, c51);
        pa += kMr;
        pb += kNr;
    }
    const __m256d acc[kMr][2] = {{c00, c01}, {c10, c11}, {c20, c21}, {c30, c31}, {c40, c41}, {c50, c51}};
    if (mr == kMr && nr == kNr) {
        for (std::size_t r = 0; r < kMr; ++r) {
            double* row = c + r * ldc;
            _mm256_storeu_pd(row, _mm256_add_pd(_mm256_loadu_pd(row), acc[r][0]));
            _mm256_storeu_pd(row + 4, _mm256_add_pd(_mm256_loadu_pd(row + 4), acc[r][1]));
        }
        return;
    }
    alignas(32) double tile[kMr][kNr];
    for (std::size_t r = 0; r < kMr; ++r) {
        _mm256_store_pd(&tile[r][0], acc[r][0]);
        _mm256_store_pd(&tile[r][4], acc[r][1]);
    }
    for (std::size_t r = 0; r < mr; ++r)
        for (std::size_t j = 0; j < nr; ++j) c[r * ldc + j] += tile[r][j];
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
               std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, 0.0);
    if (m == 0 || n == 0 || k == 0) return;

    thread_local std::vector<double> pack_a;
    thread_local std::vector<double> pack_b;
    pack_a.resize(kMc * kKc);
    pack_b.resize(kKc * kNc);

    for (std::size_t jc = 0; jc < n; jc += kNc) {
        const std::size_t nc = std::min(kNc, n - jc);
        for (std::size_t pc = 0; pc < k; pc += kKc) {
            const std::size_t kc = std::min(kKc, k - pc);
            for (std::size_t j0 = 0; j0 < nc; j0 += kNr) {
                double* dst = pack_b.data() + j0 * kc;
                const std::size_t w = std::min(kNr, nc - j0);
                for (std::size_t p = 0; p < kc; ++p) {
                    const double* src = b + (pc + p) * ldb + jc + j0;
                    std::size_t j = 0;
                    for (; j < w; ++j) dst[p * kNr + j] = src[j];
                    for (; j < kNr; ++j) dst[p * kNr + j] = 0.0;
                }
            }
            for (std::size_t ic = 0; ic < m; ic += kMc) {
                const std::size_t mc = std::min(kMc, m - ic);
                for (std::size_t i0 = 0; i0 < mc; i0 += kMr) {
                    double* dst = pack_a.data() + i0 * kc;
                    const std::size_t h = std::min(kMr, mc - i0);
                    for (std::size_t p = 0; p < kc; ++p) {
                        std::size_t r = 0;
                        for (; r < h; ++r) dst[p * kMr + r] = a[(ic + i0 + r) * lda + pc + p];
                        for (; r < kMr; ++r) dst[p * kMr + r] = 0.0;
                    }
                }
                for (std::size_t j0 = 0; j0 < nc; j0 += kNr) {
                    const std::size_t nr = std::min(kNr, nc - j0);
                    for (std::size_t i0 = 0; i0 < mc; i0 += kMr) {
                        const std::size_t mr = std::min(kMr, mc - i0);
                        micro_kernel(kc, pack_a.data() + i0 * kc, pack_b.data() + j0 * kc,
                                     c + (ic + i0) * ldc + jc + j0, ldc, mr, nr);
                    }
                }
            }
        }
    }
}

void csr_matvec_avx2(const CsrView& w, const double* x, double* y) {
    for (std::size_t i = 0; i < w.rows; ++i) {
        std::int32_t p = w.row_ptr[i];
        const std::int32_t end = w.row_ptr[i + 1];
        __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
        for (; p + 8 <= end; p += 8) {
            const __m128i i0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(w.col_idx + p));
            const __m128i i1 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(w.col_idx + p + 4));
            acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(w.values + p), _mm256_i32gather_pd(x, i0, 8), acc0);
            acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(w.values + p + 4), _mm256_i32gather_pd(x, i1, 8), acc1);
        }
        for (; p + 4 <= end; p += 4) {
            const __m128i i0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(w.col_idx + p));
            acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(w.values + p), _mm256_i32gather_pd(x, i0, 8), acc0);
        }
        double acc = hsum(_mm256_add_pd(acc0, acc1));
        for (; p < end; ++p) acc += w.values[p] * x[w.col_idx[p]];
        y[i] = acc;
    }
}

void tanh_avx2(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, tanh_pd(_mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = std::tanh(x[i]);
}

void sigmoid_avx2(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, sigmoid_pd(_mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void leaky_tanh_avx2(const double* pre, double* r, double leak, std::size_t n) {
    const __m256d vl = _mm256_set1_pd(leak);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = tanh_pd(_mm256_loadu_pd(pre + i));
        const __m256d ri = _mm256_loadu_pd(r + i);
        _mm256_storeu_pd(r + i, _mm256_fmadd_pd(vl, _mm256_sub_pd(t, ri), ri));
    }
    for (; i < n; ++i) r[i] += leak * (std::tanh(pre[i]) - r[i]);
}

}  // namespace

const KernelTable& avx2_table_impl() {
    static const KernelTable table{
        "avx2",          dot_avx2,  axpy_avx2,    gemv_avx2,       gemm_avx2,
        csr_matvec_avx2, tanh_avx2, sigmoid_avx2, leaky_tanh_avx2,
    };
    return table;
}

}  // namespace marc::kernels
