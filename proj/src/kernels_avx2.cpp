// AVX2+FMA variants of the dense kernels. This translation unit is compiled
// with -mavx2 -mfma; callers must check avx2_supported() before dispatching.

#include "fadelab/kernels.hpp"

#if defined(FADELAB_COMPILE_AVX2)

#include <cstring>
#include <immintrin.h>

namespace fadelab::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void gemm_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    std::memset(c, 0, m * n * sizeof(double));
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const __m256d av = _mm256_set1_pd(arow[p]);
            const double* brow = b + p * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
                _mm256_storeu_pd(crow + j, cv);
            }
            const double as = arow[p];
            for (; j < n; ++j) crow[j] += as * brow[j];
        }
    }
}

void gemm_tn_acc_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const __m256d av = _mm256_set1_pd(arow[p]);
            double* crow = c + p * n;
            std::size_t j = 0;
            for (; j < n4; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
                _mm256_storeu_pd(crow + j, cv);
            }
            const double as = arow[p];
            for (; j < n; ++j) crow[j] += as * brow[j];
        }
    }
}

void gemm_nt_acc_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    const std::size_t k4 = k - k % 4;
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            __m256d acc = _mm256_setzero_pd();
            std::size_t p = 0;
            for (; p < k4; p += 4) {
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), acc);
            }
            double tail = 0.0;
            for (; p < k; ++p) tail += arow[p] * brow[p];
            crow[j] += hsum(acc) + tail;
        }
    }
}

void add_avx2(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(z + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) z[i] = x[i] + y[i];
}

void sub_avx2(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(z + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) z[i] = x[i] - y[i];
}

void mul_avx2(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(z + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) z[i] = x[i] * y[i];
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) y[i] = a * x[i];
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return hsum(acc) + tail;
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i];
    return hsum(acc) + tail;
}

void add_bias_rows_avx2(double* x, const double* bias, std::size_t m, std::size_t n) {
    const std::size_t n4 = n - n % 4;
    for (std::size_t i = 0; i < m; ++i) {
        double* row = x + i * n;
        std::size_t j = 0;
        for (; j < n4; j += 4) {
            _mm256_storeu_pd(row + j, _mm256_add_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(bias + j)));
        }
        for (; j < n; ++j) row[j] += bias[j];
    }
}

constexpr Backend kAvx2{
    "avx2",
    gemm_avx2,
    gemm_tn_acc_avx2,
    gemm_nt_acc_avx2,
    add_avx2,
    sub_avx2,
    mul_avx2,
    axpy_avx2,
    scale_avx2,
    dot_avx2,
    sum_avx2,
    add_bias_rows_avx2,
};

} // namespace

const Backend* avx2_backend_impl() { return &kAvx2; }

} // namespace fadelab::kernels

#else

namespace fadelab::kernels {
const Backend* avx2_backend_impl() { return nullptr; }
} // namespace fadelab::kernels

#endif
