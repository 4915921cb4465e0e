// AVX2 + FMA kernels. Operands are widened to float64 before combining so the
// per-element arithmetic matches the scalar reference exactly; only the
// reduction order differs (4 lanes summed at the end).
//
// This translation unit is compiled with -mavx2 -mfma and must only be entered
// after a runtime cpuid check.

#include "kernels_avx2.hpp"

#include <immintrin.h>

namespace mohr::kern::avx2 {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d sum2 = _mm_add_pd(lo, hi);
    const __m128d swapped = _mm_unpackhi_pd(sum2, sum2);
    return _mm_cvtsd_f64(_mm_add_sd(sum2, swapped));
}

inline __m256d load4_as_pd(const float* p) {
    return _mm256_cvtps_pd(_mm_loadu_ps(p));
}

}  // namespace

double sqdist(const float* x, const float* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(load4_as_pd(x + i), load4_as_pd(y + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        tail += d * d;
    }
    return hsum(acc) + tail;
}

double trans_sqdist(const float* a, const float* b, const float* c, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d =
            _mm256_sub_pd(_mm256_add_pd(load4_as_pd(a + i), load4_as_pd(b + i)), load4_as_pd(c + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = static_cast<double>(a[i]) + static_cast<double>(b[i]) - static_cast<double>(c[i]);
        tail += d * d;
    }
    return hsum(acc) + tail;
}

double sqnorm(const float* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = load4_as_pd(x + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double v = static_cast<double>(x[i]);
        tail += v * v;
    }
    return hsum(acc) + tail;
}

double sqdist_d32(const double* x, const float* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), load4_as_pd(y + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = x[i] - static_cast<double>(y[i]);
        tail += d * d;
    }
    return hsum(acc) + tail;
}

double sqnorm_d(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        tail += x[i] * x[i];
    }
    return hsum(acc) + tail;
}

void axpy_d(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void scale_f32(float* x, std::size_t n, float s) {
    const __m256 vs = _mm256_set1_ps(s);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(x + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), vs));
    }
    for (; i < n; ++i) {
        x[i] *= s;
    }
}

}  // namespace mohr::kern::avx2
