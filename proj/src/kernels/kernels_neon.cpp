// NEON kernels for aarch64. Same widening semantics as the scalar reference:
// float32 lanes are converted to float64 before combining, accumulation runs
// in two float64 lanes summed at the end.

#include "kernels_neon.hpp"

#if defined(__aarch64__) || defined(_M_ARM64)

#include <arm_neon.h>

namespace mohr::kern::neon {

namespace {

inline float64x2_t lo_pd(float32x4_t v) { return vcvt_f64_f32(vget_low_f32(v)); }
inline float64x2_t hi_pd(float32x4_t v) { return vcvt_high_f64_f32(v); }

}  // namespace

double sqdist(const float* x, const float* y, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t vx = vld1q_f32(x + i);
        const float32x4_t vy = vld1q_f32(y + i);
        const float64x2_t d0 = vsubq_f64(lo_pd(vx), lo_pd(vy));
        const float64x2_t d1 = vsubq_f64(hi_pd(vx), hi_pd(vy));
        acc = vfmaq_f64(acc, d0, d0);
        acc = vfmaq_f64(acc, d1, d1);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        tail += d * d;
    }
    return vaddvq_f64(acc) + tail;
}

double trans_sqdist(const float* a, const float* b, const float* c, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t va = vld1q_f32(a + i);
        const float32x4_t vb = vld1q_f32(b + i);
        const float32x4_t vc = vld1q_f32(c + i);
        const float64x2_t d0 = vsubq_f64(vaddq_f64(lo_pd(va), lo_pd(vb)), lo_pd(vc));
        const float64x2_t d1 = vsubq_f64(vaddq_f64(hi_pd(va), hi_pd(vb)), hi_pd(vc));
        acc = vfmaq_f64(acc, d0, d0);
        acc = vfmaq_f64(acc, d1, d1);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = static_cast<double>(a[i]) + static_cast<double>(b[i]) - static_cast<double>(c[i]);
        tail += d * d;
    }
    return vaddvq_f64(acc) + tail;
}

double sqnorm(const float* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t v = vld1q_f32(x + i);
        const float64x2_t v0 = lo_pd(v);
        const float64x2_t v1 = hi_pd(v);
        acc = vfmaq_f64(acc, v0, v0);
        acc = vfmaq_f64(acc, v1, v1);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double v = static_cast<double>(x[i]);
        tail += v * v;
    }
    return vaddvq_f64(acc) + tail;
}

double sqdist_d32(const double* x, const float* y, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t vy = vld1q_f32(y + i);
        const float64x2_t d0 = vsubq_f64(vld1q_f64(x + i), lo_pd(vy));
        const float64x2_t d1 = vsubq_f64(vld1q_f64(x + i + 2), hi_pd(vy));
        acc = vfmaq_f64(acc, d0, d0);
        acc = vfmaq_f64(acc, d1, d1);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = x[i] - static_cast<double>(y[i]);
        tail += d * d;
    }
    return vaddvq_f64(acc) + tail;
}

double sqnorm_d(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t v = vld1q_f64(x + i);
        acc = vfmaq_f64(acc, v, v);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        tail += x[i] * x[i];
    }
    return vaddvq_f64(acc) + tail;
}

void axpy_d(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    }
    for (; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void scale_f32(float* x, std::size_t n, float s) {
    const float32x4_t vs = vdupq_n_f32(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(x + i, vmulq_f32(vld1q_f32(x + i), vs));
    }
    for (; i < n; ++i) {
        x[i] *= s;
    }
}

}  // namespace mohr::kern::neon

#endif  // aarch64
