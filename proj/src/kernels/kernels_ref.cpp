#include "kernels_ref.hpp"

namespace mohr::kern::ref {

double sqdist(const float* x, const float* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        acc += d * d;
    }
    return acc;
}

double trans_sqdist(const float* a, const float* b, const float* c, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) + static_cast<double>(b[i]) - static_cast<double>(c[i]);
        acc += d * d;
    }
    return acc;
}

double sqnorm(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(x[i]);
        acc += v * v;
    }
    return acc;
}

double sqdist_d32(const double* x, const float* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - static_cast<double>(y[i]);
        acc += d * d;
    }
    return acc;
}

double sqnorm_d(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i] * x[i];
    }
    return acc;
}

void axpy_d(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += a * x[i];
    }
}

void scale_f32(float* x, std::size_t n, float s) {
    for (std::size_t i = 0; i < n; ++i) {
        x[i] *= s;
    }
}

}  // namespace mohr::kern::ref
