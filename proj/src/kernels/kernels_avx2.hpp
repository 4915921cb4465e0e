#pragma once

#include <cstddef>

namespace mohr::kern::avx2 {

double sqdist(const float* x, const float* y, std::size_t n);
double trans_sqdist(const float* a, const float* b, const float* c, std::size_t n);
double sqnorm(const float* x, std::size_t n);
double sqdist_d32(const double* x, const float* y, std::size_t n);
double sqnorm_d(const double* x, std::size_t n);
void axpy_d(double a, const double* x, double* y, std::size_t n);
void scale_f32(float* x, std::size_t n, float s);

}  // namespace mohr::kern::avx2
