// Dispatched arithmetic kernels.
//
// Every kernel has a scalar reference implementation and, where the build
// target supports it, an AVX2 (x86-64) or NEON (aarch64) variant. The active
// variant is chosen once at load time from runtime CPU detection; tests can
// pin a specific one via select_isa(). All kernels read float32 storage and
// accumulate in float64, so the scalar and vector variants agree to summation
// order.

#pragma once

#include <cstddef>
#include <string_view>

namespace mohr::kern {

enum class Isa {
    scalar,
    avx2,
    neon,
};

// sum (x[i] - y[i])^2
extern double (*sqdist)(const float* x, const float* y, std::size_t n);
// sum (a[i] + b[i] - c[i])^2
extern double (*trans_sqdist)(const float* a, const float* b, const float* c, std::size_t n);
// sum x[i]^2
extern double (*sqnorm)(const float* x, std::size_t n);
// sum (x[i] - y[i])^2 with a precomputed double-precision left operand
extern double (*sqdist_d32)(const double* x, const float* y, std::size_t n);
// sum x[i]^2 over doubles
extern double (*sqnorm_d)(const double* x, std::size_t n);
// y[i] += a * x[i]
extern void (*axpy_d)(double a, const double* x, double* y, std::size_t n);
// x[i] *= s
extern void (*scale_f32)(float* x, std::size_t n, float s);

// Currently installed variant.
Isa active_isa();
std::string_view isa_name(Isa isa);

// Install a specific variant; returns false (leaving the current one in
// place) when the host cannot run it or it was not compiled in.
bool select_isa(Isa isa);

// Install the best supported variant. Honors MOHR_ISA=scalar|avx2|neon.
void select_best();

}  // namespace mohr::kern
