#include "mohr/kernels.hpp"

#include <cstdlib>
#include <string>

#include "kernels_ref.hpp"

#if defined(MOHR_HAVE_AVX2)
#include "kernels_avx2.hpp"
#endif
#if defined(MOHR_HAVE_NEON) && (defined(__aarch64__) || defined(_M_ARM64))
#include "kernels_neon.hpp"
#define MOHR_NEON_USABLE 1
#endif

namespace mohr::kern {

double (*sqdist)(const float*, const float*, std::size_t) = ref::sqdist;
double (*trans_sqdist)(const float*, const float*, const float*, std::size_t) = ref::trans_sqdist;
double (*sqnorm)(const float*, std::size_t) = ref::sqnorm;
double (*sqdist_d32)(const double*, const float*, std::size_t) = ref::sqdist_d32;
double (*sqnorm_d)(const double*, std::size_t) = ref::sqnorm_d;
void (*axpy_d)(double, const double*, double*, std::size_t) = ref::axpy_d;
void (*scale_f32)(float*, std::size_t, float) = ref::scale_f32;

namespace {

Isa g_active = Isa::scalar;

bool cpu_supports_avx2() {
#if defined(MOHR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

[[maybe_unused]] bool cpu_supports_neon() {
#if defined(MOHR_NEON_USABLE)
    return true;  // baseline on aarch64
#else
    return false;
#endif
}

void install_scalar() {
    sqdist = ref::sqdist;
    trans_sqdist = ref::trans_sqdist;
    sqnorm = ref::sqnorm;
    sqdist_d32 = ref::sqdist_d32;
    sqnorm_d = ref::sqnorm_d;
    axpy_d = ref::axpy_d;
    scale_f32 = ref::scale_f32;
    g_active = Isa::scalar;
}

#if defined(MOHR_HAVE_AVX2)
void install_avx2() {
    sqdist = avx2::sqdist;
    trans_sqdist = avx2::trans_sqdist;
    sqnorm = avx2::sqnorm;
    sqdist_d32 = avx2::sqdist_d32;
    sqnorm_d = avx2::sqnorm_d;
    axpy_d = avx2::axpy_d;
    scale_f32 = avx2::scale_f32;
    g_active = Isa::avx2;
}
#endif

#if defined(MOHR_NEON_USABLE)
void install_neon() {
    sqdist = neon::sqdist;
    trans_sqdist = neon::trans_sqdist;
    sqnorm = neon::sqnorm;
    sqdist_d32 = neon::sqdist_d32;
    sqnorm_d = neon::sqnorm_d;
    axpy_d = neon::axpy_d;
    scale_f32 = neon::scale_f32;
    g_active = Isa::neon;
}
#endif

const int g_init = [] {
    select_best();
    return 0;
}();

}  // namespace

Isa active_isa() { return g_active; }

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

bool select_isa(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            install_scalar();
            return true;
        case Isa::avx2:
#if defined(MOHR_HAVE_AVX2)
            if (cpu_supports_avx2()) {
                install_avx2();
                return true;
            }
#endif
            return false;
        case Isa::neon:
#if defined(MOHR_NEON_USABLE)
            if (cpu_supports_neon()) {
                install_neon();
                return true;
            }
#endif
            return false;
    }
    return false;
}

void select_best() {
    if (const char* forced = std::getenv("MOHR_ISA")) {
        const std::string name(forced);
        if (name == "scalar") {
            install_scalar();
            return;
        }
        if (name == "avx2" && select_isa(Isa::avx2)) {
            return;
        }
        if (name == "neon" && select_isa(Isa::neon)) {
            return;
        }
        // Unknown or unsupported request: fall through to detection.
    }
    if (select_isa(Isa::avx2)) {
        return;
    }
    if (select_isa(Isa::neon)) {
        return;
    }
    install_scalar();
}

}  // namespace mohr::kern
