// Deterministic random source. xoshiro256** seeded through splitmix64, with
// explicit bounded-integer and unit-interval conversions so streams reproduce
// bit-for-bit across platforms and standard libraries.

#pragma once

#include <cstdint>

namespace mohr {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive an independent stream seed from a base seed and up to three words
// (stream tag, row/user index, extra discriminator).
inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = seed;
    uint64_t h = splitmix64(s);
    s ^= a * 0x9e3779b97f4a7c15ULL;
    h ^= splitmix64(s);
    s ^= b * 0xd1b54a32d192ed03ULL;
    h ^= splitmix64(s);
    s ^= c * 0x2545f4914f6cdd1dULL;
    h ^= splitmix64(s);
    return h;
}

class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& word : state_) {
            word = splitmix64(sm);
        }
    }

    uint64_t next() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Unbiased integer in [0, n). n must be > 0.
    uint64_t bounded(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            const uint64_t r = next();
            if (r >= threshold) {
                return r % n;
            }
        }
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    float uniform_f32(float lo, float hi) { return static_cast<float>(uniform(lo, hi)); }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4];
};

// Stream tags used to derive independent substreams from one run seed.
namespace stream {
inline constexpr uint64_t init_user = 0x01;
inline constexpr uint64_t init_item = 0x02;
inline constexpr uint64_t init_rel = 0x03;
inline constexpr uint64_t train_sampler = 0x10;
inline constexpr uint64_t eval_negatives = 0x20;
inline constexpr uint64_t eval_layout = 0x21;
inline constexpr uint64_t synth_planted = 0x30;
inline constexpr uint64_t synth_sequence = 0x31;
inline constexpr uint64_t synth_start = 0x32;
}  // namespace stream

// Row key that makes the latent-relation row draw the same initial values
// whatever slot it occupies, so models with and without explicit relations
// start from identical latent parameters.
inline constexpr uint64_t kLatentRowKey = 0xffffffffULL;

}  // namespace mohr
