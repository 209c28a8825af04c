#ifndef JFDL_RNG_HPP
#define JFDL_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

namespace jfdl {

// Self-contained RNG so that outputs are reproducible bit-for-bit across
// platforms and standard-library versions (std::normal_distribution is not
// portable). splitmix64 core, Box-Muller normals with a cached spare.
class Rng {
  public:
    Rng() = default;
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n), n > 0. Modulo bias is < 2^-53 for any n we use.
    uint64_t below(uint64_t n) { return next_u64() % n; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // Box-Muller; u clamped away from 0 so log() is finite.
        double u = uniform();
        if (u <= 0.0) u = 0x1.0p-53;
        double radius = std::sqrt(-2.0 * std::log(u));
        double angle = 6.283185307179586476925286766559 * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

  private:
    uint64_t state_ = 0x853c49e6748fea9bull;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// FNV-1a, used both for checksums and for deriving named substreams.
inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Derives an independent substream from (seed, label). Documented contract:
// substream(seed, label) = splitmix64-mixed (seed XOR fnv1a64(label)), so the
// same global seed yields uncorrelated module streams that never depend on
// call order.
inline Rng substream(uint64_t seed, std::string_view label) {
    Rng mixer(seed ^ fnv1a64(label));
    return Rng(mixer.next_u64());
}

// Indexed variant for per-sample / per-cell streams (schedule independence).
inline Rng substream(uint64_t seed, std::string_view label, uint64_t index) {
    Rng mixer(seed ^ fnv1a64(label));
    mixer.next_u64();
    Rng indexed(mixer.next_u64() ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    indexed.next_u64();
    return indexed;
}

} // namespace jfdl

#endif
