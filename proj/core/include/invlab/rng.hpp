#pragma once

#include <cmath>
#include <cstdint>

namespace invlab {

// Deterministic, platform-independent random numbers.
//
// Randomized stages (bootstrap resampling, k-means seeding, synthetic data)
// must produce byte-identical results for a given seed regardless of compiler,
// standard library, or worker-thread count.  <random> distributions are
// implementation-defined, so we generate from a fixed splitmix64 stream and
// derive per-task streams with counter-based seeding: stream(seed, counter)
// depends only on its arguments, never on how work was scheduled.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Sub-stream `index` of a root seed; used for per-replicate / per-restart
    // streams so that parallel order cannot matter.
    Rng(std::uint64_t seed, std::uint64_t index)
        : state_(seed ^ (0x9e3779b97f4a7c15ULL + index * 0xd1b54a32d192ed03ULL)) {
        next();  // decorrelate nearby indices
    }

    std::uint64_t next() { return splitmix64_next(state_); }

    // Uniform integer in [0, n).  Fixed-point multiply keeps results
    // platform-independent (no std::uniform_int_distribution).
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    // Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (deterministic across platforms).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace invlab
