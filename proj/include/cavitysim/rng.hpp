// Seeded random number generation with platform-independent draws.
// All distributions are implemented on top of raw 64-bit outputs so that a
// given seed produces bit-identical streams on any conforming compiler.
#pragma once

#include <cmath>
#include <cstdint>

namespace cavitysim {

// splitmix64; also used to derive independent per-trace seeds from a master
// seed (seed_i = splitmix(master + GOLDEN * (i+1))).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master + 0x9E3779B97F4A7C15ULL * (index + 1));
}

// xoshiro256** by Blackman & Vigna (public domain reference implementation).
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) {
            sm = splitmix64(sm + 0x9E3779B97F4A7C15ULL);
            word = sm;
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Exponential waiting time with the given rate (mean 1/rate).
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    // Exact Poisson sample via Knuth's product method. Means above 30 are
    // split into chunks (Poisson additivity) to keep exp(-mean) away from
    // underflow; cost is O(mean) uniforms.
    std::uint64_t poisson(double mean) {
        std::uint64_t total = 0;
        while (mean > 30.0) {
            total += poisson_small(30.0);
            mean -= 30.0;
        }
        return total + poisson_small(mean);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t poisson_small(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        std::uint64_t n = 0;
        double prod = uniform();
        while (prod > limit) {
            ++n;
            prod *= uniform();
        }
        return n;
    }

    std::uint64_t s_[4];
};

}  // namespace cavitysim
