#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ros {

// splitmix64, used for seed derivation and stable hashing of seed tuples.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derive a single 64-bit seed from a list of components (seed, epoch, stream, ...).
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t s = 0x8f1bbcdcbfa53e0bull;
    for (std::uint64_t p : parts) {
        s ^= p + 0x9e3779b97f4a7c15ull + (s << 6) + (s >> 2);
        std::uint64_t t = s;
        s = splitmix64(t);
    }
    return s;
}

// PCG32: small, fast, reproducible across platforms. The standard library
// engines are portable too, but its distributions are not; everything that
// needs randomness goes through this class so results are bit-stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = 0u;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
        has_spare_ = false;
    }

    std::uint32_t next_u32() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    // uniform in [0, n)
    std::uint32_t next_below(std::uint32_t n) {
        // Lemire-style rejection to stay unbiased.
        std::uint64_t m = static_cast<std::uint64_t>(next_u32()) * n;
        std::uint32_t lo = static_cast<std::uint32_t>(m);
        if (lo < n) {
            std::uint32_t t = (0u - n) % n;
            while (lo < t) {
                m = static_cast<std::uint64_t>(next_u32()) * n;
                lo = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

    // uniform in [0, 1), 53-bit resolution
    double uniform() {
        std::uint64_t a = next_u32() >> 5;  // 27 bits
        std::uint64_t b = next_u32() >> 6;  // 26 bits
        return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) *
               (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; avoids std::normal_distribution for cross-run stability.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_below(static_cast<std::uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_ = 0;
    std::uint64_t inc_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ros
