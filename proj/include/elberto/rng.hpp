#pragma once

#include <cassert>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace elberto {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Stable seed derivation for per-example / per-epoch / per-step streams.
// Independent of platform and of call ordering elsewhere in the program.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = splitmix64(base);
    h = fnv1a64(tag, h);
    h = splitmix64(h ^ splitmix64(a + 0x632be59bd9b4e019ull));
    h = splitmix64(h ^ splitmix64(b + 0x9e6c63d0876a9ddull));
    return h;
}

// Deterministic random stream. The engine is std::mt19937_64; every mapping
// from raw 64-bit draws to ints/doubles/normals is written out here so the
// stream does not depend on libstdc++ distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // [0, 1) with 53 random bits
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool coin() { return (next_u64() >> 63) != 0; }

    // uniform in [0, n), unbiased via masked rejection
    int next_int(int n) {
        assert(n > 0);
        const uint64_t range = static_cast<uint64_t>(n);
        uint64_t mask = range - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        for (;;) {
            const uint64_t x = next_u64() & mask;
            if (x < range) return static_cast<int>(x);
        }
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Box-Muller with cached spare
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + spare_ * stddev;
        }
        const double u = 1.0 - next_double();
        const double theta = 6.283185307179586 * next_double();
        const double r = std::sqrt(-2.0 * std::log(u));
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + r * std::cos(theta) * stddev;
    }

    // normal(0, stddev) clipped by rejection to |z| <= clip * stddev
    double truncated_normal(double stddev, double clip = 2.0) {
        for (;;) {
            const double z = normal(0.0, 1.0);
            if (std::abs(z) <= clip) return z * stddev;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<size_t>(next_int(static_cast<int>(i)))]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace elberto
