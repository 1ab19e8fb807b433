#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace elgen {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic random stream. Distributions are generated explicitly
// (not via std::*_distribution) so sequences are stable across standard
// library implementations; golden tests rely on that.
class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : eng_(seed) {}

    // Derive an independent substream from a seed and a path of indices.
    static RandomStream sub(uint64_t seed, std::initializer_list<uint64_t> path) {
        uint64_t s = splitmix64(seed);
        for (uint64_t p : path) s = splitmix64(s ^ (p + 0x632be59bd9b4e019ULL));
        return RandomStream(s);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(uniform() * static_cast<double>(n)) % n;
    }

    // Standard normal via Box-Muller; spare value cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0x1.0p-60) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    uint64_t bits() { return eng_(); }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace elgen
