#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace dudospect {

// Deterministic, platform-independent RNG. std:: distributions are
// implementation-defined, so every stochastic component in the pipeline
// draws through this engine instead.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        // rejection sampling keeps the distribution exact
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Box-Muller, one value per call (the pair's second half is cached).
    double next_normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    // Exact Poisson sampling. Knuth's product method, chunked so that
    // exp(-lambda) never underflows for large means.
    uint64_t next_poisson(double lambda) {
        uint64_t total = 0;
        while (lambda > 500.0) {
            total += poisson_knuth(500.0);
            lambda -= 500.0;
        }
        return total + poisson_knuth(lambda);
    }

    // Exact Binomial(n, p) by counting Bernoulli successes.
    uint64_t next_binomial(uint64_t n, double p) {
        if (p <= 0.0) return 0;
        if (p >= 1.0) return n;
        uint64_t k = 0;
        for (uint64_t i = 0; i < n; ++i)
            if (next_double() < p) ++k;
        return k;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t poisson_knuth(double lambda) {
        if (lambda <= 0.0) return 0;
        const double limit = std::exp(-lambda);
        uint64_t k = 0;
        double prod = next_double();
        while (prod > limit) {
            ++k;
            prod *= next_double();
        }
        return k;
    }

    uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

inline uint64_t hash_combine(uint64_t seed, uint64_t v) {
    // splitmix64 finalizer over the xor, good avalanche for seed trees
    uint64_t z = seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t hash_string(std::string_view s) {
    // FNV-1a
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stable seed derivation: one master seed, independent streams per tag.
inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t index = 0) {
    return hash_combine(hash_combine(master, hash_string(tag)), index);
}

}  // namespace dudospect
