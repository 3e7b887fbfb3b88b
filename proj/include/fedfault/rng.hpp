#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace fedfault {

// splitmix64 finalizer; used to turn (root, label, index) into substream seeds.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// FNV-1a over the label bytes.
inline uint64_t hash_label(std::string_view label) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seed of the named substream. Pure function of (root, label, index), so the
// same triple always denotes the same stream, and streams with different
// labels or indices are decorrelated.
inline uint64_t derive_seed(uint64_t root, std::string_view label, uint64_t index = 0) {
    return mix64(mix64(root ^ hash_label(label)) + index);
}

// Deterministic random stream. Every draw is defined on top of the raw 64-bit
// output of mt19937_64, which the standard specifies exactly, so sequences
// reproduce across builds. No std::*_distribution is used anywhere (their
// output is implementation-defined).
class rng_stream {
public:
    explicit rng_stream(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1), 53-bit resolution
    double next_uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller; consumes exactly two draws per call
    double next_gaussian() {
        double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    bool next_bernoulli(double p) { return next_uniform() < p; }

    // uniform integer in [0, n); rejection keeps it unbiased
    uint64_t next_index(uint64_t n) {
        if (n == 0) throw std::invalid_argument("next_index: empty range");
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

inline rng_stream substream(uint64_t root, std::string_view label, uint64_t index = 0) {
    return rng_stream(derive_seed(root, label, index));
}

}  // namespace fedfault
