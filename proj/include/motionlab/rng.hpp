#pragma once

#include <cmath>
#include <cstdint>

namespace motionlab {

// Deterministic xoshiro256++ generator seeded through splitmix64.
// Every random draw in the project flows through this type so that a
// (config, seed) pair fixes the entire run; the C library RNG and
// std::random devices are never used.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
    }

    // Derives a decorrelated seed for a named substream.
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        splitmix64(x);
        return splitmix64(x);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n must be positive.
    int64_t uniform_int(int64_t n) {
        // Rejection sampling keeps the distribution exact for any n.
        const uint64_t un = uint64_t(n);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return int64_t(v % un);
    }

    // Standard normal via Box-Muller; draws come in pairs and the spare
    // is cached so fill order is a pure function of the call sequence.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <class S>
    void fill_normal(S* dst, int64_t n, double stddev = 1.0) {
        for (int64_t i = 0; i < n; ++i) dst[i] = S(normal() * stddev);
    }

    template <class S>
    void fill_uniform(S* dst, int64_t n, double lo, double hi) {
        for (int64_t i = 0; i < n; ++i) dst[i] = S(uniform(lo, hi));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace motionlab
