#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace ruletensor {

/// Deterministic random source. Wraps mt19937_64 but hand-rolls the
/// distributions so that streams are reproducible across standard library
/// implementations, not just across runs.
///
/// All randomness in a run flows from one 64-bit seed through named
/// sub-streams (e.g. "init", "variation"), so enabling or disabling one
/// consumer cannot shift the draws seen by another.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    static uint64_t substream_seed(uint64_t base_seed, std::string_view name) {
        return splitmix64(base_seed ^ fnv1a64(name));
    }

    static Rng substream(uint64_t base_seed, std::string_view name) {
        return Rng(substream_seed(base_seed, name));
    }

    uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    uint64_t below(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    int index(int n) { return static_cast<int>(below(static_cast<uint64_t>(n))); }

    /// Uniform integer in [lo, hi] inclusive.
    int range(int lo, int hi) { return lo + index(hi - lo + 1); }

    bool chance(double p) { return uniform01() < p; }

    /// Random +1/-1.
    double sign() { return (engine_() & 1) ? 1.0 : -1.0; }

    /// Standard normal via Box-Muller (single value per call).
    double gaussian() {
        double u1 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

private:
    static uint64_t splitmix64(uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static uint64_t fnv1a64(std::string_view s) {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    std::mt19937_64 engine_;
};

}  // namespace ruletensor
