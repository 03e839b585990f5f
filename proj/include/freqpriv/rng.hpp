#pragma once

#include <cstdint>
#include <random>

namespace freqpriv {

// splitmix64 step, used to derive independent per-item seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0x632be59bd9b4e019ULL * (index + 1));
    return splitmix64(s);
}

// Deterministic RNG. The engine (mt19937_64) has a standard-mandated sequence;
// all distribution transforms are implemented here explicitly because the
// std::*_distribution classes are not bit-reproducible across libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(engine_() % span);
    }

    // Approximate standard normal via Irwin-Hall (sum of 12 uniforms minus 6).
    // Chosen over Box-Muller so the value depends on the engine stream through
    // arithmetic only (no libm transcendentals in the sample path).
    double normal() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += uniform();
        return s - 6.0;
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Truncated Poisson (Knuth multiplication method), capped at max_value.
    int poisson(double mean, int max_value) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        while (k < max_value) {
            p *= uniform();
            if (p <= limit) break;
            ++k;
        }
        return k;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace freqpriv
