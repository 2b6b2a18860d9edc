#pragma once

#include <cmath>
#include <cstdint>

namespace zcool {

// Deterministic, platform-independent RNG. Every stochastic result in the
// toolkit is derived from one master seed through derive_seed(), so reruns
// (and any thread count) reproduce outputs bit for bit.
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Seed for an independent stream (trajectory, sweep point, shot block).
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
    uint64_t s = master ^ (0x9E3779B97F4A7C15ull * (stream + 1));
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0x853C49E6748FEA9Bull) {
        uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    uint64_t next_u64() {
        // xoshiro256**
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    double normal(double mean = 0.0, double sigma = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sigma * spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(6.28318530717958647692 * u2);
        have_spare_ = true;
        return mean + sigma * r * std::cos(6.28318530717958647692 * u2);
    }

    // Sample a thermal (geometric) Fock occupation with mean nbar.
    int thermal_fock(double nbar) {
        if (nbar <= 0.0) return 0;
        const double q = nbar / (nbar + 1.0);
        const double u = uniform();
        return static_cast<int>(std::floor(std::log1p(-u) / std::log(q)));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace zcool
