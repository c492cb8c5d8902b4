#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fluidnet {

// splitmix64; used to decorrelate (master seed, run index) pairs into
// mt19937_64 seeds so that substreams are reproducible regardless of
// scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-run random stream. All samplers below are written out explicitly
// (instead of std::*_distribution) so that results are bit-identical across
// standard library implementations.
class RunRng {
  public:
    RunRng(std::uint64_t master_seed, std::uint64_t stream_index)
        : engine_(splitmix64(splitmix64(master_seed) ^ (0x2545f4914f6cdd1dULL * (stream_index + 1)))) {}

    explicit RunRng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    // Uniform on [0, 1).
    double uniform() {
        // 53 random bits.
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform_pos() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Exact Poisson sampling by inversion; large means are split so the
    // inversion loop stays short and free of underflow.
    std::uint64_t poisson(double mean) {
        std::uint64_t total = 0;
        while (mean > 60.0) {
            total += poisson_small(mean / 2.0);
            mean /= 2.0;
        }
        return total + poisson_small(mean);
    }

  private:
    std::uint64_t poisson_small(double mean) {
        if (mean <= 0.0) return 0;
        double p = std::exp(-mean);
        double cdf = p;
        const double u = uniform();
        std::uint64_t k = 0;
        while (u > cdf && k < 10000) {
            ++k;
            p *= mean / static_cast<double>(k);
            cdf += p;
        }
        return k;
    }

    std::mt19937_64 engine_;
};

}  // namespace fluidnet
