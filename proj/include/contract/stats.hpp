#pragma once

// Monte-Carlo plumbing shared by the simulators: counter-based per-path
// seeding and order-independent reductions.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace contract {

struct MCEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

// splitmix64 finalizer; mixes (seed, counter) into an independent stream
// seed so path i's draws do not depend on how many paths ran before it.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (counter + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_path_rng(std::uint64_t seed, std::uint64_t path_index) {
    return std::mt19937_64(mix_seed(seed, path_index));
}

// Pairwise (tree) summation: deterministic and independent of accumulation
// order, and with far smaller rounding drift than a running sum.
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 8) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline MCEstimate estimate_from_samples(std::span<const double> samples, std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("empty sample");
    const double n = static_cast<double>(samples.size());
    const double mean = pairwise_sum(samples) / n;
    std::vector<double> sq(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double d = samples[i] - mean;
        sq[i] = d * d;
    }
    const double var = samples.size() > 1 ? pairwise_sum(sq) / (n - 1.0) : 0.0;
    return MCEstimate{mean, std::sqrt(var / n), samples.size(), seed};
}

} // namespace contract
