#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace qcd {

// Engine used by every sampler. Boost distributions are used on top of it
// because their output is specified bit-for-bit across platforms.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Independent stream for replication `index` of an experiment seeded with `seed`.
// Streams are a pure function of (seed, index); they never depend on thread layout.
Rng stream(std::uint64_t seed, std::uint64_t index);

// Sub-seed for a named phase of a larger computation (e.g. screen vs full runs).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

inline double standard_normal(Rng& rng) {
    boost::random::normal_distribution<double> dist;
    return dist(rng);
}

inline double uniform01(Rng& rng) {
    boost::random::uniform_01<double> dist;
    return dist(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    if (p >= 1.0) return true;
    if (p <= 0.0) return false;
    return uniform01(rng) < p;
}

// Worker count used by the Monte Carlo engine. Results never depend on it.
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs fn(i) for i in [0, n) on thread_count() workers. Each index runs exactly once;
// callers write to per-index slots so the reduction order stays fixed.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace qcd
