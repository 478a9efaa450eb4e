#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "qcd/censoring.hpp"
#include "qcd/model.hpp"

namespace qcd {

// Observation models of the M sensors feeding one fusion center.
using Network = std::vector<DistributionPair>;

// One censored level: the statistic band below `threshold` uses rate `rate`.
struct Level {
    double threshold = 0.0;
    double rate = 1.0;
};

/// CuSum-AC parameters.
///
/// `levels` holds the censored levels in order a_1 > a_2 > ... with rates
/// eps_1 >= eps_2 >= ...; the band [a_1, a) always uses the full-rate rule.
/// `strategies[m][n]` is sensor m's rule for levels[n]. Active level 0 denotes
/// full rate and level n >= 1 denotes levels[n - 1].
struct CusumAcConfig {
    double a = 0.0;
    std::vector<Level> levels;
    std::vector<std::vector<CensoringStrategy>> strategies;

    std::size_t sensors() const { return strategies.size(); }
    double a1() const { return levels.empty() ? a : levels.front().threshold; }
};

/// Builds a config with psi*(rate) precomputed for every sensor and level.
CusumAcConfig make_cusum_ac(const Network& network, double a, std::vector<Level> levels);

/// Same, with per-sensor rates: rates[m][n] is sensor m's rate on level n.
/// levels[n].rate is set to the mean rate across sensors.
CusumAcConfig make_cusum_ac(const Network& network, double a, std::vector<double> thresholds,
                            const std::vector<std::vector<double>>& rates);

/// Two-level shorthand (a_1, eps_1).
CusumAcConfig make_cusum_ac(const Network& network, double a, double a1, double eps1);

/// Checks ordering of thresholds and rates, strategy shapes and strategy rates.
void validate(const CusumAcConfig& config);

/// Copy of `config` with a different stopping threshold (may be +inf).
CusumAcConfig with_threshold(CusumAcConfig config, double a);

/// Index of the level whose band contains statistic value s.
std::size_t level_for(const CusumAcConfig& config, double s);

struct DetectorState {
    double s = 0.0;
    std::size_t active_level = 0;
    bool stopped = false;
    std::uint64_t steps = 0;
    std::uint64_t stop_time = 0;
    std::uint64_t tx_count = 0;
    std::uint64_t feedback_count = 0;
    std::uint64_t up_crossings = 0;  // resets onto a level threshold
    std::uint64_t time_above_a1 = 0;
    std::uint64_t time_below_a1 = 0;
};

/// Fresh state with s = 0 and the matching active level.
DetectorState initial_state(const CusumAcConfig& config);

/// Plain CuSum update; stops when s > a. `sent_count` observations are charged to tx_count.
DetectorState cusum_step(const DetectorState& state, double llr_value, double a, std::uint64_t sent_count = 1);

/// Applies an already-fused censored increment to a CuSum-AC state: reflection at
/// zero, reset onto the highest level threshold crossed from below, stop on s >= a,
/// level recomputation and counters.
DetectorState cusum_ac_update(const DetectorState& state, const CusumAcConfig& config, double increment,
                              std::uint64_t sent_count);

/// Single-sensor CuSum-AC step on observation x.
std::pair<DetectorState, bool> cusum_ac_step(const DetectorState& state, const CusumAcConfig& config, double x,
                                             const DistributionPair& pair);

/// Fused step: every sensor censors with the active level's rule and the fusion
/// center adds the censored LLRs.
std::pair<DetectorState, std::vector<bool>> cusum_ac_multi_step(const DetectorState& state,
                                                                const CusumAcConfig& config,
                                                                std::span<const double> xs, const Network& pairs);

/// CuSum fed by a sensor that transmits with probability epsilon independently of x.
/// An unsent slot contributes a zero increment.
std::pair<DetectorState, bool> random_tx_cusum_step(const DetectorState& state, double x,
                                                    const DistributionPair& pair, double epsilon, double a,
                                                    Rng& rng);

struct TraceRecord {
    std::uint64_t k = 0;
    double s = 0.0;
    std::size_t level = 0;
    std::uint64_t sent = 0;  // sensors that transmitted at step k
    bool stopped = false;
};

void write_trace_csv(const std::vector<TraceRecord>& trace, const std::filesystem::path& path);

} // namespace qcd
