#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qcd/detectors.hpp"

namespace qcd {

/// Monte Carlo point estimate with its provenance.
struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // sample standard deviation / sqrt(n_reps)
    std::uint64_t n_reps = 0;
    std::uint64_t seed = 0;
    std::uint64_t truncated_reps = 0;
};

McEstimate summarize(std::span<const double> values, std::uint64_t seed, std::uint64_t truncated = 0);

// Number of standard errors separating a and b (positive when a > b).
double z_score(const McEstimate& a, const McEstimate& b);

struct CusumDetector {
    double a = 0.0;
};

struct CusumAcDetector {
    CusumAcConfig config;
};

struct RandomTxDetector {
    double a = 0.0;
    double epsilon = 1.0;
};

using DetectorSpec = std::variant<CusumDetector, CusumAcDetector, RandomTxDetector>;

double threshold_of(const DetectorSpec& spec);
DetectorSpec with_threshold(const DetectorSpec& spec, double a);
std::string detector_name(const DetectorSpec& spec);
void validate(const DetectorSpec& spec, const Network& network);

inline constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

struct PathOptions {
    std::uint64_t nu = kNever;       // first post-change slot; kNever keeps every slot pre-change
    std::uint64_t max_steps = kNever;
    bool stopping = true;            // false treats the threshold as +inf
};

struct PathResult {
    DetectorState state;
    bool truncated = false;  // hit max_steps before stopping
};

using TraceSink = std::function<void(const TraceRecord&)>;

/// Runs one trajectory. For each slot k, sensor m's observation is drawn from
/// `rng` in sensor order before any detector randomness.
PathResult simulate_path(const DetectorSpec& spec, const Network& network, Rng& rng, const PathOptions& options,
                         const TraceSink& trace = {});

/// Pre-change diagnostics collected alongside the ARLFA.
struct PreChangeReport {
    McEstimate arlfa;
    McEstimate feedback_ratio;      // feedback_count / stop_time
    McEstimate feedback_per_alarm;  // level switches per alarm, counting the restart switch
    McEstimate up_crossings;        // resets onto a_1 per alarm
    McEstimate frac_time_above_a1;
};

/// E_inf[T]: n_reps pre-change trajectories run to the alarm or `cap` (truncated
/// runs count as `cap` and are reported in truncated_reps).
McEstimate estimate_arlfa(const DetectorSpec& spec, const Network& network, std::uint64_t n_reps,
                          std::uint64_t cap, std::uint64_t seed);

PreChangeReport estimate_prechange(const DetectorSpec& spec, const Network& network, std::uint64_t n_reps,
                                   std::uint64_t cap, std::uint64_t seed);

/// Mean of (T - nu + 1)^+ with the change at slot nu.
McEstimate estimate_delay(const DetectorSpec& spec, const Network& network, std::uint64_t n_reps,
                          std::uint64_t seed, std::uint64_t nu = 1, std::uint64_t cap = 10'000'000);

/// Lorden's worst case at change slot nu: only trajectories whose statistic sits at 0
/// just before nu are kept (attempts in index order until n_reps are accepted), and
/// the mean post-change run length is returned.
McEstimate estimate_worst_case_delay(const DetectorSpec& spec, const Network& network, std::uint64_t n_reps,
                                     std::uint64_t seed, std::uint64_t nu, std::uint64_t cap = 10'000'000);

enum class RateMode { no_stop, conditional };

/// Pre-change send fraction per sensor-slot over `horizon` slots.
McEstimate estimate_comm_rate(const DetectorSpec& spec, const Network& network, std::uint64_t horizon,
                              std::uint64_t n_reps, std::uint64_t seed, RateMode mode = RateMode::no_stop);

struct PerfReport {
    McEstimate arlfa;
    McEstimate delay;
    McEstimate comm_rate;
    McEstimate feedback_ratio;
    McEstimate frac_time_above_a1;
};

struct EvalOptions {
    std::uint64_t n_reps = 2000;
    std::uint64_t cap = 1'000'000;
    std::uint64_t horizon = 10'000;
    std::uint64_t rate_reps = 100;
    std::uint64_t nu = 1;
    std::uint64_t seed = 0;
};

PerfReport evaluate(const DetectorSpec& spec, const Network& network, const EvalOptions& options);

/// Pre-change stopping times for every threshold at once.
///
/// The statistic path never depends on the stopping threshold, so each replication is
/// simulated once with stopping disabled while the record maxima are kept. at(a)
/// extends paths only as far as needed and returns exactly what estimate_arlfa would
/// for the same seed. Used by threshold calibration.
class ArlCurve {
public:
    ArlCurve(DetectorSpec spec, Network network, std::uint64_t n_reps, std::uint64_t cap, std::uint64_t seed);

    McEstimate at(double a);

private:
    struct Path {
        Rng rng;
        DetectorState state;
        std::vector<std::pair<double, std::uint64_t>> records;  // (new running max, slot)
        bool capped = false;
    };

    std::optional<std::uint64_t> stop_time(Path& path, double a);

    DetectorSpec spec_;
    Network network_;
    std::uint64_t cap_;
    std::uint64_t seed_;
    bool strict_;
    std::vector<Path> paths_;
};

} // namespace qcd
