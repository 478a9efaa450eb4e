#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qcd/calibration.hpp"
#include "qcd/csv.hpp"

namespace qcd {

enum class ExperimentKind { trace, arlfa, delay, rate, delay_vs_arlfa, delay_vs_rate, calibrate };
enum class DetectorKind { cusum, cusum_ac, random_tx };
enum class DelayMode { average, worst_case };

/// One named experiment. Every field has a default except kind; the run-level seed
/// is combined with the name to give each experiment its own random streams.
struct ExperimentSpec {
    std::string name;
    ExperimentKind kind = ExperimentKind::trace;

    double mu0 = 0.0;
    double mu1 = 0.5;
    double sigma = 1.0;
    std::uint64_t sensors = 1;

    DetectorKind detector = DetectorKind::cusum;
    double a = 4.5;
    std::vector<double> thresholds{0.79};  // censoring switch thresholds, descending
    std::vector<double> rates{0.27};       // censoring rate per switch threshold
    double epsilon = 1.0;                  // rate budget; also the random transmission probability

    double zeta = 1e4;
    double tolerance = 0.05;
    std::vector<double> zeta_grid{2e3, 5e3, 1e4};
    std::vector<double> epsilon_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<double> a1_grid{0.5, 1.0, 1.5, 2.0, 3.0};
    std::vector<double> eps1_fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

    std::uint64_t n_reps = 2000;
    std::uint64_t search_reps = 500;
    std::uint64_t rate_reps = 100;
    std::uint64_t cycle_reps = 2000;
    std::uint64_t horizon = 10'000;
    std::uint64_t cap = 0;  // 0 selects 100 * zeta
    std::uint64_t nu = 1;
    RateMode rate_mode = RateMode::no_stop;
    DelayMode delay_mode = DelayMode::average;
    bool frontier_only = true;
    bool require_eprime = false;
    bool include_cusum = true;
};

struct RunConfig {
    std::optional<std::uint64_t> seed;
    std::vector<ExperimentSpec> experiments;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

/// Checks every field against the preconditions of the modules it feeds.
void validate(const ExperimentSpec& spec);

/// Resolved INI text for one experiment section (all keys, defaults included).
std::string to_ini(const ExperimentSpec& spec);
std::string to_ini(const RunConfig& config);

/// FNV-1a 64-bit hash of the resolved section text, as 16 hex digits.
std::string config_hash(const ExperimentSpec& spec);

std::uint64_t experiment_seed(std::uint64_t run_seed, const std::string& name);

Network make_network(const ExperimentSpec& spec);
DetectorSpec make_detector(const ExperimentSpec& spec, const Network& network);

/// Output tables of one experiment keyed by file stem.
using TableSet = std::vector<std::pair<std::string, CsvTable>>;

TableSet run_experiment(const ExperimentSpec& spec, std::uint64_t run_seed);

/// Runs every experiment and writes `<stem>.csv` files plus manifest.ini into out_dir.
/// Returns the written paths; an empty experiment list writes nothing.
std::vector<std::filesystem::path> run(const RunConfig& config, const std::filesystem::path& out_dir);

/// Pre-baked specs: fig4 (rate 0.7), fig5 (rate 0.4), fig6 (delay vs rate).
RunConfig reproduce_config(const std::string& figure, std::uint64_t seed, std::uint64_t n_reps = 2000);

const char* to_string(ExperimentKind kind);
const char* to_string(DetectorKind kind);

} // namespace qcd
