#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qcd/csv.hpp"
#include "qcd/montecarlo.hpp"
#include "qcd/renewal.hpp"

namespace qcd {

struct CalibrationTarget {
    double zeta = 1e4;       // ARLFA lower bound
    double epsilon = 1.0;    // pre-change rate budget
    std::uint64_t nu = 1;    // change slot used for delay
    double tolerance = 0.05; // relative ARLFA tolerance
};

struct ThresholdProbe {
    double a = 0.0;
    McEstimate arlfa;
};

struct ThresholdResult {
    double a = 0.0;
    McEstimate arlfa;  // estimate at the returned a
    std::vector<ThresholdProbe> trace;
};

struct ThresholdOptions {
    std::uint64_t n_reps = 2000;
    std::uint64_t cap = 0;  // 0 selects 100 * zeta
    double width = 1e-4;    // bisection stops once the bracket is this narrow
    int max_steps = 40;
};

/// Smallest threshold whose estimated ARLFA reaches zeta, for the detector family of
/// `spec` (its own threshold is ignored). Every probe reuses the same replications,
/// so the estimated ARLFA is monotone in a and bisection is exact on it. The search
/// starts at ln(zeta) and stays inside [ln(zeta)/4, 4 ln(zeta)].
ThresholdResult calibrate_threshold(const DetectorSpec& spec, const Network& network, double zeta,
                                    std::uint64_t seed, const ThresholdOptions& options = {});

struct Candidate {
    double a1 = 0.0;
    double eps1 = 0.0;
    double a = 0.0;
    McEstimate screen_rate;
    McEstimate arlfa;
    McEstimate rate;
    McEstimate delay;
    EPrimeCheck eprime;
    bool screened_out = false;
    bool evaluated = false;
    bool admissible = false;
};

struct CalibrationResult {
    CusumAcConfig config;
    PerfReport report;
    Verdict eprime_verdict = Verdict::indeterminate;
    bool feasible = false;
    Candidate chosen;
    std::vector<Candidate> search_trace;
};

struct SearchOptions {
    std::uint64_t n_reps = 2000;        // ARLFA calibration and delay replications
    std::uint64_t rate_reps = 100;      // full-phase rate replications; the screen uses a tenth
    std::uint64_t horizon = 10'000;
    std::uint64_t cycle_reps = 2000;    // renewal replications for the E' verdict
    RateMode rate_mode = RateMode::no_stop;
    bool require_eprime = false;        // reject candidates that are not E' members
    bool frontier_only = false;         // per a_1, stop at the largest admissible eps_1
    std::uint64_t seed = 0;
};

/// Brute-force search over (a_1, eps_1): calibrate a to the ARLFA target, measure rate
/// and delay, keep candidates meeting both constraints and return the fastest.
CalibrationResult search_two_level(const Network& network, const CalibrationTarget& target,
                                   const std::vector<double>& a1_grid, const std::vector<double>& eps1_grid,
                                   const SearchOptions& options);

std::vector<double> default_a1_grid();
std::vector<double> default_eps1_grid();

CsvTable search_trace_table(const CalibrationResult& result);
void write_search_trace(const CalibrationResult& result, const std::filesystem::path& path);

} // namespace qcd
