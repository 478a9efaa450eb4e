#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qcd/montecarlo.hpp"

namespace qcd {

/// Pre-change renewal-cycle statistics of a two-level CuSum-AC.
///
/// One cycle starts at the reset value a_1: the statistic follows raw LLRs until it
/// leaves [a_1, a) (eta(0) slots); on falling below a_1 it re-enters at s_hat and the
/// censored recursion takes phi(s_hat) slots to climb back to a_1.
struct CycleStats {
    double a1 = 0.0;
    double a = 0.0;     // +inf allowed
    double eps1 = 1.0;  // mean censored-level rate across sensors

    McEstimate mean_eta0;               // E[eta(0)]
    McEstimate p_return;                // P{s_hat < a_1}
    McEstimate mean_eta0_given_return;  // E[eta(0) | s_hat < a_1]
    McEstimate mean_phi_given_return;   // E[phi(s_hat) | s_hat < a_1]
    McEstimate mean_sends_given_return; // E[transmissions during phi | s_hat < a_1], per sensor
    McEstimate mean_cycle;              // E[eta(0) + phi(s_hat) 1{s_hat < a_1}]
    McEstimate mean_T_a1;               // plain CuSum ARLFA at threshold a_1
    std::vector<double> return_value_samples;
    std::uint64_t truncated = 0;        // walks that hit the 1e7-slot cap
};

inline constexpr std::uint64_t kWalkCap = 10'000'000;

/// Requires a two-level config (exactly one censored level); config.a may be +inf.
CycleStats estimate_cycle(const CusumAcConfig& config, const Network& network, std::uint64_t n_reps,
                          std::uint64_t seed);

CycleStats estimate_cycle(const Network& network, double a1, double a, double eps1, std::uint64_t n_reps,
                          std::uint64_t seed);

/// Cycles measured by running the CuSum-AC detector itself from s = a_1 until its
/// next reset onto a_1 or its alarm.
struct DirectCycleStats {
    McEstimate cycle;
    McEstimate p_return;
};

DirectCycleStats simulate_cycles(const CusumAcConfig& config, const Network& network, std::uint64_t n_reps,
                                 std::uint64_t seed);

enum class Verdict { member, rejected, indeterminate };

struct EPrimeCheck {
    bool member = false;
    double margin = 0.0;  // (E[phi | return] - E[T(a_1)]) in combined standard errors
    Verdict verdict = Verdict::indeterminate;
};

/// E' membership: E[phi(s_hat) | return] >= E[T(a_1)], decided at a +/-3 standard error band.
EPrimeCheck check_eprime_membership(const CycleStats& stats);

const char* to_string(Verdict v);

/// Alternating-renewal upper bound on the pre-change send rate, built from the
/// return-conditioned eta mean.
double rate_upper_bound(const CycleStats& stats, double eps1);

/// Same bound with a delta-method standard error.
McEstimate rate_upper_bound_estimate(const CycleStats& stats, double eps1);

/// Diagnostic variant using the unconditional E[eta(0)].
double rate_upper_bound_unconditional(const CycleStats& stats, double eps1);

/// Expected feedback messages per alarm, 2 / (1 - p_return). +inf when p_return
/// is indistinguishable from 1.
double feedback_expectation(const CycleStats& stats);
McEstimate feedback_expectation_estimate(const CycleStats& stats);

std::string cycle_stats_header();
std::string cycle_stats_row(const CycleStats& stats);

} // namespace qcd
