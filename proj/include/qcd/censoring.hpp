#pragma once

#include <limits>
#include <optional>
#include <string>

#include "qcd/model.hpp"

namespace qcd {

/// Send/no-send rule with a single no-send interval.
///
/// The interval is stored in likelihood-ratio space (as LLR bounds) and, when the
/// pair's LLR is monotone, in observation space too. An empty interval
/// (lo = +inf, hi = -inf) is the full-rate rule psi*(1).
struct CensoringStrategy {
    double rate = 1.0;  // pre-change send probability
    double nosend_llr_lo = kEmptyLo;
    double nosend_llr_hi = kEmptyHi;
    double nosend_x_lo = kEmptyLo;
    double nosend_x_hi = kEmptyHi;
    double llr_censored = 0.0;  // ln(p1_nosend / p0_nosend)
    double p0_nosend = 0.0;
    double p1_nosend = 0.0;
    double post_kl = 0.0;  // E_1 of the censored LLR

    bool x_space = true;  // decide in observation space
    RealFn llr;           // only consulted when !x_space

    static constexpr double kEmptyLo = std::numeric_limits<double>::infinity();
    static constexpr double kEmptyHi = -std::numeric_limits<double>::infinity();

    bool full_rate() const { return !(nosend_llr_lo <= nosend_llr_hi); }
};

/// psi*(1): sends everything.
CensoringStrategy full_rate_strategy(const DistributionPair& pair);

/// Strategy with no-send region [x_lo, x_hi] in observation space (monotone-LLR pairs only).
/// All probabilities and post_kl are evaluated for exactly this interval.
CensoringStrategy interval_strategy(const DistributionPair& pair, double x_lo, double x_hi);

/// Send decision gamma = psi(x).
inline bool apply(const CensoringStrategy& s, double x) {
    if (s.x_space) return !(x >= s.nosend_x_lo && x <= s.nosend_x_hi);
    const double l = s.llr(x);
    return !(l >= s.nosend_llr_lo && l <= s.nosend_llr_hi);
}

/// Censored LLR of the outcome: llr(x) when sent, llr_censored when not.
/// `x` must be present exactly when `sent` is true.
double censored_llr(const CensoringStrategy& s, const DistributionPair& pair, bool sent,
                    std::optional<double> x);

/// psi*(epsilon): the rate-epsilon single-interval rule maximizing post_kl.
/// Coarse 256-point grid over the lower endpoint followed by golden-section refinement;
/// ties within 1e-10 nats resolve to the smallest lower endpoint.
CensoringStrategy optimize(const DistributionPair& pair, double epsilon);

/// Post-censoring divergence of the interval [x_lo, x_hi] (quadrature, abs tol 1e-8).
double interval_post_kl(const DistributionPair& pair, double x_lo, double x_hi);

/// Send rate after the change, 1 - p1_nosend.
inline double post_change_rate(const CensoringStrategy& s) { return 1.0 - s.p1_nosend; }

/// Flat-record text form; fields in the order of strategy_record_header().
std::string strategy_record_header();
std::string to_record(const CensoringStrategy& s);
/// Parses to_record output. Records with NaN x-bounds need `llr` set before use.
CensoringStrategy from_record(const std::string& line);

} // namespace qcd
