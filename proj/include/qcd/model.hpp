#pragma once

#include <functional>
#include <optional>
#include <string>

#include "qcd/rng.hpp"

namespace qcd {

using RealFn = std::function<double(double)>;
using Sampler = std::function<double(Rng&)>;

/// Pre/post-change observation model for one sensor.
///
/// Densities are carried in log space; `llr` is evaluated directly and never
/// rebuilt from density ratios. A user-defined pair only needs to fill the
/// required fields; `quantile0` and `kl_closed_form` are optional accelerators.
struct DistributionPair {
    std::string name;
    RealFn log_f0;
    RealFn log_f1;
    RealFn cdf0;
    RealFn cdf1;
    Sampler sample0;
    Sampler sample1;
    RealFn llr;
    bool monotone_llr = false;
    bool llr_increasing = true;   // direction of llr when monotone_llr holds
    RealFn quantile0;             // optional inverse of cdf0
    std::optional<std::pair<double, double>> kl_closed_form;  // (I(f1||f0), I(f0||f1))

    double f0(double x) const;
    double f1(double x) const;

    // Inverse of cdf0; uses quantile0 when present, otherwise a bracketed root search.
    double pre_change_quantile(double p) const;
};

/// Throws InvalidArgument unless every required field of `pair` is set.
void validate(const DistributionPair& pair);

/// N(mu0, sigma^2) before the change, N(mu1, sigma^2) after.
DistributionPair gaussian_mean_shift(double mu0, double mu1, double sigma);

enum class KlMethod { closed_form, quadrature };

struct KlReport {
    double i_f1_f0 = 0.0;  // nats
    double i_f0_f1 = 0.0;
    KlMethod method = KlMethod::closed_form;
};

/// Both K-L divergences of `pair`. Rejects pairs whose divergences are not
/// strictly positive and finite; quadrature failures raise DivergenceInfinite.
KlReport kl_divergence(const DistributionPair& pair);

/// Adaptive Gauss-Kronrod integral of `fn` over [lo, hi] (infinite ends allowed),
/// absolute error bounded by `abs_tol` or DivergenceInfinite is thrown.
double integrate(const RealFn& fn, double lo, double hi, double abs_tol = 1e-8);

} // namespace qcd
