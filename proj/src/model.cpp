#include "qcd/model.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "qcd/error.hpp"

namespace qcd {

double DistributionPair::f0(double x) const { return std::exp(log_f0(x)); }

double DistributionPair::f1(double x) const { return std::exp(log_f1(x)); }

double DistributionPair::pre_change_quantile(double p) const {
    require(p > 0.0 && p < 1.0, "quantile probability must lie in (0,1)");
    if (quantile0) return quantile0(p);

    double lo = -1.0;
    double hi = 1.0;
    for (int i = 0; i < 200 && cdf0(lo) > p; ++i) lo *= 2.0;
    for (int i = 0; i < 200 && cdf0(hi) < p; ++i) hi *= 2.0;
    if (cdf0(lo) > p || cdf0(hi) < p) throw SearchFailure("cannot bracket pre-change quantile");

    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12 * (1.0 + std::abs(a)); };
    auto [a, b] = boost::math::tools::toms748_solve(
        [&](double x) { return cdf0(x) - p; }, lo, hi, tol, iters);
    return 0.5 * (a + b);
}

void validate(const DistributionPair& pair) {
    require(pair.log_f0 && pair.log_f1, "distribution pair needs both log densities");
    require(pair.cdf0 && pair.cdf1, "distribution pair needs both CDFs");
    require(pair.sample0 && pair.sample1, "distribution pair needs both samplers");
    require(static_cast<bool>(pair.llr), "distribution pair needs an llr function");
}

DistributionPair gaussian_mean_shift(double mu0, double mu1, double sigma) {
    require(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
    require(std::isfinite(mu0) && std::isfinite(mu1), "means must be finite");
    require(mu0 != mu1, "mu0 == mu1 gives zero K-L divergence");

    const double var = sigma * sigma;
    const double log_norm = -std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
    const double slope = (mu1 - mu0) / var;
    const double offset = (mu1 * mu1 - mu0 * mu0) / (2.0 * var);
    const boost::math::normal_distribution<double> d0(mu0, sigma);
    const boost::math::normal_distribution<double> d1(mu1, sigma);

    DistributionPair p;
    p.name = "gaussian_mean_shift";
    p.log_f0 = [=](double x) { return log_norm - (x - mu0) * (x - mu0) / (2.0 * var); };
    p.log_f1 = [=](double x) { return log_norm - (x - mu1) * (x - mu1) / (2.0 * var); };
    p.cdf0 = [=](double x) {
        if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
        return boost::math::cdf(d0, x);
    };
    p.cdf1 = [=](double x) {
        if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
        return boost::math::cdf(d1, x);
    };
    p.sample0 = [=](Rng& rng) { return mu0 + sigma * standard_normal(rng); };
    p.sample1 = [=](Rng& rng) { return mu1 + sigma * standard_normal(rng); };
    p.llr = [=](double x) { return slope * x - offset; };
    p.monotone_llr = true;
    p.llr_increasing = slope > 0.0;
    p.quantile0 = [=](double q) { return boost::math::quantile(d0, q); };
    const double kl = (mu1 - mu0) * (mu1 - mu0) / (2.0 * var);
    p.kl_closed_form = std::make_pair(kl, kl);
    return p;
}

double integrate(const RealFn& fn, double lo, double hi, double abs_tol) {
    if (lo == hi) return 0.0;
    double error = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        fn, lo, hi, 20, 1e-12, &error, &l1);
    if (!std::isfinite(value) || !(error <= abs_tol)) {
        throw DivergenceInfinite("adaptive quadrature did not converge to the requested tolerance");
    }
    return value;
}

KlReport kl_divergence(const DistributionPair& pair) {
    validate(pair);
    KlReport report;
    if (pair.kl_closed_form) {
        report.i_f1_f0 = pair.kl_closed_form->first;
        report.i_f0_f1 = pair.kl_closed_form->second;
        report.method = KlMethod::closed_form;
    } else {
        constexpr double inf = std::numeric_limits<double>::infinity();
        auto term = [](double logp, double logq) {
            const double p = std::exp(logp);
            return p > 0.0 ? p * (logp - logq) : 0.0;
        };
        report.i_f1_f0 = integrate([&](double x) { return term(pair.log_f1(x), pair.log_f0(x)); }, -inf, inf);
        report.i_f0_f1 = integrate([&](double x) { return term(pair.log_f0(x), pair.log_f1(x)); }, -inf, inf);
        report.method = KlMethod::quadrature;
    }
    if (!std::isfinite(report.i_f1_f0) || !std::isfinite(report.i_f0_f1)) {
        throw DivergenceInfinite("K-L divergence is not finite");
    }
    if (report.i_f1_f0 <= 1e-12 || report.i_f0_f1 <= 1e-12) {
        throw InvalidArgument("pre- and post-change distributions coincide (zero K-L divergence)");
    }
    return report;
}

} // namespace qcd
