#include "qcd/censoring.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "qcd/csv.hpp"
#include "qcd/error.hpp"

namespace qcd {

namespace {

constexpr double kTailMass = 1e-6;
constexpr int kGridPoints = 256;
constexpr double kTieTolerance = 1e-10;

double kl_f1_f0(const DistributionPair& pair) { return kl_divergence(pair).i_f1_f0; }

// post_kl of [lo, hi] given precomputed divergence and no-send probabilities.
double post_kl_from(const DistributionPair& pair, double kl, double lo, double hi, double p0, double p1) {
    const double inside = integrate([&](double x) { return pair.f1(x) * pair.llr(x); }, lo, hi);
    const double censored = (p1 > 0.0) ? p1 * std::log(p1 / p0) : 0.0;
    return kl - inside + censored;
}

} // namespace

CensoringStrategy full_rate_strategy(const DistributionPair& pair) {
    CensoringStrategy s;
    s.rate = 1.0;
    s.post_kl = kl_f1_f0(pair);
    s.x_space = pair.monotone_llr;
    s.llr = pair.llr;
    if (!pair.monotone_llr) {
        s.nosend_x_lo = std::numeric_limits<double>::quiet_NaN();
        s.nosend_x_hi = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
}

double interval_post_kl(const DistributionPair& pair, double x_lo, double x_hi) {
    require(x_lo <= x_hi, "no-send interval must satisfy lo <= hi");
    const double p0 = pair.cdf0(x_hi) - pair.cdf0(x_lo);
    const double p1 = pair.cdf1(x_hi) - pair.cdf1(x_lo);
    require(p0 > 0.0, "no-send interval has zero pre-change mass");
    return post_kl_from(pair, kl_f1_f0(pair), x_lo, x_hi, p0, p1);
}

CensoringStrategy interval_strategy(const DistributionPair& pair, double x_lo, double x_hi) {
    validate(pair);
    require(pair.monotone_llr, "observation-space intervals need a monotone LLR");
    require(x_lo <= x_hi, "no-send interval must satisfy lo <= hi");
    CensoringStrategy s;
    s.nosend_x_lo = x_lo;
    s.nosend_x_hi = x_hi;
    s.p0_nosend = pair.cdf0(x_hi) - pair.cdf0(x_lo);
    s.p1_nosend = pair.cdf1(x_hi) - pair.cdf1(x_lo);
    require(s.p0_nosend > 0.0 && s.p0_nosend < 1.0, "no-send probability must lie in (0,1)");
    s.rate = 1.0 - s.p0_nosend;
    const double la = pair.llr(x_lo);
    const double lb = pair.llr(x_hi);
    s.nosend_llr_lo = pair.llr_increasing ? la : lb;
    s.nosend_llr_hi = pair.llr_increasing ? lb : la;
    s.llr_censored = std::log(s.p1_nosend / s.p0_nosend);
    s.post_kl = post_kl_from(pair, kl_f1_f0(pair), x_lo, x_hi, s.p0_nosend, s.p1_nosend);
    s.x_space = true;
    s.llr = pair.llr;
    return s;
}

double censored_llr(const CensoringStrategy& s, const DistributionPair& pair, bool sent,
                    std::optional<double> x) {
    if (sent) {
        require(x.has_value(), "a sent observation must carry its value");
        require(apply(s, *x), "observation lies in the no-send region but was marked sent");
        return pair.llr(*x);
    }
    require(!x.has_value(), "a censored observation carries no value");
    require(!s.full_rate(), "the full-rate strategy never censors");
    return s.llr_censored;
}

CensoringStrategy optimize(const DistributionPair& pair, double epsilon) {
    validate(pair);
    require(epsilon > 0.0 && epsilon <= 1.0, "epsilon must lie in (0,1]");
    require(epsilon >= 1e-3, "epsilon below 1e-3 makes the censored statistic uninformative");
    if (epsilon == 1.0) return full_rate_strategy(pair);
    require(pair.monotone_llr, "the censoring optimizer searches observation-space intervals (monotone LLR)");

    const double kl = kl_f1_f0(pair);
    const double nosend = 1.0 - epsilon;
    const double l_min = pair.pre_change_quantile(kTailMass);
    const double top = 1.0 - epsilon - kTailMass;
    const double l_max = top > kTailMass ? pair.pre_change_quantile(top) : l_min;

    // Upper endpoint implied by the rate constraint cdf0(u) - cdf0(l) = 1 - epsilon.
    auto upper = [&](double l) {
        const double p = std::min(pair.cdf0(l) + nosend, 1.0 - 1e-12);
        return pair.pre_change_quantile(p);
    };
    auto objective = [&](double l) {
        const double u = upper(l);
        const double p1 = pair.cdf1(u) - pair.cdf1(l);
        return post_kl_from(pair, kl, l, u, nosend, p1);
    };

    std::vector<double> grid(kGridPoints);
    std::vector<double> values(kGridPoints);
    std::size_t best = 0;
    for (int i = 0; i < kGridPoints; ++i) {
        grid[i] = l_min + (l_max - l_min) * i / (kGridPoints - 1);
        values[i] = objective(grid[i]);
        if (values[i] > values[best] + kTieTolerance) best = i;
    }

    double best_l = grid[best];
    double best_v = values[best];
    if (l_max > l_min) {
        // Golden-section refinement on the bracketing grid cells.
        double a = grid[best == 0 ? 0 : best - 1];
        double b = grid[best + 1 < grid.size() ? best + 1 : best];
        const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
        double c = b - inv_phi * (b - a);
        double d = a + inv_phi * (b - a);
        double fc = objective(c);
        double fd = objective(d);
        for (int it = 0; it < 200 && (b - a) > 1e-10 * (1.0 + std::abs(a)); ++it) {
            if (fc >= fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = objective(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = objective(d);
            }
        }
        const double l = 0.5 * (a + b);
        const double v = objective(l);
        if (v > best_v + kTieTolerance || (std::abs(v - best_v) <= kTieTolerance && l < best_l)) {
            best_l = l;
            best_v = v;
        }
    }

    const double u = upper(best_l);
    CensoringStrategy s;
    s.rate = epsilon;
    s.p0_nosend = nosend;
    s.p1_nosend = pair.cdf1(u) - pair.cdf1(best_l);
    s.nosend_x_lo = best_l;
    s.nosend_x_hi = u;
    const double la = pair.llr(best_l);
    const double lb = pair.llr(u);
    s.nosend_llr_lo = pair.llr_increasing ? la : lb;
    s.nosend_llr_hi = pair.llr_increasing ? lb : la;
    s.llr_censored = std::log(s.p1_nosend / s.p0_nosend);
    s.post_kl = post_kl_from(pair, kl, best_l, u, s.p0_nosend, s.p1_nosend);
    s.x_space = true;
    s.llr = pair.llr;
    return s;
}

std::string strategy_record_header() {
    return "rate,nosend_llr_lo,nosend_llr_hi,nosend_x_lo,nosend_x_hi,llr_censored,p0_nosend,p1_nosend,post_kl";
}

std::string to_record(const CensoringStrategy& s) {
    const std::array<double, 9> fields{s.rate,        s.nosend_llr_lo, s.nosend_llr_hi,
                                       s.x_space ? s.nosend_x_lo : std::numeric_limits<double>::quiet_NaN(),
                                       s.x_space ? s.nosend_x_hi : std::numeric_limits<double>::quiet_NaN(),
                                       s.llr_censored, s.p0_nosend, s.p1_nosend, s.post_kl};
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += format_double(fields[i]);
    }
    return out;
}

CensoringStrategy from_record(const std::string& line) {
    const auto cells = split(trim(line), ',');
    require(cells.size() == 9, "strategy record needs 9 fields");
    CensoringStrategy s;
    s.rate = parse_double(cells[0]);
    s.nosend_llr_lo = parse_double(cells[1]);
    s.nosend_llr_hi = parse_double(cells[2]);
    s.nosend_x_lo = parse_double(cells[3]);
    s.nosend_x_hi = parse_double(cells[4]);
    s.llr_censored = parse_double(cells[5]);
    s.p0_nosend = parse_double(cells[6]);
    s.p1_nosend = parse_double(cells[7]);
    s.post_kl = parse_double(cells[8]);
    s.x_space = !std::isnan(s.nosend_x_lo);
    return s;
}

} // namespace qcd
