#include "qcd/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "qcd/csv.hpp"
#include "qcd/error.hpp"

namespace qcd {

ThresholdResult calibrate_threshold(const DetectorSpec& spec, const Network& network, double zeta,
                                    std::uint64_t seed, const ThresholdOptions& options) {
    require(zeta > 0.0 && std::isfinite(zeta), "ARLFA target must be positive and finite");
    ThresholdResult result;
    if (zeta <= 1.0) return result;  // every stopping time satisfies E[T] >= 1

    const double log_zeta = std::log(zeta);
    double lo_bound = log_zeta / 4.0;
    const double hi_bound = 4.0 * log_zeta;
    if (const auto* ac = std::get_if<CusumAcDetector>(&spec)) {
        const double a1 = ac->config.a1();
        lo_bound = std::max(lo_bound, std::nextafter(a1, std::numeric_limits<double>::infinity()));
    }
    require(lo_bound < hi_bound, "ARLFA target too small for the level thresholds");

    const std::uint64_t cap =
        options.cap ? options.cap : static_cast<std::uint64_t>(std::ceil(100.0 * zeta));
    ArlCurve curve(with_threshold(spec, std::numeric_limits<double>::infinity()), network, options.n_reps, cap,
                   seed);
    auto reaches = [&](double a) {
        const McEstimate est = curve.at(a);
        result.trace.push_back({a, est});
        return est.mean >= zeta;
    };
    auto finish = [&](double a) {
        result.a = a;
        result.arlfa = curve.at(a);
        return result;
    };

    double lo = lo_bound;
    double hi = std::clamp(log_zeta, lo_bound, hi_bound);
    int steps = 0;
    if (reaches(hi)) {
        if (reaches(lo_bound)) return finish(lo_bound);
    } else {
        lo = hi;
        double step = 0.5;
        while (true) {
            if (++steps > options.max_steps || lo >= hi_bound) {
                throw SearchFailure("ARLFA target not bracketed inside [ln(zeta)/4, 4 ln(zeta)] after " +
                                    std::to_string(result.trace.size()) + " probes");
            }
            const double cand = std::min(lo + step, hi_bound);
            if (reaches(cand)) {
                hi = cand;
                break;
            }
            lo = cand;
            step *= 1.5;
        }
    }
    while (hi - lo > options.width && steps < options.max_steps) {
        const double mid = 0.5 * (lo + hi);
        if (reaches(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
        ++steps;
    }
    return finish(hi);
}

std::vector<double> default_a1_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 10; ++i) g.push_back(0.2 * i);
    return g;
}

std::vector<double> default_eps1_grid() {
    std::vector<double> g;
    for (int i = 1; i <= 9; ++i) g.push_back(0.1 * i);
    return g;
}

CalibrationResult search_two_level(const Network& network, const CalibrationTarget& target,
                                   const std::vector<double>& a1_grid, const std::vector<double>& eps1_grid,
                                   const SearchOptions& options) {
    require(!network.empty(), "network needs at least one sensor");
    require(!a1_grid.empty() && !eps1_grid.empty(), "search grids must be nonempty");
    require(target.zeta >= 1.0, "zeta must be at least 1");
    require(target.epsilon > 0.0 && target.epsilon <= 1.0, "epsilon must lie in (0,1]");
    for (double e : eps1_grid) require(e > 1e-3 && e <= 1.0, "grid rates must lie in (1e-3, 1]");
    for (double a1 : a1_grid) require(a1 > 0.0, "grid thresholds must be positive");

    std::map<double, std::vector<CensoringStrategy>> strategies;
    for (double e : eps1_grid) {
        auto& row = strategies[e];
        for (const auto& pair : network) row.push_back(optimize(pair, e));
    }
    auto config_for = [&](double a1, double eps1, double a) {
        CusumAcConfig c;
        c.a = a;
        c.levels = {{a1, eps1}};
        for (const auto& s : strategies.at(eps1)) c.strategies.push_back({s});
        validate(c);
        return c;
    };

    // Common random numbers across candidates: every candidate sees the same streams.
    const std::uint64_t screen_seed = derive_seed(options.seed, 21);
    const std::uint64_t calib_seed = derive_seed(options.seed, 22);
    const std::uint64_t rate_seed = derive_seed(options.seed, 23);
    const std::uint64_t delay_seed = derive_seed(options.seed, 24);
    const std::uint64_t cycle_seed = derive_seed(options.seed, 25);
    const double inf = std::numeric_limits<double>::infinity();

    auto rate_ok = [&](const McEstimate& r) { return r.mean <= target.epsilon + 3.0 * r.std_error; };

    std::vector<double> eps_desc = eps1_grid;
    std::sort(eps_desc.begin(), eps_desc.end(), std::greater<>());
    std::vector<double> a1_sorted = a1_grid;
    std::sort(a1_sorted.begin(), a1_sorted.end());

    CalibrationResult result;
    for (double a1 : a1_sorted) {
        for (double eps1 : eps_desc) {
            Candidate c;
            c.a1 = a1;
            c.eps1 = eps1;
            const DetectorSpec open{CusumAcDetector{config_for(a1, eps1, inf)}};
            const std::uint64_t screen_reps = std::max<std::uint64_t>(10, options.rate_reps / 10);
            c.screen_rate = estimate_comm_rate(open, network, options.horizon, screen_reps, screen_seed);
            // Clearly infeasible: the send rate exceeds the budget by more than 3 standard errors.
            if (c.screen_rate.mean - 3.0 * c.screen_rate.std_error > target.epsilon) {
                c.screened_out = true;
                result.search_trace.push_back(c);
                continue;
            }
            ThresholdOptions topt;
            topt.n_reps = options.n_reps;
            const ThresholdResult th = calibrate_threshold(open, network, target.zeta, calib_seed, topt);
            c.a = th.a;
            c.arlfa = th.arlfa;
            const DetectorSpec tuned{CusumAcDetector{config_for(a1, eps1, c.a)}};
            c.rate = estimate_comm_rate(tuned, network, options.horizon, options.rate_reps, rate_seed,
                                        options.rate_mode);
            c.delay = estimate_delay(tuned, network, options.n_reps, delay_seed, target.nu);
            const CycleStats cycle =
                estimate_cycle(std::get<CusumAcDetector>(tuned).config, network, options.cycle_reps, cycle_seed);
            c.eprime = check_eprime_membership(cycle);
            c.evaluated = true;
            c.admissible = rate_ok(c.rate) && c.arlfa.mean >= target.zeta * (1.0 - target.tolerance) &&
                           (!options.require_eprime || c.eprime.verdict == Verdict::member);
            result.search_trace.push_back(c);
            if (options.frontier_only && c.admissible) break;
        }
    }

    const Candidate* best = nullptr;
    auto lex_less = [](const Candidate& x, const Candidate& y) {
        return std::tie(x.a1, x.eps1) < std::tie(y.a1, y.eps1);
    };
    for (const auto& c : result.search_trace) {
        if (!c.admissible) continue;
        if (!best || c.delay.mean < best->delay.mean ||
            (c.delay.mean == best->delay.mean && lex_less(c, *best))) {
            best = &c;
        }
    }
    result.feasible = best != nullptr;
    if (!best) {
        // Best effort: the evaluated candidate closest to the rate budget.
        for (const auto& c : result.search_trace) {
            if (!c.evaluated) continue;
            if (!best || c.rate.mean < best->rate.mean) best = &c;
        }
    }
    if (!best) {
        for (const auto& c : result.search_trace) {
            if (!best || c.screen_rate.mean < best->screen_rate.mean) best = &c;
        }
        result.chosen = *best;
        result.config = config_for(best->a1, best->eps1, inf);
        return result;
    }

    result.chosen = *best;
    result.eprime_verdict = best->eprime.verdict;
    result.config = config_for(best->a1, best->eps1, best->a);
    const PreChangeReport pre = estimate_prechange(CusumAcDetector{result.config}, network, options.n_reps,
                                                   static_cast<std::uint64_t>(std::ceil(100.0 * target.zeta)),
                                                   calib_seed);
    result.report.arlfa = pre.arlfa;
    result.report.feedback_ratio = pre.feedback_ratio;
    result.report.frac_time_above_a1 = pre.frac_time_above_a1;
    result.report.delay = best->delay;
    result.report.comm_rate = best->rate;
    return result;
}

CsvTable search_trace_table(const CalibrationResult& result) {
    CsvTable table({"a1", "eps1", "a", "arlfa", "arlfa_se", "rate", "rate_se", "delay", "delay_se", "eprime_verdict",
                    "eprime_margin", "screened_out", "admissible"});
    for (const auto& c : result.search_trace) {
        const bool ev = c.evaluated;
        auto num = [&](double v) { return ev ? format_double(v) : std::string("nan"); };
        table.add_row({format_double(c.a1), format_double(c.eps1), num(c.a), num(c.arlfa.mean),
                       num(c.arlfa.std_error), ev ? format_double(c.rate.mean) : format_double(c.screen_rate.mean),
                       ev ? format_double(c.rate.std_error) : format_double(c.screen_rate.std_error),
                       num(c.delay.mean), num(c.delay.std_error), ev ? to_string(c.eprime.verdict) : "none",
                       num(c.eprime.margin), c.screened_out ? "1" : "0", c.admissible ? "1" : "0"});
    }
    return table;
}

void write_search_trace(const CalibrationResult& result, const std::filesystem::path& path) {
    search_trace_table(result).write(path);
}

} // namespace qcd
