#include "qcd/renewal.hpp"

#include <algorithm>
#include <cmath>

#include "qcd/csv.hpp"
#include "qcd/error.hpp"

namespace qcd {

namespace {

double raw_increment(const Network& network, Rng& rng) {
    double inc = 0.0;
    for (const auto& pair : network) inc += pair.llr(pair.sample0(rng));
    return inc;
}

double censored_increment(const CusumAcConfig& config, const Network& network, Rng& rng, std::uint64_t& sends) {
    double inc = 0.0;
    for (std::size_t m = 0; m < network.size(); ++m) {
        const auto& pair = network[m];
        const auto& strategy = config.strategies[m][0];
        const double x = pair.sample0(rng);
        if (apply(strategy, x)) {
            inc += pair.llr(x);
            ++sends;
        } else {
            inc += strategy.llr_censored;
        }
    }
    return inc;
}

void check_two_level(const CusumAcConfig& config, const Network& network) {
    validate(config);
    require(config.levels.size() == 1, "renewal analysis needs a two-level CuSum-AC config");
    require(config.sensors() == network.size(), "config and network sensor counts differ");
}

} // namespace

CycleStats estimate_cycle(const Network& network, double a1, double a, double eps1, std::uint64_t n_reps,
                          std::uint64_t seed) {
    require(a > a1, "a must exceed a_1");
    require(eps1 > 1e-3 && eps1 <= 1.0, "eps1 must lie in (1e-3, 1]");
    return estimate_cycle(make_cusum_ac(network, a, a1, eps1), network, n_reps, seed);
}

CycleStats estimate_cycle(const CusumAcConfig& config, const Network& network, std::uint64_t n_reps,
                          std::uint64_t seed) {
    check_two_level(config, network);
    require(n_reps >= 2, "need at least two replications");
    const double a1 = config.a1();
    const double band = config.a - a1;

    std::vector<double> eta(n_reps), returned(n_reps), phi(n_reps, 0.0), sends(n_reps, 0.0), cycle(n_reps),
        entry(n_reps, -1.0), t_a1(n_reps);
    std::vector<char> truncated(n_reps, 0);
    const std::uint64_t cycle_seed = derive_seed(seed, 11);
    const std::uint64_t cusum_seed = derive_seed(seed, 12);

    parallel_for(n_reps, [&](std::size_t i) {
        Rng rng = stream(cycle_seed, i);
        double walk = 0.0;
        std::uint64_t n = 0;
        bool back = false;
        while (n < kWalkCap) {
            walk += raw_increment(network, rng);
            ++n;
            if (walk < 0.0) {
                back = true;
                break;
            }
            if (walk >= band) break;
        }
        if (n >= kWalkCap && !back && !(walk >= band)) truncated[i] = 1;
        eta[i] = static_cast<double>(n);
        returned[i] = back ? 1.0 : 0.0;
        double len = static_cast<double>(n);
        if (back) {
            const double z = std::max(0.0, walk + a1);
            entry[i] = z;
            double s = z;
            std::uint64_t k = 0;
            std::uint64_t sent = 0;
            while (s < a1 && k < kWalkCap) {
                s = std::max(0.0, s + censored_increment(config, network, rng, sent));
                ++k;
            }
            if (s < a1) truncated[i] = 1;
            phi[i] = static_cast<double>(k);
            sends[i] = static_cast<double>(sent) / static_cast<double>(network.size());
            len += phi[i];
        }
        cycle[i] = len;

        Rng crng = stream(cusum_seed, i);
        DetectorState st;
        while (!st.stopped && st.steps < kWalkCap) st = cusum_step(st, raw_increment(network, crng), a1);
        if (!st.stopped) truncated[i] = 1;
        t_a1[i] = static_cast<double>(st.steps);
    });

    CycleStats out;
    out.a1 = a1;
    out.a = config.a;
    out.eps1 = config.levels.front().rate;
    out.truncated = static_cast<std::uint64_t>(std::count(truncated.begin(), truncated.end(), 1));
    out.mean_eta0 = summarize(eta, cycle_seed, out.truncated);
    out.p_return = summarize(returned, cycle_seed);
    out.mean_cycle = summarize(cycle, cycle_seed, out.truncated);
    out.mean_T_a1 = summarize(t_a1, cusum_seed);

    std::vector<double> eta_ret, phi_ret, sends_ret;
    for (std::size_t i = 0; i < n_reps; ++i) {
        if (returned[i] == 1.0) {
            eta_ret.push_back(eta[i]);
            phi_ret.push_back(phi[i]);
            sends_ret.push_back(sends[i]);
            out.return_value_samples.push_back(entry[i]);
        }
    }
    out.mean_eta0_given_return = summarize(eta_ret, cycle_seed);
    out.mean_phi_given_return = summarize(phi_ret, cycle_seed);
    out.mean_sends_given_return = summarize(sends_ret, cycle_seed);
    return out;
}

DirectCycleStats simulate_cycles(const CusumAcConfig& config, const Network& network, std::uint64_t n_reps,
                                 std::uint64_t seed) {
    check_two_level(config, network);
    require(n_reps >= 2, "need at least two replications");
    std::vector<double> length(n_reps), returned(n_reps);
    parallel_for(n_reps, [&](std::size_t i) {
        Rng rng = stream(seed, i);
        DetectorState st;
        st.s = config.a1();
        st.active_level = level_for(config, st.s);
        std::vector<double> xs(network.size());
        while (!st.stopped && st.up_crossings == 0 && st.steps < kWalkCap) {
            for (std::size_t m = 0; m < network.size(); ++m) xs[m] = network[m].sample0(rng);
            st = cusum_ac_multi_step(st, config, xs, network).first;
        }
        length[i] = static_cast<double>(st.steps);
        returned[i] = st.up_crossings > 0 ? 1.0 : 0.0;
    });
    return {summarize(length, seed), summarize(returned, seed)};
}

EPrimeCheck check_eprime_membership(const CycleStats& stats) {
    EPrimeCheck check;
    check.margin = z_score(stats.mean_phi_given_return, stats.mean_T_a1);
    check.member = check.margin >= 3.0;
    check.verdict = check.member ? Verdict::member : (check.margin <= -3.0 ? Verdict::rejected : Verdict::indeterminate);
    return check;
}

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::member: return "member";
        case Verdict::rejected: return "rejected";
        default: return "indeterminate";
    }
}

double rate_upper_bound(const CycleStats& stats, double eps1) {
    const double e = stats.mean_eta0_given_return.mean;
    const double f = stats.mean_phi_given_return.mean;
    return (e + eps1 * f) / (e + f);
}

McEstimate rate_upper_bound_estimate(const CycleStats& stats, double eps1) {
    const double e = stats.mean_eta0_given_return.mean;
    const double f = stats.mean_phi_given_return.mean;
    const double se_e = stats.mean_eta0_given_return.std_error;
    const double se_f = stats.mean_phi_given_return.std_error;
    McEstimate est = stats.mean_phi_given_return;
    est.mean = rate_upper_bound(stats, eps1);
    const double d = (e + f) * (e + f);
    est.std_error = (1.0 - eps1) / d * std::hypot(f * se_e, e * se_f);
    return est;
}

double rate_upper_bound_unconditional(const CycleStats& stats, double eps1) {
    const double e = stats.mean_eta0.mean;
    const double f = stats.mean_phi_given_return.mean;
    return (e + eps1 * f) / (e + f);
}

double feedback_expectation(const CycleStats& stats) {
    const double q = 1.0 - stats.p_return.mean;
    if (q <= 0.0 || q <= 3.0 * stats.p_return.std_error) return std::numeric_limits<double>::infinity();
    return 2.0 / q;
}

McEstimate feedback_expectation_estimate(const CycleStats& stats) {
    McEstimate est = stats.p_return;
    const double q = 1.0 - stats.p_return.mean;
    est.mean = feedback_expectation(stats);
    // delta method on 2 / (1 - p)
    est.std_error = std::isfinite(est.mean) ? 2.0 * stats.p_return.std_error / (q * q)
                                            : std::numeric_limits<double>::infinity();
    return est;
}

std::string cycle_stats_header() {
    return "a1,a,eps1,mean_eta0,mean_eta0_se,p_return,p_return_se,mean_eta0_given_return,"
           "mean_eta0_given_return_se,mean_phi_given_return,mean_phi_given_return_se,mean_cycle,mean_cycle_se,"
           "mean_T_a1,mean_T_a1_se,n_reps,truncated_reps";
}

std::string cycle_stats_row(const CycleStats& s) {
    const std::vector<double> v{s.a1,
                                s.a,
                                s.eps1,
                                s.mean_eta0.mean,
                                s.mean_eta0.std_error,
                                s.p_return.mean,
                                s.p_return.std_error,
                                s.mean_eta0_given_return.mean,
                                s.mean_eta0_given_return.std_error,
                                s.mean_phi_given_return.mean,
                                s.mean_phi_given_return.std_error,
                                s.mean_cycle.mean,
                                s.mean_cycle.std_error,
                                s.mean_T_a1.mean,
                                s.mean_T_a1.std_error};
    std::string row;
    for (double x : v) row += format_double(x) + ",";
    row += std::to_string(s.mean_eta0.n_reps) + "," + std::to_string(s.truncated);
    return row;
}

} // namespace qcd
