#include "qcd/montecarlo.hpp"

#include <algorithm>
#include <cmath>

#include "qcd/error.hpp"

namespace qcd {

McEstimate summarize(std::span<const double> values, std::uint64_t seed, std::uint64_t truncated) {
    McEstimate est;
    est.n_reps = values.size();
    est.seed = seed;
    est.truncated_reps = truncated;
    if (values.empty()) return est;
    double sum = 0.0;
    for (double v : values) sum += v;
    est.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - est.mean) * (v - est.mean);
        const double var = ss / static_cast<double>(values.size() - 1);
        est.std_error = std::sqrt(var / static_cast<double>(values.size()));
    }
    return est;
}

double z_score(const McEstimate& a, const McEstimate& b) {
    const double se = std::hypot(a.std_error, b.std_error);
    const double diff = a.mean - b.mean;
    if (se == 0.0) return diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    return diff / se;
}

double threshold_of(const DetectorSpec& spec) {
    return std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, CusumAcDetector>) {
                return d.config.a;
            } else {
                return d.a;
            }
        },
        spec);
}

DetectorSpec with_threshold(const DetectorSpec& spec, double a) {
    return std::visit(
        [a](auto d) -> DetectorSpec {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, CusumAcDetector>) {
                d.config.a = a;
            } else {
                d.a = a;
            }
            return d;
        },
        spec);
}

std::string detector_name(const DetectorSpec& spec) {
    switch (spec.index()) {
        case 0: return "cusum";
        case 1: return "cusum_ac";
        default: return "random_tx";
    }
}

void validate(const DetectorSpec& spec, const Network& network) {
    require(!network.empty(), "network needs at least one sensor");
    for (const auto& pair : network) validate(pair);
    if (const auto* ac = std::get_if<CusumAcDetector>(&spec)) {
        validate(ac->config);
        require(ac->config.sensors() == network.size(), "config and network sensor counts differ");
    } else if (const auto* rt = std::get_if<RandomTxDetector>(&spec)) {
        require(rt->epsilon >= 0.0 && rt->epsilon <= 1.0, "random transmission rate must lie in [0,1]");
    }
    require(threshold_of(spec) >= 0.0, "threshold must be nonnegative");
}

namespace {

// Advances one detector by one slot. Holds the effective threshold so that the
// no-stop mode shares the exact arithmetic of the stopping mode.
class Stepper {
public:
    Stepper(const DetectorSpec& spec, const Network& network, bool stopping)
        : network_(network), kind_(spec.index()) {
        constexpr double inf = std::numeric_limits<double>::infinity();
        if (const auto* ac = std::get_if<CusumAcDetector>(&spec)) {
            config_ = ac->config;
            if (!stopping) config_.a = inf;
        } else if (const auto* rt = std::get_if<RandomTxDetector>(&spec)) {
            a_ = stopping ? rt->a : inf;
            epsilon_ = rt->epsilon;
        } else {
            a_ = stopping ? std::get<CusumDetector>(spec).a : inf;
        }
    }

    DetectorState initial() const { return kind_ == 1 ? initial_state(config_) : DetectorState{}; }

    std::uint64_t sensors() const { return network_.size(); }

    void step(DetectorState& st, Rng& rng, bool post_change) const {
        double increment = 0.0;
        std::uint64_t sent = 0;
        switch (kind_) {
            case 0:
                for (const auto& pair : network_) increment += pair.llr(draw(pair, rng, post_change));
                st = cusum_step(st, increment, a_, network_.size());
                return;
            case 1:
                for (std::size_t m = 0; m < network_.size(); ++m) {
                    const auto& pair = network_[m];
                    const double x = draw(pair, rng, post_change);
                    if (st.active_level == 0) {
                        increment += pair.llr(x);
                        ++sent;
                    } else {
                        const auto& strategy = config_.strategies[m][st.active_level - 1];
                        if (apply(strategy, x)) {
                            increment += pair.llr(x);
                            ++sent;
                        } else {
                            increment += strategy.llr_censored;
                        }
                    }
                }
                st = cusum_ac_update(st, config_, increment, sent);
                return;
            default:
                for (const auto& pair : network_) {
                    const double x = draw(pair, rng, post_change);
                    if (bernoulli(rng, epsilon_)) {
                        increment += pair.llr(x);
                        ++sent;
                    }
                }
                st = cusum_step(st, increment, a_, sent);
                return;
        }
    }

private:
    static double draw(const DistributionPair& pair, Rng& rng, bool post_change) {
        return post_change ? pair.sample1(rng) : pair.sample0(rng);
    }

    const Network& network_;
    std::size_t kind_;
    CusumAcConfig config_;
    double a_ = 0.0;
    double epsilon_ = 1.0;
};

std::uint64_t arl_value(const PathResult& r, std::uint64_t cap) { return r.truncated ? cap : r.state.stop_time; }

} // namespace

PathResult simulate_path(const DetectorSpec& spec, const Network& network, Rng& rng, const PathOptions& options,
                         const TraceSink& trace) {
    const Stepper stepper(spec, network, options.stopping);
    PathResult result;
    result.state = stepper.initial();
    auto& st = result.state;
    while (!st.stopped) {
        if (st.steps >= options.max_steps) {
            result.truncated = true;
            break;
        }
        const std::uint64_t k = st.steps + 1;
        const std::uint64_t before = st.tx_count;
        stepper.step(st, rng, k >= options.nu);
        if (trace) trace({k, st.s, st.active_level, st.tx_count - before, st.stopped});
    }
    return result;
}

McEstimate estimate_arlfa(const DetectorSpec& spec, const Network& network, std::uint64_t n_reps,
                          std::uint64_t cap, std::uint64_t seed) {
    return estimate_prechange(spec, network, n_reps, cap, seed).arlfa;
}

PreChangeReport estimate_prechange(const DetectorSpec& spec, const Network& network, std::uint64_t n_reps,
                                   std::uint64_t cap, std::uint64_t seed) {
    validate(spec, network);
    require(n_reps >= 100, "ARLFA estimation needs at least 100 replications");
    require(cap >= 1, "cap must be positive");
    std::vector<double> arl(n_reps), fb_ratio(n_reps), fb_alarm(n_reps), ups(n_reps), above(n_reps);
    std::vector<char> truncated(n_reps, 0);
    const std::size_t initial_level =
        spec.index() == 1 ? initial_state(std::get<CusumAcDetector>(spec).config).active_level : 0;
    parallel_for(n_reps, [&](std::size_t i) {
        Rng rng = stream(seed, i);
        const PathResult r = simulate_path(spec, network, rng, {kNever, cap, true});
        const double t = static_cast<double>(arl_value(r, cap));
        arl[i] = t;
        truncated[i] = r.truncated;
        const double steps = std::max<double>(1.0, static_cast<double>(r.state.steps));
        fb_ratio[i] = static_cast<double>(r.state.feedback_count) / steps;
        // Restarting at s = 0 after the alarm is one more switch whenever the level differs.
        fb_alarm[i] = static_cast<double>(r.state.feedback_count + (r.state.active_level != initial_level ? 1 : 0));
        ups[i] = static_cast<double>(r.state.up_crossings);
        above[i] = static_cast<double>(r.state.time_above_a1) / steps;
    });
    const auto n_trunc = static_cast<std::uint64_t>(std::count(truncated.begin(), truncated.end(), 1));
    return {summarize(arl, seed, n_trunc), summarize(fb_ratio, seed, n_trunc), summarize(fb_alarm, seed, n_trunc),
            summarize(ups, seed, n_trunc), summarize(above, seed, n_trunc)};
}

McEstimate estimate_delay(const DetectorSpec& spec, const Network& network, std::uint64_t n_reps,
                          std::uint64_t seed, std::uint64_t nu, std::uint64_t cap) {
    validate(spec, network);
    require(nu >= 1, "change time nu must be at least 1");
    require(n_reps >= 1, "need at least one replication");
    std::vector<double> delay(n_reps);
    std::vector<char> truncated(n_reps, 0);
    parallel_for(n_reps, [&](std::size_t i) {
        Rng rng = stream(seed, i);
        const PathResult r = simulate_path(spec, network, rng, {nu, cap, true});
        const std::uint64_t t = r.truncated ? cap : r.state.stop_time;
        truncated[i] = r.truncated;
        delay[i] = t + 1 > nu ? static_cast<double>(t + 1 - nu) : 0.0;
    });
    const auto n_trunc = static_cast<std::uint64_t>(std::count(truncated.begin(), truncated.end(), 1));
    return summarize(delay, seed, n_trunc);
}

McEstimate estimate_worst_case_delay(const DetectorSpec& spec, const Network& network, std::uint64_t n_reps,
                                     std::uint64_t seed, std::uint64_t nu, std::uint64_t cap) {
    validate(spec, network);
    require(nu >= 1, "change time nu must be at least 1");
    require(n_reps >= 1, "need at least one replication");
    const Stepper stepper(spec, network, true);
    std::vector<double> kept;
    std::uint64_t n_trunc = 0;
    const std::uint64_t max_attempts = 100 * n_reps;
    std::uint64_t attempted = 0;
    while (kept.size() < n_reps && attempted < max_attempts) {
        const std::uint64_t batch = std::min<std::uint64_t>(n_reps, max_attempts - attempted);
        std::vector<double> delay(batch, -1.0);
        std::vector<char> truncated(batch, 0);
        parallel_for(batch, [&](std::size_t j) {
            Rng rng = stream(seed, attempted + j);
            DetectorState st = stepper.initial();
            while (st.steps + 1 < nu && !st.stopped) stepper.step(st, rng, false);
            if (st.stopped || st.s != 0.0) return;
            const std::uint64_t start = st.steps;
            while (!st.stopped && st.steps - start < cap) stepper.step(st, rng, true);
            truncated[j] = !st.stopped;
            delay[j] = static_cast<double>(st.steps - start);
        });
        for (std::size_t j = 0; j < batch && kept.size() < n_reps; ++j) {
            if (delay[j] < 0.0) continue;
            kept.push_back(delay[j]);
            n_trunc += truncated[j];
        }
        attempted += batch;
    }
    if (kept.size() < n_reps) {
        throw Infeasible("too few trajectories have a zero statistic at the change time");
    }
    return summarize(kept, seed, n_trunc);
}

McEstimate estimate_comm_rate(const DetectorSpec& spec, const Network& network, std::uint64_t horizon,
                              std::uint64_t n_reps, std::uint64_t seed, RateMode mode) {
    validate(spec, network);
    require(horizon >= 1, "horizon must be positive");
    require(n_reps >= 1, "need at least one replication");
    const double slots = static_cast<double>(horizon) * static_cast<double>(network.size());

    if (mode == RateMode::no_stop) {
        std::vector<double> rate(n_reps);
        parallel_for(n_reps, [&](std::size_t i) {
            Rng rng = stream(seed, i);
            const PathResult r = simulate_path(spec, network, rng, {kNever, horizon, false});
            rate[i] = static_cast<double>(r.state.tx_count) / slots;
        });
        return summarize(rate, seed);
    }

    // Literal conditioning on T >= horizon: keep trajectories that have not alarmed
    // before the horizon, drawing attempts in index order until n_reps survive.
    std::vector<double> survivors;
    const std::uint64_t max_attempts = 100 * n_reps;
    std::uint64_t attempted = 0;
    while (survivors.size() < n_reps && attempted < max_attempts) {
        const std::uint64_t batch = std::min<std::uint64_t>(n_reps, max_attempts - attempted);
        std::vector<double> rate(batch, -1.0);
        parallel_for(batch, [&](std::size_t j) {
            Rng rng = stream(seed, attempted + j);
            const PathResult r = simulate_path(spec, network, rng, {kNever, horizon, true});
            if (!r.state.stopped || r.state.stop_time == horizon) {
                rate[j] = static_cast<double>(r.state.tx_count) / slots;
            }
        });
        for (double v : rate) {
            if (v >= 0.0 && survivors.size() < n_reps) survivors.push_back(v);
        }
        attempted += batch;
    }
    if (survivors.size() < n_reps) {
        throw Infeasible("too few trajectories survive to the horizon for a conditional rate estimate");
    }
    return summarize(survivors, seed);
}

PerfReport evaluate(const DetectorSpec& spec, const Network& network, const EvalOptions& options) {
    const PreChangeReport pre =
        estimate_prechange(spec, network, options.n_reps, options.cap, derive_seed(options.seed, 1));
    PerfReport report;
    report.arlfa = pre.arlfa;
    report.feedback_ratio = pre.feedback_ratio;
    report.frac_time_above_a1 = pre.frac_time_above_a1;
    report.delay = estimate_delay(spec, network, options.n_reps, derive_seed(options.seed, 2), options.nu);
    report.comm_rate = estimate_comm_rate(spec, network, options.horizon, options.rate_reps,
                                          derive_seed(options.seed, 3), RateMode::no_stop);
    return report;
}

ArlCurve::ArlCurve(DetectorSpec spec, Network network, std::uint64_t n_reps, std::uint64_t cap, std::uint64_t seed)
    : spec_(std::move(spec)), network_(std::move(network)), cap_(cap), seed_(seed), strict_(spec_.index() != 1) {
    validate(spec_, network_);
    require(n_reps >= 100, "ARLFA estimation needs at least 100 replications");
    paths_.reserve(n_reps);
    const Stepper stepper(spec_, network_, false);
    for (std::uint64_t i = 0; i < n_reps; ++i) {
        paths_.push_back({stream(seed_, i), stepper.initial(), {}, false});
    }
}

std::optional<std::uint64_t> ArlCurve::stop_time(Path& path, double a) {
    auto meets = [&](double v) { return strict_ ? v > a : v >= a; };
    for (const auto& [value, slot] : path.records) {
        if (meets(value)) return slot;
    }
    if (path.capped) return std::nullopt;
    const Stepper stepper(spec_, network_, false);
    double best = path.records.empty() ? -1.0 : path.records.back().first;
    auto& st = path.state;
    while (st.steps < cap_) {
        stepper.step(st, path.rng, false);
        if (st.s > best) {
            best = st.s;
            path.records.emplace_back(st.s, st.steps);
            if (meets(st.s)) return st.steps;
        }
    }
    path.capped = true;
    return std::nullopt;
}

McEstimate ArlCurve::at(double a) {
    std::vector<double> values(paths_.size());
    std::vector<char> truncated(paths_.size(), 0);
    parallel_for(paths_.size(), [&](std::size_t i) {
        const auto t = stop_time(paths_[i], a);
        values[i] = static_cast<double>(t.value_or(cap_));
        truncated[i] = !t.has_value();
    });
    const auto n_trunc = static_cast<std::uint64_t>(std::count(truncated.begin(), truncated.end(), 1));
    return summarize(values, seed_, n_trunc);
}

} // namespace qcd
