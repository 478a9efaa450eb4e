#include "qcd/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qcd/csv.hpp"
#include "qcd/error.hpp"

namespace qcd {

CusumAcConfig make_cusum_ac(const Network& network, double a, std::vector<Level> levels) {
    std::vector<double> thresholds;
    std::vector<std::vector<double>> rates(network.size());
    for (const auto& level : levels) {
        thresholds.push_back(level.threshold);
        for (auto& r : rates) r.push_back(level.rate);
    }
    return make_cusum_ac(network, a, std::move(thresholds), rates);
}

CusumAcConfig make_cusum_ac(const Network& network, double a, std::vector<double> thresholds,
                            const std::vector<std::vector<double>>& rates) {
    require(!network.empty(), "network needs at least one sensor");
    require(rates.size() == network.size(), "one rate row per sensor");
    CusumAcConfig config;
    config.a = a;
    for (std::size_t n = 0; n < thresholds.size(); ++n) {
        double mean = 0.0;
        for (const auto& row : rates) {
            require(row.size() == thresholds.size(), "one rate per level for every sensor");
            mean += row[n];
        }
        config.levels.push_back({thresholds[n], mean / static_cast<double>(rates.size())});
    }
    config.strategies.resize(network.size());
    for (std::size_t m = 0; m < network.size(); ++m) {
        for (std::size_t n = 0; n < thresholds.size(); ++n) {
            config.strategies[m].push_back(optimize(network[m], rates[m][n]));
        }
    }
    validate(config);
    return config;
}

CusumAcConfig make_cusum_ac(const Network& network, double a, double a1, double eps1) {
    return make_cusum_ac(network, a, std::vector<Level>{{a1, eps1}});
}

void validate(const CusumAcConfig& config) {
    require(config.a > 0.0, "threshold a must be positive");
    require(!config.strategies.empty(), "config needs at least one sensor");
    double prev_threshold = config.a;
    for (std::size_t n = 0; n < config.levels.size(); ++n) {
        const auto& level = config.levels[n];
        require(level.threshold > 0.0, "level thresholds must be positive");
        require(level.threshold < prev_threshold, "level thresholds must increase strictly toward a");
        prev_threshold = level.threshold;
    }
    for (const auto& per_sensor : config.strategies) {
        require(per_sensor.size() == config.levels.size(), "one strategy per level for every sensor");
        double prev_rate = 1.0;
        for (const auto& s : per_sensor) {
            require(s.rate > 0.0 && s.rate <= prev_rate, "rates must be nonincreasing as thresholds decrease");
            prev_rate = s.rate;
        }
    }
}

CusumAcConfig with_threshold(CusumAcConfig config, double a) {
    config.a = a;
    validate(config);
    return config;
}

std::size_t level_for(const CusumAcConfig& config, double s) {
    const auto& levels = config.levels;
    if (levels.empty() || s >= levels.front().threshold) return 0;
    for (std::size_t n = 1; n < levels.size(); ++n) {
        if (s >= levels[n].threshold) return n;
    }
    return levels.size();
}

DetectorState initial_state(const CusumAcConfig& config) {
    DetectorState st;
    st.active_level = level_for(config, 0.0);
    return st;
}

DetectorState cusum_step(const DetectorState& state, double llr_value, double a, std::uint64_t sent_count) {
    require(!state.stopped, "detector already stopped");
    DetectorState next = state;
    next.s = std::max(0.0, state.s + llr_value);
    next.steps = state.steps + 1;
    next.tx_count += sent_count;
    if (next.s > a) {
        next.stopped = true;
        next.stop_time = next.steps;
    }
    return next;
}

DetectorState cusum_ac_update(const DetectorState& state, const CusumAcConfig& config, double increment,
                              std::uint64_t sent_count) {
    require(!state.stopped, "detector already stopped");
    DetectorState next = state;
    const double reflected = std::max(0.0, state.s + increment);
    double s = reflected;
    // Levels are ordered a_1 > a_2 > ..., so the first crossed threshold is the highest.
    for (const auto& level : config.levels) {
        if (state.s < level.threshold && reflected >= level.threshold) {
            s = level.threshold;
            ++next.up_crossings;
            break;
        }
    }
    next.s = s;
    next.steps = state.steps + 1;
    next.tx_count += sent_count;
    if (s >= config.a1()) {
        ++next.time_above_a1;
    } else {
        ++next.time_below_a1;
    }
    if (s >= config.a) {
        next.stopped = true;
        next.stop_time = next.steps;
    }
    next.active_level = level_for(config, s);
    if (next.active_level != state.active_level) ++next.feedback_count;
    return next;
}

std::pair<DetectorState, bool> cusum_ac_step(const DetectorState& state, const CusumAcConfig& config, double x,
                                             const DistributionPair& pair) {
    require(config.sensors() == 1, "scalar step needs a single-sensor config");
    double increment = 0.0;
    bool sent = true;
    if (state.active_level == 0) {
        increment = pair.llr(x);
    } else {
        const auto& strategy = config.strategies[0][state.active_level - 1];
        sent = apply(strategy, x);
        increment = sent ? pair.llr(x) : strategy.llr_censored;
    }
    return {cusum_ac_update(state, config, increment, sent ? 1 : 0), sent};
}

std::pair<DetectorState, std::vector<bool>> cusum_ac_multi_step(const DetectorState& state,
                                                                const CusumAcConfig& config,
                                                                std::span<const double> xs, const Network& pairs) {
    require(xs.size() == pairs.size() && xs.size() == config.sensors() && !xs.empty(),
            "observation, model and config sensor counts must match");
    std::vector<bool> sent(xs.size(), true);
    double increment = 0.0;
    std::uint64_t count = 0;
    for (std::size_t m = 0; m < xs.size(); ++m) {
        if (state.active_level == 0) {
            increment += pairs[m].llr(xs[m]);
        } else {
            const auto& strategy = config.strategies[m][state.active_level - 1];
            sent[m] = apply(strategy, xs[m]);
            increment += sent[m] ? pairs[m].llr(xs[m]) : strategy.llr_censored;
        }
        count += sent[m] ? 1 : 0;
    }
    return {cusum_ac_update(state, config, increment, count), std::move(sent)};
}

std::pair<DetectorState, bool> random_tx_cusum_step(const DetectorState& state, double x,
                                                    const DistributionPair& pair, double epsilon, double a,
                                                    Rng& rng) {
    const bool sent = bernoulli(rng, epsilon);
    const double increment = sent ? pair.llr(x) : 0.0;
    return {cusum_step(state, increment, a, sent ? 1 : 0), sent};
}

void write_trace_csv(const std::vector<TraceRecord>& trace, const std::filesystem::path& path) {
    CsvTable table({"k", "s", "level", "sent", "stopped"});
    for (const auto& r : trace) {
        table.add_row({std::to_string(r.k), format_double(r.s), std::to_string(r.level), std::to_string(r.sent),
                       r.stopped ? "1" : "0"});
    }
    table.write(path);
}

} // namespace qcd
