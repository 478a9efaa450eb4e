#include "qcd/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "qcd/error.hpp"

#ifndef QCD_VERSION
#define QCD_VERSION "unknown"
#endif

namespace qcd {

namespace {

template <class E>
struct Names {
    E value;
    const char* name;
};

constexpr Names<ExperimentKind> kKinds[] = {
    {ExperimentKind::trace, "trace"},
    {ExperimentKind::arlfa, "arlfa"},
    {ExperimentKind::delay, "delay"},
    {ExperimentKind::rate, "rate"},
    {ExperimentKind::delay_vs_arlfa, "delay_vs_arlfa"},
    {ExperimentKind::delay_vs_rate, "delay_vs_rate"},
    {ExperimentKind::calibrate, "calibrate"},
};
constexpr Names<DetectorKind> kDetectors[] = {
    {DetectorKind::cusum, "cusum"},
    {DetectorKind::cusum_ac, "cusum_ac"},
    {DetectorKind::random_tx, "random_tx"},
};
constexpr Names<RateMode> kRateModes[] = {{RateMode::no_stop, "no_stop"}, {RateMode::conditional, "conditional"}};
constexpr Names<DelayMode> kDelayModes[] = {{DelayMode::average, "average"}, {DelayMode::worst_case, "worst_case"}};

template <class E, std::size_t N>
const char* name_of(const Names<E> (&table)[N], E value) {
    for (const auto& n : table) {
        if (n.value == value) return n.name;
    }
    return "?";
}

template <class E, std::size_t N>
E parse_name(const Names<E> (&table)[N], const std::string& text, const char* what) {
    for (const auto& n : table) {
        if (text == n.name) return n.value;
    }
    std::string options;
    for (const auto& n : table) options += std::string(options.empty() ? "" : ", ") + n.name;
    throw InvalidArgument(std::string("unknown ") + what + " '" + text + "' (expected one of " + options + ")");
}

std::uint64_t parse_count(const std::string& raw) {
    const std::string t = trim(raw);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw InvalidArgument("not a nonnegative integer: '" + t + "'");
    }
    return v;
}

bool parse_bool(const std::string& raw) {
    const std::string t = trim(raw);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw InvalidArgument("not a boolean: '" + t + "'");
}

std::vector<double> parse_list(const std::string& raw) {
    std::vector<double> out;
    if (trim(raw).empty()) return out;
    for (const auto& item : split(raw, ',')) out.push_back(parse_double(item));
    return out;
}

std::string format_list(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += format_double(values[i]);
    }
    return out;
}

struct Field {
    const char* key;
    std::function<std::string(const ExperimentSpec&)> get;
    std::function<void(ExperimentSpec&, const std::string&)> set;
};

Field real(const char* key, double ExperimentSpec::*m) {
    return {key, [m](const ExperimentSpec& s) { return format_double(s.*m); },
            [m](ExperimentSpec& s, const std::string& v) { s.*m = parse_double(v); }};
}

Field count(const char* key, std::uint64_t ExperimentSpec::*m) {
    return {key, [m](const ExperimentSpec& s) { return std::to_string(s.*m); },
            [m](ExperimentSpec& s, const std::string& v) { s.*m = parse_count(v); }};
}

Field list(const char* key, std::vector<double> ExperimentSpec::*m) {
    return {key, [m](const ExperimentSpec& s) { return format_list(s.*m); },
            [m](ExperimentSpec& s, const std::string& v) { s.*m = parse_list(v); }};
}

Field flag(const char* key, bool ExperimentSpec::*m) {
    return {key, [m](const ExperimentSpec& s) { return std::string(s.*m ? "true" : "false"); },
            [m](ExperimentSpec& s, const std::string& v) { s.*m = parse_bool(v); }};
}

template <class E, std::size_t N>
Field choice(const char* key, E ExperimentSpec::*m, const Names<E> (&table)[N]) {
    return {key, [m, &table](const ExperimentSpec& s) { return std::string(name_of(table, s.*m)); },
            [m, &table, key](ExperimentSpec& s, const std::string& v) { s.*m = parse_name(table, trim(v), key); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        choice("kind", &ExperimentSpec::kind, kKinds),
        real("mu0", &ExperimentSpec::mu0),
        real("mu1", &ExperimentSpec::mu1),
        real("sigma", &ExperimentSpec::sigma),
        count("sensors", &ExperimentSpec::sensors),
        choice("detector", &ExperimentSpec::detector, kDetectors),
        real("a", &ExperimentSpec::a),
        list("thresholds", &ExperimentSpec::thresholds),
        list("rates", &ExperimentSpec::rates),
        real("epsilon", &ExperimentSpec::epsilon),
        real("zeta", &ExperimentSpec::zeta),
        real("tolerance", &ExperimentSpec::tolerance),
        list("zeta_grid", &ExperimentSpec::zeta_grid),
        list("epsilon_grid", &ExperimentSpec::epsilon_grid),
        list("a1_grid", &ExperimentSpec::a1_grid),
        list("eps1_fractions", &ExperimentSpec::eps1_fractions),
        count("n_reps", &ExperimentSpec::n_reps),
        count("search_reps", &ExperimentSpec::search_reps),
        count("rate_reps", &ExperimentSpec::rate_reps),
        count("cycle_reps", &ExperimentSpec::cycle_reps),
        count("horizon", &ExperimentSpec::horizon),
        count("cap", &ExperimentSpec::cap),
        count("nu", &ExperimentSpec::nu),
        choice("rate_mode", &ExperimentSpec::rate_mode, kRateModes),
        choice("delay_mode", &ExperimentSpec::delay_mode, kDelayModes),
        flag("frontier_only", &ExperimentSpec::frontier_only),
        flag("require_eprime", &ExperimentSpec::require_eprime),
        flag("include_cusum", &ExperimentSpec::include_cusum),
    };
    return f;
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

bool calibrated_kind(ExperimentKind k) {
    return k == ExperimentKind::delay_vs_arlfa || k == ExperimentKind::delay_vs_rate ||
           k == ExperimentKind::calibrate;
}

std::uint64_t cap_for(const ExperimentSpec& spec, double zeta) {
    return spec.cap ? spec.cap : static_cast<std::uint64_t>(std::ceil(100.0 * zeta));
}

std::vector<double> eps1_grid_for(const ExperimentSpec& spec, double epsilon) {
    std::set<double> grid;
    for (double f : spec.eps1_fractions) grid.insert(epsilon * f);
    return {grid.begin(), grid.end()};
}

std::string num(double v) { return format_double(v); }
std::string num(std::uint64_t v) { return std::to_string(v); }

McEstimate delay_of(const ExperimentSpec& spec, const DetectorSpec& det, const Network& net, std::uint64_t n_reps,
                    std::uint64_t seed) {
    if (spec.delay_mode == DelayMode::worst_case) {
        return estimate_worst_case_delay(det, net, n_reps, seed, spec.nu);
    }
    return estimate_delay(det, net, n_reps, seed, spec.nu);
}

double open_threshold() { return std::numeric_limits<double>::infinity(); }

CusumAcConfig two_level(const Network& net, double a1, double eps1, double a) {
    return make_cusum_ac(net, a, a1, eps1);
}

TableSet run_trace(const ExperimentSpec& spec, std::uint64_t seed) {
    const Network net = make_network(spec);
    const DetectorSpec det = make_detector(spec, net);
    CsvTable table({"k", "s", "level", "sent", "stopped"});
    Rng rng = stream(seed, 0);
    simulate_path(det, net, rng, {spec.nu, spec.horizon, true}, [&](const TraceRecord& r) {
        table.add_row({num(r.k), num(r.s), num(static_cast<std::uint64_t>(r.level)), num(r.sent),
                       r.stopped ? "1" : "0"});
    });
    return {{spec.name, std::move(table)}};
}

TableSet run_arlfa(const ExperimentSpec& spec, std::uint64_t seed) {
    const Network net = make_network(spec);
    const DetectorSpec det = make_detector(spec, net);
    const PreChangeReport r = estimate_prechange(det, net, spec.n_reps, cap_for(spec, spec.zeta), seed);
    CsvTable table({"detector", "a", "arlfa", "arlfa_se", "feedback_per_alarm", "feedback_per_alarm_se",
                    "frac_time_above_a1", "frac_time_above_a1_se", "n_reps", "truncated_reps", "config_hash"});
    table.add_row({to_string(spec.detector), num(spec.a), num(r.arlfa.mean), num(r.arlfa.std_error),
                   num(r.feedback_per_alarm.mean), num(r.feedback_per_alarm.std_error),
                   num(r.frac_time_above_a1.mean), num(r.frac_time_above_a1.std_error), num(r.arlfa.n_reps),
                   num(r.arlfa.truncated_reps), config_hash(spec)});
    return {{spec.name, std::move(table)}};
}

TableSet run_delay(const ExperimentSpec& spec, std::uint64_t seed) {
    const Network net = make_network(spec);
    const DetectorSpec det = make_detector(spec, net);
    const McEstimate d = delay_of(spec, det, net, spec.n_reps, seed);
    CsvTable table({"detector", "a", "nu", "delay_mode", "delay", "delay_se", "n_reps", "truncated_reps",
                    "config_hash"});
    table.add_row({to_string(spec.detector), num(spec.a), num(spec.nu), name_of(kDelayModes, spec.delay_mode),
                   num(d.mean), num(d.std_error), num(d.n_reps), num(d.truncated_reps), config_hash(spec)});
    return {{spec.name, std::move(table)}};
}

TableSet run_rate(const ExperimentSpec& spec, std::uint64_t seed) {
    const Network net = make_network(spec);
    const DetectorSpec det = make_detector(spec, net);
    const McEstimate r = estimate_comm_rate(det, net, spec.horizon, spec.n_reps, seed, spec.rate_mode);
    CsvTable table({"detector", "a", "horizon", "rate_mode", "rate", "rate_se", "n_reps", "config_hash"});
    table.add_row({to_string(spec.detector), num(spec.a), num(spec.horizon), name_of(kRateModes, spec.rate_mode),
                   num(r.mean), num(r.std_error), num(r.n_reps), config_hash(spec)});
    return {{spec.name, std::move(table)}};
}

TableSet run_delay_vs_arlfa(const ExperimentSpec& spec, std::uint64_t seed) {
    const Network net = make_network(spec);
    CsvTable table({"detector", "rate_budget", "zeta", "a", "arlfa", "arlfa_se", "delay", "delay_se", "n_reps",
                    "truncated_reps", "config_hash"});
    const std::string hash = config_hash(spec);

    std::vector<std::pair<DetectorSpec, double>> detectors;
    if (spec.include_cusum || spec.detector == DetectorKind::cusum) {
        detectors.emplace_back(CusumDetector{open_threshold()}, 1.0);
    }
    if (spec.detector != DetectorKind::cusum) {
        ExperimentSpec open = spec;
        open.a = open_threshold();
        const DetectorSpec det = make_detector(open, net);
        detectors.emplace_back(det, spec.epsilon);
    }
    // The same streams serve every detector and target, so curve differences are less noisy.
    const std::uint64_t calib_seed = derive_seed(seed, 1);
    const std::uint64_t delay_seed = derive_seed(seed, 2);
    for (double zeta : spec.zeta_grid) {
        for (const auto& [det, budget] : detectors) {
            ThresholdOptions topt;
            topt.n_reps = spec.n_reps;
            topt.cap = cap_for(spec, zeta);
            const ThresholdResult th = calibrate_threshold(det, net, zeta, calib_seed, topt);
            const DetectorSpec tuned = with_threshold(det, th.a);
            const McEstimate d = delay_of(spec, tuned, net, spec.n_reps, delay_seed);
            table.add_row({detector_name(det), num(budget), num(zeta), num(th.a), num(th.arlfa.mean),
                           num(th.arlfa.std_error), num(d.mean), num(d.std_error), num(d.n_reps),
                           num(th.arlfa.truncated_reps + d.truncated_reps), hash});
        }
    }
    return {{spec.name, std::move(table)}};
}

SearchOptions search_options(const ExperimentSpec& spec, std::uint64_t n_reps, std::uint64_t seed) {
    SearchOptions o;
    o.n_reps = n_reps;
    o.rate_reps = spec.rate_reps;
    o.horizon = spec.horizon;
    o.cycle_reps = spec.cycle_reps;
    o.rate_mode = spec.rate_mode;
    o.require_eprime = spec.require_eprime;
    o.frontier_only = spec.frontier_only;
    o.seed = seed;
    return o;
}

CalibrationTarget target_for(const ExperimentSpec& spec, double epsilon) {
    CalibrationTarget t;
    t.zeta = spec.zeta;
    t.epsilon = epsilon;
    t.nu = spec.nu;
    t.tolerance = spec.tolerance;
    return t;
}

TableSet run_delay_vs_rate(const ExperimentSpec& spec, std::uint64_t seed) {
    const Network net = make_network(spec);
    const std::string hash = config_hash(spec);
    CsvTable table({"detector", "epsilon", "a1", "eps1", "a", "arlfa", "arlfa_se", "rate", "rate_se", "delay",
                    "delay_se", "feasible", "n_reps", "config_hash"});
    const std::uint64_t calib_seed = derive_seed(seed, 1);
    const std::uint64_t delay_seed = derive_seed(seed, 2);
    const std::uint64_t rate_seed = derive_seed(seed, 3);
    ThresholdOptions topt;
    topt.n_reps = spec.n_reps;
    topt.cap = cap_for(spec, spec.zeta);
    const std::string nan = "nan";

    auto measure = [&](const DetectorSpec& open) {
        const ThresholdResult th = calibrate_threshold(open, net, spec.zeta, calib_seed, topt);
        const DetectorSpec tuned = with_threshold(open, th.a);
        const McEstimate d = delay_of(spec, tuned, net, spec.n_reps, delay_seed);
        const McEstimate r = estimate_comm_rate(tuned, net, spec.horizon, spec.rate_reps, rate_seed, spec.rate_mode);
        return std::tuple{th, d, r};
    };

    for (std::size_t i = 0; i < spec.epsilon_grid.size(); ++i) {
        const double eps = spec.epsilon_grid[i];
        // Select (a1, eps1) on a cheaper search, then measure the winner on fresh streams.
        const CalibrationResult search =
            search_two_level(net, target_for(spec, eps), spec.a1_grid, eps1_grid_for(spec, eps),
                             search_options(spec, spec.search_reps, derive_seed(seed, 1000 + i)));
        const double a1 = search.chosen.a1;
        const double eps1 = search.chosen.eps1;
        const auto [th, d, r] = measure(CusumAcDetector{two_level(net, a1, eps1, open_threshold())});
        const bool feasible =
            search.feasible && r.mean <= eps + 3.0 * r.std_error && th.arlfa.mean >= spec.zeta * (1 - spec.tolerance);
        table.add_row({"cusum_ac", num(eps), num(a1), num(eps1), num(th.a), num(th.arlfa.mean),
                       num(th.arlfa.std_error), num(r.mean), num(r.std_error), num(d.mean), num(d.std_error),
                       feasible ? "1" : "0", num(spec.n_reps), hash});

        const auto [rth, rd, rr] = measure(RandomTxDetector{open_threshold(), eps});
        table.add_row({"random_tx", num(eps), nan, nan, num(rth.a), num(rth.arlfa.mean), num(rth.arlfa.std_error),
                       num(rr.mean), num(rr.std_error), num(rd.mean), num(rd.std_error), "1", num(spec.n_reps),
                       hash});
    }
    if (spec.include_cusum) {
        const auto [th, d, r] = measure(CusumDetector{open_threshold()});
        table.add_row({"cusum", "1", nan, nan, num(th.a), num(th.arlfa.mean), num(th.arlfa.std_error), num(r.mean),
                       num(r.std_error), num(d.mean), num(d.std_error), "1", num(spec.n_reps), hash});
    }
    return {{spec.name, std::move(table)}};
}

TableSet run_calibrate(const ExperimentSpec& spec, std::uint64_t seed) {
    const Network net = make_network(spec);
    const CalibrationResult result =
        search_two_level(net, target_for(spec, spec.epsilon), spec.a1_grid, eps1_grid_for(spec, spec.epsilon),
                         search_options(spec, spec.n_reps, seed));
    const Candidate& c = result.chosen;
    CsvTable summary({"a1", "eps1", "a", "arlfa", "arlfa_se", "rate", "rate_se", "delay", "delay_se",
                      "eprime_verdict", "feasible", "config_hash"});
    summary.add_row({num(c.a1), num(c.eps1), num(c.a), num(c.arlfa.mean), num(c.arlfa.std_error), num(c.rate.mean),
                     num(c.rate.std_error), num(c.delay.mean), num(c.delay.std_error),
                     to_string(result.eprime_verdict), result.feasible ? "1" : "0", config_hash(spec)});
    return {{spec.name, std::move(summary)}, {spec.name + "_trace", search_trace_table(result)}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

} // namespace

const char* to_string(ExperimentKind kind) { return name_of(kKinds, kind); }
const char* to_string(DetectorKind kind) { return name_of(kDetectors, kind); }

RunConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw InvalidArgument(std::string("malformed config: ") + e.what());
    }
    RunConfig config;
    for (const auto& [key, node] : tree) {
        const bool is_value = node.empty() && !node.data().empty();
        if (is_value) {
            if (key != "seed") throw InvalidArgument("unknown top-level key '" + key + "'");
            config.seed = parse_count(node.data());
            continue;
        }
        ExperimentSpec spec;
        spec.name = key;
        bool has_kind = false;
        for (const auto& [k, v] : node) {
            const auto& f = fields();
            auto it = std::find_if(f.begin(), f.end(), [&](const Field& x) { return k == x.key; });
            if (it == f.end()) throw InvalidArgument("[" + key + "] unknown key '" + k + "'");
            try {
                it->set(spec, v.data());
            } catch (const InvalidArgument& e) {
                throw InvalidArgument("[" + key + "] " + k + ": " + e.what());
            }
            has_kind = has_kind || k == "kind";
        }
        if (!has_kind) throw InvalidArgument("[" + key + "] missing required key 'kind'");
        config.experiments.push_back(std::move(spec));
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config " + path.string());
    return parse_config(in);
}

Network make_network(const ExperimentSpec& spec) {
    require(spec.sensors >= 1 && spec.sensors <= 1000, "sensors must lie in [1, 1000]");
    return Network(spec.sensors, gaussian_mean_shift(spec.mu0, spec.mu1, spec.sigma));
}

DetectorSpec make_detector(const ExperimentSpec& spec, const Network& network) {
    switch (spec.detector) {
        case DetectorKind::cusum:
            return CusumDetector{spec.a};
        case DetectorKind::random_tx:
            return RandomTxDetector{spec.a, spec.epsilon};
        case DetectorKind::cusum_ac: {
            require(!spec.thresholds.empty(), "cusum_ac needs at least one switch threshold");
            require(spec.thresholds.size() == spec.rates.size(), "thresholds and rates must have equal length");
            std::vector<Level> levels;
            for (std::size_t i = 0; i < spec.thresholds.size(); ++i) {
                levels.push_back({spec.thresholds[i], spec.rates[i]});
            }
            return CusumAcDetector{make_cusum_ac(network, spec.a, levels)};
        }
    }
    throw InvalidArgument("unknown detector");
}

void validate(const ExperimentSpec& s) {
    auto fail_unless = [&](bool ok, const std::string& msg) {
        if (!ok) throw InvalidArgument("[" + s.name + "] " + msg);
    };
    fail_unless(!s.name.empty(), "experiment name must be nonempty");
    fail_unless(std::all_of(s.name.begin(), s.name.end(),
                            [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; }),
                "experiment names may only contain letters, digits, '_', '-' and '.'");
    try {
        const Network net = make_network(s);
        ExperimentSpec probe = s;
        if (calibrated_kind(s.kind)) probe.a = open_threshold();
        if (s.detector == DetectorKind::random_tx || s.kind == ExperimentKind::delay_vs_rate ||
            s.kind == ExperimentKind::calibrate) {
            fail_unless(s.epsilon > 0.0 && s.epsilon <= 1.0, "epsilon must lie in (0, 1]");
        }
        if (s.kind != ExperimentKind::delay_vs_rate && s.kind != ExperimentKind::calibrate) {
            validate(make_detector(probe, net), net);
        }
    } catch (const InvalidArgument& e) {
        const std::string what = e.what();
        if (what.rfind("[" + s.name + "]", 0) == 0) throw;
        throw InvalidArgument("[" + s.name + "] " + what);
    }
    fail_unless(s.nu >= 1, "nu must be at least 1");
    fail_unless(s.zeta >= 1.0 && std::isfinite(s.zeta), "zeta must be finite and at least 1");
    fail_unless(s.tolerance >= 0.0 && s.tolerance < 1.0, "tolerance must lie in [0, 1)");
    switch (s.kind) {
        case ExperimentKind::trace:
            fail_unless(s.horizon >= 1, "horizon must be positive");
            break;
        case ExperimentKind::arlfa:
            fail_unless(s.n_reps >= 100, "n_reps must be at least 100");
            break;
        case ExperimentKind::delay:
            fail_unless(s.n_reps >= 1, "n_reps must be positive");
            break;
        case ExperimentKind::rate:
            fail_unless(s.n_reps >= 1, "n_reps must be positive");
            fail_unless(s.horizon >= 10'000, "rate horizon must be at least 10000");
            break;
        case ExperimentKind::delay_vs_arlfa:
            fail_unless(s.n_reps >= 100, "n_reps must be at least 100");
            fail_unless(!s.zeta_grid.empty(), "zeta_grid must be nonempty");
            for (double z : s.zeta_grid) fail_unless(z > 1.0 && std::isfinite(z), "zeta_grid values must exceed 1");
            break;
        case ExperimentKind::delay_vs_rate:
        case ExperimentKind::calibrate: {
            const std::uint64_t reps = s.kind == ExperimentKind::calibrate ? s.n_reps : s.search_reps;
            fail_unless(s.n_reps >= 100 && reps >= 100, "n_reps and search_reps must be at least 100");
            fail_unless(s.rate_reps >= 10, "rate_reps must be at least 10");
            fail_unless(s.cycle_reps >= 100, "cycle_reps must be at least 100");
            fail_unless(s.horizon >= 10'000, "rate horizon must be at least 10000");
            fail_unless(!s.a1_grid.empty() && !s.eps1_fractions.empty(), "search grids must be nonempty");
            for (double a1 : s.a1_grid) fail_unless(a1 > 0.0 && std::isfinite(a1), "a1_grid values must be positive");
            for (double f : s.eps1_fractions) fail_unless(f > 0.0 && f <= 1.0, "eps1_fractions must lie in (0, 1]");
            std::vector<double> budgets = s.kind == ExperimentKind::calibrate ? std::vector<double>{s.epsilon}
                                                                               : s.epsilon_grid;
            fail_unless(!budgets.empty(), "epsilon_grid must be nonempty");
            const double fmin = *std::min_element(s.eps1_fractions.begin(), s.eps1_fractions.end());
            for (double e : budgets) {
                fail_unless(e > 0.0 && e <= 1.0, "rate budgets must lie in (0, 1]");
                fail_unless(e * fmin > 1e-3, "smallest censoring rate epsilon * fraction must exceed 0.001");
            }
            break;
        }
    }
}

std::string to_ini(const ExperimentSpec& spec) {
    std::string out = "[" + spec.name + "]\n";
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(spec) + "\n";
    return out;
}

std::string to_ini(const RunConfig& config) {
    std::string out;
    if (config.seed) out += "seed = " + std::to_string(*config.seed) + "\n";
    for (const auto& e : config.experiments) out += "\n" + to_ini(e);
    return out;
}

std::string config_hash(const ExperimentSpec& spec) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(to_ini(spec))));
    return buf;
}

std::uint64_t experiment_seed(std::uint64_t run_seed, const std::string& name) {
    return derive_seed(run_seed, fnv1a(name));
}

TableSet run_experiment(const ExperimentSpec& spec, std::uint64_t run_seed) {
    validate(spec);
    const std::uint64_t seed = experiment_seed(run_seed, spec.name);
    switch (spec.kind) {
        case ExperimentKind::trace: return run_trace(spec, seed);
        case ExperimentKind::arlfa: return run_arlfa(spec, seed);
        case ExperimentKind::delay: return run_delay(spec, seed);
        case ExperimentKind::rate: return run_rate(spec, seed);
        case ExperimentKind::delay_vs_arlfa: return run_delay_vs_arlfa(spec, seed);
        case ExperimentKind::delay_vs_rate: return run_delay_vs_rate(spec, seed);
        case ExperimentKind::calibrate: return run_calibrate(spec, seed);
    }
    throw InvalidArgument("unknown experiment kind");
}

std::vector<std::filesystem::path> run(const RunConfig& config, const std::filesystem::path& out_dir) {
    if (config.experiments.empty()) return {};
    if (!config.seed) throw InvalidArgument("a seed is required (set 'seed' in the config or pass --seed)");
    std::set<std::string> stems;
    for (const auto& e : config.experiments) {
        validate(e);
        require(stems.insert(e.name).second && stems.insert(e.name + "_trace").second,
                "experiment names collide: " + e.name);
    }
    require(!stems.count("manifest"), "'manifest' is reserved");

    const auto start = std::chrono::steady_clock::now();
    std::vector<std::pair<std::string, CsvTable>> tables;
    for (const auto& e : config.experiments) {
        for (auto& t : run_experiment(e, *config.seed)) tables.push_back(std::move(t));
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;
    for (const auto& [stem, table] : tables) {
        const auto path = out_dir / (stem + ".csv");
        table.write(path);
        written.push_back(path);
    }
    std::ostringstream manifest;
    manifest << "; qcdsim " << QCD_VERSION << "\n; wall_time_s = " << format_double(wall)
             << "\n; threads = " << thread_count() << "\n"
             << to_ini(config);
    const auto mpath = out_dir / "manifest.ini";
    write_text(mpath, manifest.str());
    written.push_back(mpath);
    return written;
}

RunConfig reproduce_config(const std::string& figure, std::uint64_t seed, std::uint64_t n_reps) {
    RunConfig config;
    config.seed = seed;
    ExperimentSpec e;
    e.name = figure;
    e.sensors = 3;
    e.n_reps = n_reps;
    if (figure == "fig4" || figure == "fig5") {
        const bool high = figure == "fig4";
        e.kind = ExperimentKind::delay_vs_arlfa;
        e.detector = DetectorKind::cusum_ac;
        e.thresholds = {high ? 0.78 : 0.79};
        e.rates = {high ? 0.63 : 0.27};
        e.epsilon = high ? 0.7 : 0.4;
        e.zeta_grid = {1e3, 2e3, 5e3, 1e4, 2e4};
    } else if (figure == "fig6") {
        e.kind = ExperimentKind::delay_vs_rate;
        e.detector = DetectorKind::cusum_ac;
        e.zeta = 1e4;
    } else {
        throw InvalidArgument("unknown figure '" + figure + "' (expected fig4, fig5 or fig6)");
    }
    config.experiments.push_back(e);
    return config;
}

} // namespace qcd
