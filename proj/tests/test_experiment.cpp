#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "qcd/csv.hpp"
#include "qcd/error.hpp"
#include "qcd/experiment.hpp"

namespace {

namespace fs = std::filesystem;

qcd::RunConfig parse(const std::string& text) {
    std::istringstream in(text);
    return qcd::parse_config(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("qcd_test_" + name);
    fs::remove_all(dir);
    return dir;
}

const qcd::CsvTable& table(const qcd::TableSet& set, const std::string& stem) {
    for (const auto& [s, t] : set) {
        if (s == stem) return t;
    }
    throw std::runtime_error("missing table " + stem);
}

std::size_t column(const qcd::CsvTable& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header().size(); ++i) {
        if (t.header()[i] == name) return i;
    }
    throw std::runtime_error("missing column " + name);
}

TEST(Config, ParsesSectionsAndDefaults) {
    const auto c = parse("seed = 7\n[fast]\nkind = arlfa\nsensors = 3\ndetector = cusum_ac\n"
                         "thresholds = 2.0, 0.79\nrates = 0.5, 0.27\n");
    ASSERT_TRUE(c.seed);
    EXPECT_EQ(*c.seed, 7u);
    ASSERT_EQ(c.experiments.size(), 1u);
    const auto& e = c.experiments[0];
    EXPECT_EQ(e.name, "fast");
    EXPECT_EQ(e.kind, qcd::ExperimentKind::arlfa);
    EXPECT_EQ(e.sensors, 3u);
    EXPECT_EQ(e.thresholds, (std::vector<double>{2.0, 0.79}));
    EXPECT_EQ(e.rates, (std::vector<double>{0.5, 0.27}));
    EXPECT_EQ(e.n_reps, 2000u);
    EXPECT_EQ(e.mu1, 0.5);
}

TEST(Config, RejectsMalformedInput) {
    EXPECT_THROW(parse("[x]\nkind = arlfa\nbogus = 1\n"), qcd::InvalidArgument);
    EXPECT_THROW(parse("[x]\nsensors = 3\n"), qcd::InvalidArgument);
    EXPECT_THROW(parse("[x]\nkind = nope\n"), qcd::InvalidArgument);
    EXPECT_THROW(parse("[x]\nkind = arlfa\nsensors = -2\n"), qcd::InvalidArgument);
    EXPECT_THROW(parse("[x]\nkind = arlfa\na = abc\n"), qcd::InvalidArgument);
    EXPECT_THROW(parse("color = red\n"), qcd::InvalidArgument);
    EXPECT_THROW(parse("[x\nkind = arlfa\n"), qcd::InvalidArgument);
    EXPECT_THROW(qcd::load_config("/nonexistent/dir/cfg.ini"), qcd::InvalidArgument);
}

TEST(Config, ResolvedTextRoundTrips) {
    const auto c = parse("seed = 3\n[a]\nkind = delay\nnu = 20\ndelay_mode = worst_case\n"
                         "[b]\nkind = rate\ndetector = random_tx\nepsilon = 0.4\nrate_mode = conditional\n");
    const std::string text = qcd::to_ini(c);
    const auto back = parse(text);
    EXPECT_EQ(qcd::to_ini(back), text);
    ASSERT_EQ(back.experiments.size(), 2u);
    EXPECT_EQ(back.experiments[0].delay_mode, qcd::DelayMode::worst_case);
    EXPECT_EQ(back.experiments[1].rate_mode, qcd::RateMode::conditional);
    EXPECT_EQ(qcd::config_hash(back.experiments[0]), qcd::config_hash(c.experiments[0]));
}

TEST(Config, HashTracksResolvedContent) {
    qcd::ExperimentSpec e;
    e.name = "h";
    e.kind = qcd::ExperimentKind::arlfa;
    const std::string h = qcd::config_hash(e);
    EXPECT_EQ(h.size(), 16u);
    EXPECT_EQ(h.find_first_not_of("0123456789abcdef"), std::string::npos);
    e.a = 4.6;
    EXPECT_NE(qcd::config_hash(e), h);
}

TEST(Config, ExperimentSeedsDifferByName) {
    EXPECT_NE(qcd::experiment_seed(1, "a"), qcd::experiment_seed(1, "b"));
    EXPECT_EQ(qcd::experiment_seed(1, "a"), qcd::experiment_seed(1, "a"));
    EXPECT_NE(qcd::experiment_seed(1, "a"), qcd::experiment_seed(2, "a"));
}

TEST(Validate, RejectsOutOfRangeFields) {
    auto base = [] {
        qcd::ExperimentSpec e;
        e.name = "v";
        e.kind = qcd::ExperimentKind::arlfa;
        e.n_reps = 200;
        return e;
    };
    EXPECT_NO_THROW(qcd::validate(base()));
    auto e = base();
    e.name = "bad name";
    EXPECT_THROW(qcd::validate(e), qcd::InvalidArgument);
    e = base();
    e.sigma = 0.0;
    EXPECT_THROW(qcd::validate(e), qcd::InvalidArgument);
    e = base();
    e.detector = qcd::DetectorKind::random_tx;
    e.epsilon = 0.0;
    EXPECT_THROW(qcd::validate(e), qcd::InvalidArgument);
    e = base();
    e.nu = 0;
    EXPECT_THROW(qcd::validate(e), qcd::InvalidArgument);
    e = base();
    e.detector = qcd::DetectorKind::cusum_ac;
    e.rates = {0.2, 0.1};
    EXPECT_THROW(qcd::validate(e), qcd::InvalidArgument);
    e = base();
    e.n_reps = 10;
    EXPECT_THROW(qcd::validate(e), qcd::InvalidArgument);
    e = base();
    e.kind = qcd::ExperimentKind::rate;
    e.horizon = 100;
    EXPECT_THROW(qcd::validate(e), qcd::InvalidArgument);
}

TEST(Run, SeedIsRequired) {
    auto c = parse("[x]\nkind = arlfa\nn_reps = 100\n");
    EXPECT_THROW(qcd::run(c, fresh_dir("noseed")), qcd::InvalidArgument);
}

TEST(Run, EmptyConfigWritesNothing) {
    const auto dir = fresh_dir("empty");
    EXPECT_TRUE(qcd::run(qcd::RunConfig{}, dir).empty());
    EXPECT_FALSE(fs::exists(dir));
}

TEST(Run, ManifestRerunIsBitIdentical) {
    const auto c = parse("seed = 11\n[arl]\nkind = arlfa\nsensors = 3\ndetector = cusum_ac\na = 3\nn_reps = 200\n"
                         "[rt]\nkind = delay\ndetector = random_tx\nepsilon = 0.5\nn_reps = 200\n");
    const auto dir1 = fresh_dir("m1");
    const auto written = qcd::run(c, dir1);
    ASSERT_EQ(written.size(), 3u);
    ASSERT_TRUE(fs::exists(dir1 / "manifest.ini"));
    const auto rerun = qcd::load_config(dir1 / "manifest.ini");
    const auto dir2 = fresh_dir("m2");
    qcd::run(rerun, dir2);
    for (const char* stem : {"arl.csv", "rt.csv"}) EXPECT_EQ(slurp(dir1 / stem), slurp(dir2 / stem)) << stem;
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST(Run, ResultsIndependentOfThreadCount) {
    qcd::ExperimentSpec e;
    e.name = "t";
    e.kind = qcd::ExperimentKind::delay;
    e.sensors = 3;
    e.detector = qcd::DetectorKind::cusum_ac;
    e.n_reps = 300;
    const auto saved = qcd::thread_count();
    qcd::set_thread_count(1);
    const auto one = qcd::run_experiment(e, 5);
    qcd::set_thread_count(3);
    const auto three = qcd::run_experiment(e, 5);
    qcd::set_thread_count(saved);
    EXPECT_EQ(one.front().second.str(), three.front().second.str());
}

TEST(Run, RejectsCollidingOutputNames) {
    auto c = parse("seed = 1\n[manifest]\nkind = arlfa\nn_reps = 100\n");
    EXPECT_THROW(qcd::run(c, fresh_dir("collide")), qcd::InvalidArgument);
}

TEST(Trace, ChangeAtSlotSixty) {
    qcd::ExperimentSpec e;
    e.name = "trace";
    e.kind = qcd::ExperimentKind::trace;
    e.a = 4.5;
    e.nu = 60;
    const auto set = qcd::run_experiment(e, 1);
    const auto& t = table(set, "trace");
    EXPECT_EQ(t.header(), (std::vector<std::string>{"k", "s", "level", "sent", "stopped"}));
    ASSERT_FALSE(t.rows().empty());
    for (std::size_t i = 0; i < t.rows().size(); ++i) {
        EXPECT_EQ(t.rows()[i][0], std::to_string(i + 1));
        EXPECT_GE(qcd::parse_double(t.rows()[i][1]), 0.0);
    }
    const auto& last = t.rows().back();
    if (last[4] == "1") EXPECT_GT(qcd::parse_double(last[1]), 4.5);
}

TEST(Tables, ArlfaAndRateColumns) {
    qcd::ExperimentSpec e;
    e.name = "r";
    e.kind = qcd::ExperimentKind::rate;
    e.sensors = 3;
    e.detector = qcd::DetectorKind::cusum_ac;
    e.rate_reps = 10;
    const auto set = qcd::run_experiment(e, 2);
    const auto& t = table(set, "r");
    const double rate = qcd::parse_double(t.rows().at(0).at(column(t, "rate")));
    EXPECT_GT(rate, 0.27);
    EXPECT_LT(rate, 1.0);
    EXPECT_EQ(t.rows()[0][column(t, "config_hash")], qcd::config_hash(e));
}

TEST(Tables, SmallDelayVsRateSweep) {
    qcd::ExperimentSpec e;
    e.name = "dvr";
    e.kind = qcd::ExperimentKind::delay_vs_rate;
    e.sensors = 3;
    e.zeta = 300;
    e.epsilon_grid = {0.3, 1.0};
    e.a1_grid = {0.5, 1.5};
    e.eps1_fractions = {0.3, 0.6};
    e.n_reps = 300;
    e.search_reps = 150;
    e.rate_reps = 20;
    e.cycle_reps = 200;
    const auto set = qcd::run_experiment(e, 3);
    const auto& t = table(set, "dvr");
    // one cusum_ac and one random_tx row per budget, then the full-rate reference
    ASSERT_EQ(t.rows().size(), 5u);
    EXPECT_EQ(t.rows().back()[column(t, "detector")], "cusum");
    const std::size_t delay = column(t, "delay");
    const double ac = qcd::parse_double(t.rows()[0][delay]);
    const double rt = qcd::parse_double(t.rows()[1][delay]);
    const double cusum = qcd::parse_double(t.rows().back()[delay]);
    EXPECT_GT(rt, ac);
    EXPECT_GT(ac, cusum * 0.9);
}

TEST(Reproduce, CannedConfigs) {
    const auto f4 = qcd::reproduce_config("fig4", 1, 100);
    ASSERT_EQ(f4.experiments.size(), 1u);
    EXPECT_EQ(f4.experiments[0].rates, (std::vector<double>{0.63}));
    EXPECT_EQ(f4.experiments[0].epsilon, 0.7);
    EXPECT_EQ(f4.experiments[0].n_reps, 100u);
    const auto f5 = qcd::reproduce_config("fig5", 1);
    EXPECT_EQ(f5.experiments[0].thresholds, (std::vector<double>{0.79}));
    EXPECT_EQ(qcd::reproduce_config("fig6", 2).experiments[0].kind, qcd::ExperimentKind::delay_vs_rate);
    EXPECT_THROW(qcd::reproduce_config("fig9", 1), qcd::InvalidArgument);
    for (const char* f : {"fig4", "fig5", "fig6"}) EXPECT_NO_THROW(qcd::validate(qcd::reproduce_config(f, 1).experiments[0]));
}

} // namespace
