#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "qcd/calibration.hpp"
#include "qcd/error.hpp"
#include "qcd/montecarlo.hpp"

namespace {

using qcd::CusumAcDetector;
using qcd::CusumDetector;
using qcd::RandomTxDetector;

double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

qcd::Network network(std::size_t m, double mu1 = 0.5) {
    return qcd::Network(m, qcd::gaussian_mean_shift(0.0, mu1, 1.0));
}

bool same(const qcd::McEstimate& a, const qcd::McEstimate& b) {
    return a.mean == b.mean && a.std_error == b.std_error && a.n_reps == b.n_reps &&
           a.truncated_reps == b.truncated_reps;
}

TEST(Summarize, MeanAndStandardError) {
    const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    const auto e = qcd::summarize(v, 5);
    EXPECT_DOUBLE_EQ(e.mean, 2.5);
    EXPECT_DOUBLE_EQ(e.std_error, std::sqrt((1.25 * 4 / 3) / 4));
    EXPECT_EQ(e.n_reps, 4u);
    EXPECT_EQ(e.seed, 5u);
    EXPECT_EQ(qcd::summarize(std::vector<double>{7.0}, 0).std_error, 0.0);
}

TEST(ZScore, SignAndDegenerateCases) {
    qcd::McEstimate a{3.0, 0.3}, b{2.0, 0.4};
    EXPECT_DOUBLE_EQ(qcd::z_score(a, b), 2.0);
    EXPECT_DOUBLE_EQ(qcd::z_score(b, a), -2.0);
    EXPECT_EQ(qcd::z_score(qcd::McEstimate{1.0, 0.0}, qcd::McEstimate{1.0, 0.0}), 0.0);
    EXPECT_TRUE(std::isinf(qcd::z_score(qcd::McEstimate{2.0, 0.0}, qcd::McEstimate{1.0, 0.0})));
}

TEST(Determinism, RerunsAreBitIdentical) {
    const auto net = network(3);
    const auto ac = CusumAcDetector{qcd::make_cusum_ac(net, 5.0, 0.79, 0.27)};
    EXPECT_TRUE(same(qcd::estimate_arlfa(ac, net, 300, 100000, 17), qcd::estimate_arlfa(ac, net, 300, 100000, 17)));
    EXPECT_TRUE(same(qcd::estimate_delay(ac, net, 300, 17), qcd::estimate_delay(ac, net, 300, 17)));
    EXPECT_TRUE(same(qcd::estimate_comm_rate(ac, net, 2000, 20, 17), qcd::estimate_comm_rate(ac, net, 2000, 20, 17)));
    EXPECT_FALSE(same(qcd::estimate_delay(ac, net, 300, 17), qcd::estimate_delay(ac, net, 300, 18)));
}

TEST(Determinism, ThreadCountDoesNotChangeResults) {
    const auto net = network(3);
    const auto ac = CusumAcDetector{qcd::make_cusum_ac(net, 5.0, 0.79, 0.27)};
    const RandomTxDetector rt{4.0, 0.5};
    const std::size_t saved = qcd::thread_count();
    qcd::set_thread_count(1);
    const auto a1 = qcd::estimate_arlfa(ac, net, 200, 100000, 3);
    const auto d1 = qcd::estimate_delay(rt, net, 200, 3);
    const auto r1 = qcd::estimate_comm_rate(ac, net, 2000, 20, 3, qcd::RateMode::conditional);
    qcd::set_thread_count(4);
    const auto a4 = qcd::estimate_arlfa(ac, net, 200, 100000, 3);
    const auto d4 = qcd::estimate_delay(rt, net, 200, 3);
    const auto r4 = qcd::estimate_comm_rate(ac, net, 2000, 20, 3, qcd::RateMode::conditional);
    qcd::set_thread_count(saved);
    EXPECT_TRUE(same(a1, a4));
    EXPECT_TRUE(same(d1, d4));
    EXPECT_TRUE(same(r1, r4));
}

TEST(Arlfa, TinyThresholdIsGeometric) {
    // The first positive LLR raises the alarm, so T is geometric with P0(llr > 0).
    const auto e = qcd::estimate_arlfa(CusumDetector{1e-12}, network(1), 20000, 1000, 1);
    const double expected = 1.0 / (1.0 - Phi(0.25));
    EXPECT_NEAR(expected, 2.492, 1e-3);
    EXPECT_LE(std::abs(e.mean - expected), 3 * e.std_error);
}

TEST(Delay, TinyThresholdIsGeometric) {
    const auto e = qcd::estimate_delay(CusumDetector{1e-12}, network(1), 20000, 2);
    const double expected = 1.0 / Phi(0.25);
    EXPECT_LE(std::abs(e.mean - expected), 3 * e.std_error);
}

TEST(Arlfa, CalibratedThresholdHitsTargetOnFreshReplications) {
    const auto net = network(1);
    const auto cal = qcd::calibrate_threshold(CusumDetector{1.0}, net, 1e3, 4);
    const auto fresh = qcd::estimate_arlfa(CusumDetector{cal.a}, net, 2000, 100000, 5);
    EXPECT_LE(std::abs(fresh.mean - 1e3), 3 * fresh.std_error) << cal.a;
}

TEST(Arlfa, TruncationIsCounted) {
    const auto e = qcd::estimate_arlfa(CusumDetector{20.0}, network(1), 100, 100, 6);
    EXPECT_EQ(e.truncated_reps, 100u);
    EXPECT_DOUBLE_EQ(e.mean, 100.0);
}

TEST(Delay, WorstCaseHistoryEqualizesChangeTime) {
    const auto net = network(3);
    for (auto [a1, eps1] : {std::pair{0.79, 0.27}, std::pair{1.5, 0.05}}) {
        const CusumAcDetector ac{qcd::make_cusum_ac(net, 6.0, a1, eps1)};
        const auto d1 = qcd::estimate_delay(ac, net, 5000, 30, 1);
        const auto d20 = qcd::estimate_worst_case_delay(ac, net, 5000, 31, 20);
        EXPECT_LE(std::abs(qcd::z_score(d1, d20)), 3.0) << a1 << " " << d1.mean << " " << d20.mean;
    }
}

TEST(Delay, StationaryHistoryDoesNotSlowDetection) {
    // Averaging over pre-change histories can only help relative to starting at zero.
    const auto net = network(3);
    const CusumAcDetector ac{qcd::make_cusum_ac(net, 6.0, 0.79, 0.27)};
    const auto d1 = qcd::estimate_delay(ac, net, 5000, 32, 1);
    const auto d20 = qcd::estimate_delay(ac, net, 5000, 33, 20);
    EXPECT_LE(qcd::z_score(d20, d1), 3.0);
}

TEST(Delay, WorstCaseAtFirstSlotEqualsPlainDelay) {
    const auto net = network(1);
    const auto a = qcd::estimate_delay(CusumDetector{3.0}, net, 500, 34, 1);
    const auto b = qcd::estimate_worst_case_delay(CusumDetector{3.0}, net, 500, 34, 1);
    EXPECT_TRUE(same(a, b));
}

TEST(Delay, DecreasesWithDivergence) {
    const auto slow = qcd::estimate_delay(CusumDetector{6.0}, network(1, 0.5), 3000, 7);
    const auto fast = qcd::estimate_delay(CusumDetector{6.0}, network(1, 1.0), 3000, 7);
    EXPECT_GT(qcd::z_score(slow, fast), 3.0);
}

TEST(Rate, FullRateCensoredLevelSendsEverything) {
    const auto net = network(3);
    const CusumAcDetector ac{qcd::make_cusum_ac(net, 6.0, 0.79, 1.0)};
    const auto r = qcd::estimate_comm_rate(ac, net, 10000, 20, 8);
    EXPECT_EQ(r.mean, 1.0);
    EXPECT_EQ(qcd::estimate_comm_rate(CusumDetector{6.0}, net, 1000, 5, 8).mean, 1.0);
}

TEST(Rate, UnreachableResetLevelSendsAtCensoredRate) {
    const auto net = network(2);
    const CusumAcDetector ac{qcd::make_cusum_ac(net, 2e6, 1e6, 0.3)};
    const auto r = qcd::estimate_comm_rate(ac, net, 10000, 50, 9);
    EXPECT_LE(std::abs(r.mean - 0.3), 3 * r.std_error + 1e-9);
}

TEST(Rate, RandomTransmissionMatchesEpsilon) {
    const auto r = qcd::estimate_comm_rate(RandomTxDetector{5.0, 0.35}, network(3), 10000, 40, 10);
    EXPECT_LE(std::abs(r.mean - 0.35), 3 * r.std_error);
}

TEST(Rate, MatchesManualFusedRecursion) {
    const auto net = network(3);
    const auto config = qcd::make_cusum_ac(net, std::numeric_limits<double>::infinity(), 0.79, 0.27);
    const std::uint64_t horizon = 3000, reps = 5, seed = 11;
    const auto r = qcd::estimate_comm_rate(CusumAcDetector{config}, net, horizon, reps, seed);
    std::vector<double> manual;
    std::vector<double> xs(3);
    for (std::uint64_t i = 0; i < reps; ++i) {
        qcd::Rng rng = qcd::stream(seed, i);
        auto st = qcd::initial_state(config);
        for (std::uint64_t k = 0; k < horizon; ++k) {
            for (std::size_t m = 0; m < 3; ++m) xs[m] = net[m].sample0(rng);
            st = qcd::cusum_ac_multi_step(st, config, xs, net).first;
        }
        manual.push_back(static_cast<double>(st.tx_count) / (3.0 * horizon));
    }
    EXPECT_EQ(r.mean, qcd::summarize(manual, seed).mean);
}

TEST(Rate, BoundedByCensoredRateAndOne) {
    const auto net = network(3);
    for (double eps1 : {0.1, 0.5, 0.9}) {
        const CusumAcDetector ac{qcd::make_cusum_ac(net, 8.0, 0.79, eps1)};
        const auto r = qcd::estimate_comm_rate(ac, net, 10000, 20, 12);
        EXPECT_GE(r.mean, eps1 - 3 * r.std_error);
        EXPECT_LE(r.mean, 1.0);
    }
}

TEST(Rate, ConditionalModeNeedsSurvivors) {
    const auto net = network(1);
    EXPECT_THROW(qcd::estimate_comm_rate(CusumDetector{0.5}, net, 10000, 10, 13, qcd::RateMode::conditional),
                 qcd::Infeasible);
}

TEST(Rate, RejectsBadArguments) {
    const auto net = network(1);
    EXPECT_THROW(qcd::estimate_comm_rate(CusumDetector{1.0}, net, 0, 10, 1), qcd::InvalidArgument);
    EXPECT_THROW(qcd::estimate_comm_rate(CusumDetector{1.0}, net, 10, 0, 1), qcd::InvalidArgument);
}

TEST(PreChange, DiagnosticsAreConsistent) {
    const auto net = network(3);
    const CusumAcDetector ac{qcd::make_cusum_ac(net, 5.0, 0.79, 0.27)};
    const auto rep = qcd::estimate_prechange(ac, net, 500, 1'000'000, 14);
    const auto arl = qcd::estimate_arlfa(ac, net, 500, 1'000'000, 14);
    EXPECT_TRUE(same(rep.arlfa, arl));
    EXPECT_GE(rep.frac_time_above_a1.mean, 0.0);
    EXPECT_LE(rep.frac_time_above_a1.mean, 1.0);
    EXPECT_GT(rep.up_crossings.mean, 1.0);
    // every reset onto a_1 and every fall below it is one level switch
    EXPECT_GE(rep.feedback_per_alarm.mean, 2 * rep.up_crossings.mean - 1.0);
}

TEST(RandomTx, SlowerThanCusumAcAtMatchedFalseAlarmRate) {
    const auto net = network(3);
    const double zeta = 1e4;
    qcd::ThresholdOptions opt;
    opt.n_reps = 1000;
    const auto ac_cal =
        qcd::calibrate_threshold(CusumAcDetector{qcd::make_cusum_ac(net, 10.0, 0.79, 0.27)}, net, zeta, 15, opt);
    const auto rt_cal = qcd::calibrate_threshold(RandomTxDetector{10.0, 0.5}, net, zeta, 16, opt);
    const CusumAcDetector ac{qcd::make_cusum_ac(net, ac_cal.a, 0.79, 0.27)};
    const RandomTxDetector rt{rt_cal.a, 0.5};
    const auto rate = qcd::estimate_comm_rate(ac, net, 10000, 20, 17);
    EXPECT_LE(rate.mean, 0.5);
    const auto d_ac = qcd::estimate_delay(ac, net, 2000, 18);
    const auto d_rt = qcd::estimate_delay(rt, net, 2000, 19);
    EXPECT_GT(qcd::z_score(d_rt, d_ac), 3.0) << d_rt.mean << " vs " << d_ac.mean;
}

TEST(DetectorSpec, ThresholdHelpers) {
    const auto net = network(1);
    const qcd::DetectorSpec c = CusumDetector{3.0};
    EXPECT_EQ(qcd::threshold_of(qcd::with_threshold(c, 5.0)), 5.0);
    EXPECT_EQ(qcd::detector_name(c), "cusum");
    EXPECT_THROW(qcd::validate(qcd::DetectorSpec{RandomTxDetector{3.0, 1.5}}, net), qcd::InvalidArgument);
    EXPECT_THROW(qcd::validate(qcd::DetectorSpec{CusumDetector{-1.0}}, net), qcd::InvalidArgument);
}

} // namespace
