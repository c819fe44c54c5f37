#include <gtest/gtest.h>

#include <cmath>

#include "betkit/multiplicity.hpp"

using namespace betkit;

TEST(GreedyFdr, HandTrace) {
    // m = 3, alpha = 0.05: thresholds log 60, log 30, log 20 over rounds 1..3.
    ConceptTrajectories t;
    t.alpha = 0.05;
    t.log_wealth = {
        {0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0},
        {0.5, 1.0, 2.0, 2.5, 3.0, 3.2, 3.5, 3.5},
        {1.0, 2.0, 3.0, 4.2, 4.3, 4.3, 4.3, 4.3},
    };
    const auto r = greedy_fdr(t);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r.rejected[0].concept_id, 2u);
    EXPECT_EQ(r.rejected[0].adjusted_tau, 4u);
    EXPECT_EQ(r.rejected[1].concept_id, 1u);
    EXPECT_EQ(r.rejected[1].adjusted_tau, 7u);
    EXPECT_EQ(r.is_rejected, (std::vector<bool>{false, true, true}));
    EXPECT_TRUE(is_self_consistent(t, r));
}

TEST(GreedyFdr, TiesPreferWealthThenIndex) {
    ConceptTrajectories t;
    t.alpha = 0.5;  // m = 2: thresholds log 4, log 2
    t.log_wealth = {{0.0, 1.5}, {0.0, 2.0}};
    auto r = greedy_fdr(t);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r.rejected[0].concept_id, 1u);
    t.log_wealth = {{0.0, 2.0}, {0.0, 2.0}};
    r = greedy_fdr(t);
    EXPECT_EQ(r.rejected[0].concept_id, 0u);
}

TEST(GreedyFdr, NothingCrosses) {
    ConceptTrajectories t;
    t.log_wealth = {{0.0, 1.0}, {2.0, 2.5}};
    const auto r = greedy_fdr(t);
    EXPECT_EQ(r.size(), 0u);
    EXPECT_TRUE(is_self_consistent(t, r));
}

TEST(GreedyFdr, SelfConsistencyDetectsBadSet) {
    ConceptTrajectories t;
    t.log_wealth = {{0.0}, {10.0}};
    RankOutput bogus;
    bogus.rejected = {{0, 1, 0.0}};
    bogus.is_rejected = {true, false};
    EXPECT_FALSE(is_self_consistent(t, bogus));
}

TEST(GreedyFdr, Validates) {
    ConceptTrajectories t;
    EXPECT_THROW(greedy_fdr(t), ConfigError);
    t.log_wealth = {{0.0}};
    t.alpha = 1.0;
    EXPECT_THROW(greedy_fdr(t), ConfigError);
}

TEST(Aggregate, RateAndTau) {
    std::vector<TestOutcome> o(2);
    o[0].rejected = true;
    o[0].normalized_tau = 0.2;
    o[1].rejected = false;
    o[1].normalized_tau = 0.7;  // ignored: non-rejections count as 1
    const auto s = aggregate_outcomes(o);
    EXPECT_DOUBLE_EQ(s.rejection_rate, 0.5);
    EXPECT_DOUBLE_EQ(s.mean_normalized_tau, 0.6);
}

TEST(Agreement, WeightedKendallTau) {
    const std::vector<std::size_t> ref{0, 1, 2};
    EXPECT_DOUBLE_EQ(weighted_kendall_tau(ref, ref), 1.0);
    EXPECT_NEAR(weighted_kendall_tau(ref, std::vector<std::size_t>{1, 0, 2}), 0.1818181818181818, 1e-15);
    EXPECT_NEAR(weighted_kendall_tau(ref, std::vector<std::size_t>{0, 2, 1}), 0.5454545454545455, 1e-15);
    EXPECT_DOUBLE_EQ(weighted_kendall_tau(ref, std::vector<std::size_t>{2, 1, 0}), -1.0);
    EXPECT_THROW(weighted_kendall_tau(ref, std::vector<std::size_t>{0, 0, 1}), ConfigError);
}

TEST(Agreement, ImportanceAndF1) {
    const std::vector<double> a{0.9, 0.0, 0.3, 0.01}, b{0.8, 0.2, 0.0, 0.02};
    EXPECT_DOUBLE_EQ(importance_agreement(a, b, 0.05), 0.5);
    EXPECT_NEAR(importance_f1({1}, {1, 2}, 4), 2.0 / 3.0, 1e-15);
    EXPECT_EQ(importance_f1({0}, {1}, 4), 0.0);
    EXPECT_THROW(importance_f1({5}, {1}, 4), ConfigError);
}
