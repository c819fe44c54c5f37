#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "betkit/datastore.hpp"
#include "betkit/harness.hpp"

using namespace betkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("betkit_ut_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig small_gaussian() {
    ExperimentConfig cfg;
    cfg.experiment = Experiment::synthetic_gaussian;
    cfg.test = TestKind::skit;
    cfg.reps = 4;
    cfg.tau_max = 200;
    cfg.betas = {0.0, 2.0};
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST(Harness, ParseRoundTrip) {
    for (auto e : {Experiment::synthetic_gaussian, Experiment::synthetic_counting, Experiment::global,
                   Experiment::global_cond, Experiment::local})
        EXPECT_EQ(parse_experiment(to_string(e)), e);
    for (auto t : {TestKind::skit, TestKind::cskit, TestKind::xskit}) EXPECT_EQ(parse_test_kind(to_string(t)), t);
    EXPECT_THROW(parse_experiment("nope"), ConfigError);
    EXPECT_THROW(parse_test_kind("nope"), ConfigError);
}

TEST(Harness, ModeDefaults) {
    ExperimentConfig cfg;
    EXPECT_EQ(cfg.resolved_tau_max(), 1000u);
    EXPECT_EQ(cfg.resolved_bandwidth_q(), 0.5);
    cfg.experiment = Experiment::synthetic_counting;
    EXPECT_EQ(cfg.resolved_tau_max(), 800u);
    cfg.experiment = Experiment::global;
    EXPECT_EQ(cfg.resolved_tau_max(), 400u);
    EXPECT_EQ(cfg.resolved_bandwidth_q(), 0.9);
    EXPECT_EQ(cfg.resolved_test(), TestKind::skit);
    cfg.experiment = Experiment::global_cond;
    EXPECT_EQ(cfg.resolved_tau_max(), 800u);
    EXPECT_EQ(cfg.resolved_test(), TestKind::cskit);
    cfg.experiment = Experiment::local;
    EXPECT_EQ(cfg.resolved_tau_max(), 400u);
    EXPECT_EQ(cfg.resolved_test(), TestKind::xskit);
}

TEST(Harness, ValidateRejectsBadConfig) {
    auto cfg = small_gaussian();
    cfg.alpha = 1.5;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_gaussian();
    cfg.kernel = "poly";
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_gaussian();
    cfg.reps = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_gaussian();
    cfg.experiment = Experiment::global;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Harness, DeterministicAcrossThreadCounts) {
    auto cfg = small_gaussian();
    cfg.threads = 1;
    const auto a = run_experiment(cfg);
    cfg.threads = 4;
    const auto b = run_experiment(cfg);
    EXPECT_EQ(results_csv(a), results_csv(b));
    ASSERT_EQ(a.settings.size(), 2u);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t c = 0; c < a.settings[s].outcomes.size(); ++c)
            for (std::size_t r = 0; r < cfg.reps; ++r)
                EXPECT_EQ(a.settings[s].outcomes[c][r].wealth_trajectory,
                          b.settings[s].outcomes[c][r].wealth_trajectory);
}

TEST(Harness, RowsCoverSettingsAndConcepts) {
    const auto res = run_experiment(small_gaussian());
    EXPECT_EQ(res.rows.size(), 6u);
    EXPECT_EQ(res.rows.front().setting, "beta2=0");
    for (const auto& row : res.rows) {
        EXPECT_GE(row.rejection_rate, 0.0);
        EXPECT_LE(row.rejection_rate, 1.0);
        EXPECT_GE(row.fdr_rank, 1u);
        EXPECT_LE(row.fdr_rank, 3u);
    }
}

TEST(Harness, OutputsAndCompare) {
    const auto dir = scratch_dir("harness_out");
    auto cfg = small_gaussian();
    cfg.out = dir;
    cfg.plot = true;
    const auto res = run_experiment(cfg);
    write_outputs(cfg, res);
    ASSERT_TRUE(fs::exists(dir / "results.csv"));
    ASSERT_TRUE(fs::exists(dir / "wealth.svg"));
    std::ifstream run_json(dir / "run.json");
    const auto meta = nlohmann::json::parse(run_json);
    EXPECT_TRUE(meta.contains("betkit_version"));
    EXPECT_EQ(meta["config"]["reps"], 4);

    const auto rows = read_results_csv(dir / "results.csv");
    ASSERT_EQ(rows.size(), res.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].concept_name, res.rows[i].concept_name);
        EXPECT_NEAR(rows[i].rejection_rate, res.rows[i].rejection_rate, 1e-6);
        EXPECT_EQ(rows[i].fdr_rank, res.rows[i].fdr_rank);
    }
    const auto self = compare_ranks(rows, rows, 0.05, "beta2=2", std::set<std::string>{"z1", "z2", "z3"});
    EXPECT_EQ(self.setting, "beta2=2");
    EXPECT_DOUBLE_EQ(self.tau_a_vs_b, 1.0);
    EXPECT_DOUBLE_EQ(self.agreement, 1.0);
    ASSERT_TRUE(self.f1_a.has_value());
    EXPECT_THROW(compare_ranks(rows, rows, 0.05, "missing"), ConfigError);
}

TEST(Harness, CompareDetectsDisagreement) {
    std::vector<ConceptRow> a{{"s", "x", 1.0, 0.1, 1, 1.0}, {"s", "y", 0.5, 0.5, 2, 0.5}, {"s", "z", 0.0, 1.0, 3, 0.0}};
    std::vector<ConceptRow> b{{"s", "x", 0.6, 0.4, 2, 0.5}, {"s", "y", 1.0, 0.1, 1, 1.0}, {"s", "z", 0.0, 1.0, 3, 0.0}};
    const auto rep = compare_ranks(a, b, 0.05, "", std::set<std::string>{"x"});
    EXPECT_NEAR(rep.tau_a_vs_b, 0.1818181818181818, 1e-12);
    EXPECT_DOUBLE_EQ(rep.agreement, 1.0);
    EXPECT_NEAR(*rep.f1_a, 2.0 / 3.0, 1e-12);
}

TEST(Harness, ThreadOverride) {
    ::setenv("BETKIT_THREADS", "3", 1);
    EXPECT_EQ(resolve_threads(8), 3u);
    ::setenv("BETKIT_THREADS", "x", 1);
    EXPECT_THROW(resolve_threads(8), ConfigError);
    ::unsetenv("BETKIT_THREADS");
    EXPECT_EQ(resolve_threads(2), 2u);
    EXPECT_GE(resolve_threads(0), 1u);
}

TEST(Harness, ToyGlobalRuns) {
    const auto dir = scratch_dir("harness_toy");
    save_dataset(dir / "m.json", make_toy_dataset(300, 12, 4, 2, 5));
    ExperimentConfig cfg;
    cfg.experiment = Experiment::global;
    cfg.manifest = (dir / "m.json").string();
    cfg.reps = 2;
    cfg.tau_max = 100;
    const auto res = run_experiment(cfg);
    ASSERT_EQ(res.settings.size(), 1u);
    EXPECT_EQ(res.settings[0].name, "target");
    EXPECT_EQ(res.rows.size(), 4u);
    cfg.concept_name = "concept_1";
    EXPECT_EQ(run_experiment(cfg).rows.size(), 1u);
    cfg.concept_name = "missing";
    EXPECT_THROW(run_experiment(cfg), ConfigError);
}
