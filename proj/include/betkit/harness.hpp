#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "betkit/multiplicity.hpp"
#include "betkit/testers.hpp"

namespace betkit {

enum class Experiment { synthetic_gaussian, synthetic_counting, global, global_cond, local };
enum class TestKind { skit, cskit, xskit };

std::string_view to_string(Experiment e);
std::string_view to_string(TestKind t);
Experiment parse_experiment(std::string_view s);
TestKind parse_test_kind(std::string_view s);

struct ExperimentConfig {
    Experiment experiment = Experiment::synthetic_gaussian;
    /// Which test the synthetic experiments run; real-data modes imply their own.
    TestKind test = TestKind::skit;
    double alpha = 0.05;
    /// Defaults per mode: 1000 (Gaussian), 800 (counting, global-cond), 400 (global, local).
    std::optional<std::size_t> tau_max;
    /// "rbf" or "linear".
    std::string kernel = "rbf";
    /// Pairwise-distance quantile for rbf bandwidths; 0.5 on synthetic data, 0.9 otherwise.
    std::optional<double> bandwidth_q;
    /// Constant betting fraction; online Newton step when unset.
    std::optional<double> bet_fraction;
    std::size_t reps = 100;
    std::uint64_t seed = 0;
    /// Swept coefficient: beta2 for SKIT, beta1 for c-SKIT.
    std::vector<double> betas{0.0, 0.5, 1.0, 2.0};
    /// Observed z3 values for the synthetic local test.
    std::vector<double> z3_values{-0.5, 0.0, 0.5};
    /// Size of the random conditioning set in local mode.
    std::size_t cond_size = 1;
    std::string manifest;
    /// Restrict testing to one concept (all when empty).
    std::string concept_name;
    /// Target class (first class when empty).
    std::string class_name;
    /// Explained sample for local mode: an id from the manifest or a row index.
    std::string sample_id;
    /// Effective number of points in the weighted KDE samplers (clipped to the row count).
    double neff = 2000.0;
    std::filesystem::path out;
    /// Worker threads; 0 means available parallelism.
    std::size_t threads = 0;
    bool plot = false;

    void validate() const;
    std::size_t resolved_tau_max() const;
    double resolved_bandwidth_q() const;
    TestKind resolved_test() const;
    /// Pretty-printed JSON echo of every resolved field.
    std::string to_json() const;
};

/// One tested concept in one setting, aggregated over repetitions.
struct ConceptRow {
    std::string setting;
    std::string concept_name;
    double rejection_rate = 0.0;
    double mean_normalized_tau = 1.0;
    /// Modal 1-based position in the per-repetition rankings.
    std::size_t fdr_rank = 0;
    /// Fraction of repetitions in which the greedy FDR procedure selected the concept.
    double fdr_selected_rate = 0.0;
};

struct SettingResult {
    std::string name;
    std::vector<std::string> concepts;
    /// outcomes[c][r]: concept c, repetition r.
    std::vector<std::vector<TestOutcome>> outcomes;
    /// Greedy FDR output per repetition.
    std::vector<RankOutput> fdr;
    /// rankings[r]: concepts of repetition r from most to least important.
    std::vector<std::vector<std::size_t>> rankings;
};

struct ExperimentResult {
    std::vector<SettingResult> settings;
    std::vector<ConceptRow> rows;
};

/// Runs every (setting, concept, repetition) test on a work pool and aggregates.
/// Repetition r of concept j uses seed derive_seed(seed, r, j); data shared by the
/// concepts of one repetition uses derive_seed(seed, r, kDataStream).
ExperimentResult run_experiment(const ExperimentConfig& config);

inline constexpr std::uint64_t kDataStream = 0xDA7A5EEDULL;

/// Canonical CSV: setting,concept,rejection_rate,mean_normalized_tau,fdr_rank,fdr_selected_rate.
std::string results_csv(const ExperimentResult& result);

/// Mean log-wealth trajectories, one panel per setting.
std::string wealth_svg(const ExperimentResult& result, double alpha);

/// Writes results.csv, run.json and (when requested) wealth.svg into config.out.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);

/// Parsed results.csv.
std::vector<ConceptRow> read_results_csv(const std::filesystem::path& path);

struct CompareReport {
    std::string setting;
    std::vector<std::string> concepts;
    double tau_a_vs_b = 0.0;
    double tau_b_vs_a = 0.0;
    double agreement = 0.0;
    std::optional<double> f1_a;
    std::optional<double> f1_b;

    std::string to_json() const;
};

/// Rank and importance agreement between two result files over their shared concepts.
/// Uses `setting` (or the first setting of `a` when empty). Ranks order by fdr_rank, then
/// rejection rate, then file order. `truth` lists important concept names.
CompareReport compare_ranks(const std::vector<ConceptRow>& a, const std::vector<ConceptRow>& b,
                            double alpha, const std::string& setting = {},
                            const std::optional<std::set<std::string>>& truth = std::nullopt);

/// One concept name per nonblank line.
std::set<std::string> read_truth_file(const std::filesystem::path& path);

/// Worker count after applying the BETKIT_THREADS override.
std::size_t resolve_threads(std::size_t requested);

}  // namespace betkit
