// betkit command-line interface.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "betkit/datastore.hpp"
#include "betkit/harness.hpp"
#include "betkit/version.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

void add_experiment_options(CLI::App* cmd, betkit::ExperimentConfig& cfg, std::string& test,
                            std::optional<std::size_t>& tau_max, std::optional<double>& bandwidth_q,
                            std::optional<double>& bet_fraction) {
    cmd->add_option("--alpha", cfg.alpha, "Significance level")->capture_default_str();
    cmd->add_option("--tau-max", tau_max, "Sample budget per test");
    cmd->add_option("--kernel", cfg.kernel, "rbf or linear")
        ->check(CLI::IsMember({"rbf", "linear"}))
        ->capture_default_str();
    cmd->add_option("--bandwidth-q", bandwidth_q, "Pairwise-distance quantile for rbf bandwidths");
    cmd->add_option("--bet-fraction", bet_fraction, "Constant betting fraction (default: online Newton step)");
    cmd->add_option("--reps", cfg.reps, "Repetitions per concept")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    cmd->add_option("--out", cfg.out, "Output directory")->required();
    cmd->add_option("--threads", cfg.threads, "Worker threads (0 = all cores; BETKIT_THREADS overrides)")
        ->capture_default_str();
    cmd->add_flag("--plot", cfg.plot, "Also write wealth.svg");
    if (test.empty()) return;
    cmd->add_option("--test", test, "skit, cskit or xskit")
        ->check(CLI::IsMember({"skit", "cskit", "xskit"}))
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential kernelized tests of semantic importance"};
    app.set_version_flag("--version", std::string(betkit::kVersion));
    app.require_subcommand(1);

    betkit::ExperimentConfig cfg;
    std::string test = "skit";
    std::optional<std::size_t> tau_max;
    std::optional<double> bandwidth_q, bet_fraction;
    std::string unused_test;

    auto* gauss = app.add_subcommand("synthetic-gaussian", "Gaussian concepts with a sigmoid response");
    add_experiment_options(gauss, cfg, test, tau_max, bandwidth_q, bet_fraction);
    gauss->add_option("--betas", cfg.betas, "Swept coefficient grid (beta2 for skit, beta1 for cskit)")
        ->delimiter(',');
    gauss->add_option("--z3", cfg.z3_values, "Observed z3 grid for xskit")->delimiter(',');

    auto* counting = app.add_subcommand("synthetic-counting", "Digit-counting concepts with an oracle predictor");
    add_experiment_options(counting, cfg, test, tau_max, bandwidth_q, bet_fraction);

    auto add_real = [&](const char* name, const char* help) {
        auto* cmd = app.add_subcommand(name, help);
        add_experiment_options(cmd, cfg, unused_test, tau_max, bandwidth_q, bet_fraction);
        cmd->add_option("--manifest", cfg.manifest, "Dataset manifest (JSON)")->required();
        cmd->add_option("--concept", cfg.concept_name, "Test only this concept");
        cmd->add_option("--class", cfg.class_name, "Target class (default: first)");
        cmd->add_option("--neff", cfg.neff, "Effective KDE sample size")->capture_default_str();
        return cmd;
    };
    auto* global = add_real("global", "Global importance (SKIT) on a dataset");
    auto* global_cond = add_real("global-cond", "Global conditional importance (c-SKIT) on a dataset");
    auto* local = add_real("local", "Local conditional importance (x-SKIT) for one sample");
    local->add_option("--sample-id", cfg.sample_id, "Explained sample: id or row index (default: row 0)");
    local->add_option("--cond-size", cfg.cond_size, "Size of the random conditioning set")->capture_default_str();

    std::filesystem::path cmp_a, cmp_b, cmp_truth, cmp_out;
    std::string cmp_setting;
    double cmp_alpha = 0.05;
    auto* compare = app.add_subcommand("compare", "Rank and importance agreement of two results.csv files");
    compare->add_option("a", cmp_a, "Reference results.csv")->required();
    compare->add_option("b", cmp_b, "Other results.csv")->required();
    compare->add_option("--alpha", cmp_alpha, "Importance threshold on rejection rates")->capture_default_str();
    compare->add_option("--setting", cmp_setting, "Setting to compare (default: first)");
    compare->add_option("--truth", cmp_truth, "Important concept names, one per line");
    compare->add_option("--out", cmp_out, "Write the report here instead of stdout");

    std::filesystem::path toy_out;
    std::size_t toy_n = 2000, toy_d = 32, toy_m = 20, toy_important = 4;
    std::uint64_t toy_seed = 0;
    auto* toy = app.add_subcommand("make-toy", "Write a synthetic embedding dataset and manifest");
    toy->add_option("--out", toy_out, "Manifest path")->required();
    toy->add_option("--n", toy_n, "Rows")->capture_default_str();
    toy->add_option("--d", toy_d, "Embedding dimension")->capture_default_str();
    toy->add_option("--m", toy_m, "Concepts")->capture_default_str();
    toy->add_option("--important", toy_important, "Concepts driving the first class")->capture_default_str();
    toy->add_option("--seed", toy_seed, "Seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (compare->parsed()) {
            std::optional<std::set<std::string>> truth;
            if (!cmp_truth.empty()) truth = betkit::read_truth_file(cmp_truth);
            const auto report = betkit::compare_ranks(betkit::read_results_csv(cmp_a),
                                                      betkit::read_results_csv(cmp_b), cmp_alpha,
                                                      cmp_setting, truth);
            const std::string text = report.to_json() + "\n";
            if (cmp_out.empty()) {
                std::cout << text;
            } else {
                std::ofstream f(cmp_out);
                if (!f) throw betkit::ConfigError("cannot write " + cmp_out.string());
                f << text;
            }
            return 0;
        }
        if (toy->parsed()) {
            const auto ds = betkit::make_toy_dataset(toy_n, toy_d, toy_m, toy_important, toy_seed);
            betkit::save_dataset(toy_out, ds);
            std::cout << "wrote " << toy_out.string() << "\n";
            return 0;
        }

        for (auto* cmd : {gauss, counting, global, global_cond, local}) {
            if (cmd->parsed()) cfg.experiment = betkit::parse_experiment(cmd->get_name());
        }
        cfg.test = betkit::parse_test_kind(test);
        cfg.tau_max = tau_max;
        cfg.bandwidth_q = bandwidth_q;
        cfg.bet_fraction = bet_fraction;
        const auto result = betkit::run_experiment(cfg);
        betkit::write_outputs(cfg, result);
        std::cout << betkit::results_csv(result);
        return 0;
    } catch (const betkit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const betkit::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const betkit::SamplerError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
