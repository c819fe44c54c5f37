#include "betkit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "betkit/datastore.hpp"
#include "betkit/synthetic.hpp"
#include "betkit/version.hpp"

namespace betkit {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Enumerations

std::string_view to_string(Experiment e) {
    switch (e) {
        case Experiment::synthetic_gaussian: return "synthetic-gaussian";
        case Experiment::synthetic_counting: return "synthetic-counting";
        case Experiment::global: return "global";
        case Experiment::global_cond: return "global-cond";
        case Experiment::local: return "local";
    }
    return "unknown";
}

std::string_view to_string(TestKind t) {
    switch (t) {
        case TestKind::skit: return "skit";
        case TestKind::cskit: return "cskit";
        case TestKind::xskit: return "xskit";
    }
    return "unknown";
}

Experiment parse_experiment(std::string_view s) {
    for (auto e : {Experiment::synthetic_gaussian, Experiment::synthetic_counting, Experiment::global,
                   Experiment::global_cond, Experiment::local}) {
        if (s == to_string(e)) return e;
    }
    throw ConfigError("unknown experiment '" + std::string(s) + "'");
}

TestKind parse_test_kind(std::string_view s) {
    for (auto t : {TestKind::skit, TestKind::cskit, TestKind::xskit}) {
        if (s == to_string(t)) return t;
    }
    throw ConfigError("unknown test '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

bool is_synthetic(Experiment e) {
    return e == Experiment::synthetic_gaussian || e == Experiment::synthetic_counting;
}

}  // namespace

TestKind ExperimentConfig::resolved_test() const {
    switch (experiment) {
        case Experiment::global: return TestKind::skit;
        case Experiment::global_cond: return TestKind::cskit;
        case Experiment::local: return TestKind::xskit;
        default: return test;
    }
}

std::size_t ExperimentConfig::resolved_tau_max() const {
    if (tau_max) return *tau_max;
    switch (experiment) {
        case Experiment::synthetic_gaussian: return 1000;
        case Experiment::synthetic_counting: return 800;
        case Experiment::global: return 400;
        case Experiment::global_cond: return 800;
        case Experiment::local: return 400;
    }
    return 1000;
}

double ExperimentConfig::resolved_bandwidth_q() const {
    if (bandwidth_q) return *bandwidth_q;
    return is_synthetic(experiment) ? 0.5 : 0.9;
}

void ExperimentConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (resolved_tau_max() < 2) throw ConfigError("tau-max must be at least 2");
    if (kernel != "rbf" && kernel != "linear") throw ConfigError("kernel must be rbf or linear");
    const double q = resolved_bandwidth_q();
    if (!(q > 0.0 && q <= 1.0)) throw ConfigError("bandwidth quantile must lie in (0,1]");
    if (bet_fraction && !(*bet_fraction >= 0.0 && *bet_fraction <= 1.0)) {
        throw ConfigError("bet fraction must lie in [0,1]");
    }
    if (reps < 1) throw ConfigError("reps must be at least 1");
    if (experiment == Experiment::synthetic_gaussian) {
        if (resolved_test() == TestKind::xskit ? z3_values.empty() : betas.empty()) {
            throw ConfigError("sweep grid must be nonempty");
        }
    }
    if (!is_synthetic(experiment) && manifest.empty()) {
        throw ConfigError("real-data experiments need --manifest");
    }
    if (experiment == Experiment::local && cond_size < 1) {
        throw ConfigError("cond-size must be at least 1");
    }
    if (!(neff > 1.0)) throw ConfigError("neff must exceed 1");
}

std::string ExperimentConfig::to_json() const {
    ordered_json j;
    j["experiment"] = std::string(to_string(experiment));
    j["test"] = std::string(to_string(resolved_test()));
    j["alpha"] = alpha;
    j["tau_max"] = resolved_tau_max();
    j["kernel"] = kernel;
    j["bandwidth_q"] = resolved_bandwidth_q();
    if (bet_fraction) {
        j["strategy"] = {{"name", "constant"}, {"fraction", *bet_fraction}};
    } else {
        j["strategy"] = {{"name", "ons"}};
    }
    j["reps"] = reps;
    j["seed"] = seed;
    j["betas"] = betas;
    j["z3_values"] = z3_values;
    j["cond_size"] = cond_size;
    j["manifest"] = manifest;
    j["concept"] = concept_name;
    j["class"] = class_name;
    j["sample_id"] = sample_id;
    j["neff"] = neff;
    j["out"] = out.string();
    j["threads"] = resolve_threads(threads);
    j["plot"] = plot;
    return j.dump(2);
}

std::size_t resolve_threads(std::size_t requested) {
    if (const char* env = std::getenv("BETKIT_THREADS"); env && *env) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0') throw ConfigError("BETKIT_THREADS must be an integer");
        requested = static_cast<std::size_t>(v);
    }
    if (requested == 0) requested = std::max(1u, std::thread::hardware_concurrency());
    return requested;
}

// ---------------------------------------------------------------------------
// Work pool

namespace {

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                return;
            }
        }
    };
    const std::size_t extra = std::min(threads, n) > 0 ? std::min(threads, n) - 1 : 0;
    std::vector<std::thread> pool;
    pool.reserve(extra);
    for (std::size_t t = 0; t < extra; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Experiment plans

using TestRunner =
    std::function<TestOutcome(std::size_t concept_pos, std::size_t rep, const TestConfig& cfg)>;

struct Plan {
    std::string name;
    std::vector<std::string> concepts;
    /// Stable concept ids used for seed derivation.
    std::vector<std::size_t> ids;
    TestRunner run;
};

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::uint64_t data_seed(std::uint64_t master, std::size_t rep) {
    return derive_seed(master, rep, kDataStream);
}

std::vector<Plan> gaussian_plans(const ExperimentConfig& cfg) {
    const std::size_t tau_max = cfg.resolved_tau_max();
    const std::uint64_t master = cfg.seed;
    const std::vector<std::string> names{"z1", "z2", "z3"};
    std::vector<Plan> plans;

    switch (cfg.resolved_test()) {
        case TestKind::skit:
            for (double beta : cfg.betas) {
                GaussianDgpParams p;
                p.beta1 = 1.0;
                p.beta2 = beta;
                p.beta3 = 1.0;
                plans.push_back({"beta2=" + format_number(beta), names, {0, 1, 2},
                                 [p, tau_max, master](std::size_t j, std::size_t r, const TestConfig& tc) {
                                     Rng rng(data_seed(master, r));
                                     const auto data = sample_gaussian_dgp(p, tau_max, rng);
                                     std::vector<PairObservation> stream(tau_max);
                                     for (std::size_t i = 0; i < tau_max; ++i) {
                                         stream[i] = {data.y[i], data.z(i, j)};
                                     }
                                     return run_skit(stream, tc);
                                 }});
            }
            break;
        case TestKind::cskit:
            for (double beta : cfg.betas) {
                GaussianDgpParams p;
                p.beta1 = beta;
                p.beta2 = 0.0;
                p.beta3 = 1.0;
                plans.push_back({"beta1=" + format_number(beta), names, {0, 1, 2},
                                 [p, tau_max, master](std::size_t j, std::size_t r, const TestConfig& tc) {
                                     Rng rng(data_seed(master, r));
                                     const auto data = sample_gaussian_dgp(p, tau_max, rng);
                                     std::vector<TripletObservation> stream(tau_max);
                                     for (std::size_t i = 0; i < tau_max; ++i) {
                                         auto& t = stream[i];
                                         t.y = data.y[i];
                                         t.zj = data.z(i, j);
                                         for (std::size_t k = 0; k < 3; ++k) {
                                             if (k != j) t.zrest.push_back(data.z(i, k));
                                         }
                                     }
                                     ConditionalSampler sampler = [&p, j](std::span<const double> zr, Rng& g) {
                                         return sample_gaussian_zj_given_rest(p, j, zr, g);
                                     };
                                     return run_cskit(stream, sampler, tc);
                                 }});
            }
            break;
        case TestKind::xskit:
            for (double z3 : cfg.z3_values) {
                GaussianDgpParams p;
                p.beta1 = 1.0;
                p.beta2 = 1.0;
                p.beta3 = 1.0;
                const std::array<double, 3> z_obs{p.mu1, 1.0, z3};
                plans.push_back({"z3=" + format_number(z3), {"z2"}, {1},
                                 [p, z_obs](std::size_t, std::size_t, const TestConfig& tc) {
                                     ResponseSampler sampler = [&](std::span<const std::size_t> c, Rng& g) {
                                         std::vector<double> values;
                                         for (std::size_t k : c) values.push_back(z_obs[k]);
                                         return gaussian_response(p, sample_gaussian_given_subset(p, c, values, g));
                                     };
                                     const std::array<std::size_t, 1> subset{2};
                                     return run_xskit(sampler, 1, subset, tc);
                                 }});
            }
            break;
    }
    return plans;
}

std::vector<Plan> counting_plans(const ExperimentConfig& cfg) {
    using namespace counting;
    const std::size_t tau_max = cfg.resolved_tau_max();
    const std::uint64_t master = cfg.seed;
    const CountingDgpParams params;
    const std::vector<std::size_t> tested{kBlueZeros, kOrangeThrees, kGreenFives, kBlueTwos,
                                          kPurpleSevens};
    std::vector<std::string> names;
    for (std::size_t k : tested) names.emplace_back(name(k));

    auto dataset = [params, tau_max, master](std::size_t r) {
        Rng rng(data_seed(master, r));
        Matrix z = sample_counting_dgp(params, tau_max, rng);
        std::vector<double> y(tau_max);
        for (std::size_t i = 0; i < tau_max; ++i) y[i] = counting_oracle_predictor(z.row(i), rng);
        return std::pair{std::move(z), std::move(y)};
    };

    std::vector<Plan> plans;
    switch (cfg.resolved_test()) {
        case TestKind::skit:
            plans.push_back({"red_threes", names, tested,
                             [=](std::size_t pos, std::size_t r, const TestConfig& tc) {
                                 const auto [z, y] = dataset(r);
                                 std::vector<PairObservation> stream(tau_max);
                                 for (std::size_t i = 0; i < tau_max; ++i) {
                                     stream[i] = {y[i], z(i, tested[pos])};
                                 }
                                 return run_skit(stream, tc);
                             }});
            break;
        case TestKind::cskit:
            plans.push_back({"red_threes", names, tested,
                             [=](std::size_t pos, std::size_t r, const TestConfig& tc) {
                                 const auto [z, y] = dataset(r);
                                 const std::size_t j = tested[pos];
                                 std::vector<std::size_t> rest;
                                 for (std::size_t k : tested) {
                                     if (k != j) rest.push_back(k);
                                 }
                                 std::vector<TripletObservation> stream(tau_max);
                                 for (std::size_t i = 0; i < tau_max; ++i) {
                                     auto& t = stream[i];
                                     t.y = y[i];
                                     t.zj = z(i, j);
                                     for (std::size_t k : rest) t.zrest.push_back(z(i, k));
                                 }
                                 ConditionalSampler sampler = [&](std::span<const double> zr, Rng& g) {
                                     std::vector<std::pair<std::size_t, double>> given;
                                     for (std::size_t k = 0; k < rest.size(); ++k) given.emplace_back(rest[k], zr[k]);
                                     return counting_conditional_sample(params, j, given, g);
                                 };
                                 return run_cskit(stream, sampler, tc);
                             }});
            break;
        case TestKind::xskit:
            for (int orange : {0, 1, 2}) {
                plans.push_back(
                    {"orange_threes=" + std::to_string(orange), {std::string(name(kGreenFives))}, {kGreenFives},
                     [=](std::size_t, std::size_t, const TestConfig& tc) {
                         const std::array<double, kConcepts> z_obs{1.0, double(orange), 3.0, 3.0, 1.0, 1.0};
                         ResponseSampler sampler = [&](std::span<const std::size_t> c, Rng& g) {
                             std::vector<std::pair<std::size_t, double>> given;
                             for (std::size_t k : c) given.emplace_back(k, z_obs[k]);
                             const auto z = counting_conditional_joint(params, given, g);
                             return counting_oracle_predictor(z, g);
                         };
                         const std::array<std::size_t, 1> subset{kOrangeThrees};
                         return run_xskit(sampler, kGreenFives, subset, tc);
                     }});
            }
            break;
    }
    return plans;
}

std::size_t resolve_class(const Classifier& c, const std::string& name) {
    if (name.empty()) return 0;
    const auto it = std::find(c.class_names.begin(), c.class_names.end(), name);
    if (it == c.class_names.end()) throw ConfigError("unknown class '" + name + "'");
    return static_cast<std::size_t>(it - c.class_names.begin());
}

std::vector<std::size_t> resolve_concepts(const ConceptDictionary& d, const std::string& name) {
    if (name.empty()) {
        std::vector<std::size_t> all(d.concepts());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }
    const auto idx = d.index_of(name);
    if (!idx) throw ConfigError("unknown concept '" + name + "'");
    return {*idx};
}

std::size_t resolve_sample(const EmbeddingDataset& e, const std::string& id) {
    if (id.empty()) return 0;
    const auto it = std::find(e.ids.begin(), e.ids.end(), id);
    if (it != e.ids.end()) return static_cast<std::size_t>(it - e.ids.begin());
    if (std::all_of(id.begin(), id.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
        const std::size_t row = std::stoull(id);
        if (row < e.h.rows()) return row;
    }
    throw ConfigError("unknown sample id '" + id + "'");
}

/// Shared read-only state of the real-data experiments.
struct RealData {
    Dataset dataset;
    Matrix z;
    std::vector<double> scores;
    std::size_t target = 0;
    std::optional<WeightedKdeSampler> kde;
    std::optional<EmbeddingSampler> embedding;
};

std::vector<Plan> real_plans(const ExperimentConfig& cfg, std::shared_ptr<RealData>& keep) {
    auto data = std::make_shared<RealData>();
    data->dataset = load_dataset(cfg.manifest);
    auto& ds = data->dataset;
    data->target = resolve_class(ds.classifier, cfg.class_name);
    ds.classifier.target_class = data->target;
    data->z = project_concepts(ds.embeddings, ds.concepts);
    data->scores = classifier_scores(ds.classifier, ds.embeddings.h);
    const std::size_t n = ds.embeddings.h.rows();
    const double neff = std::min(cfg.neff, static_cast<double>(n));
    keep = data;

    const auto concepts = resolve_concepts(ds.concepts, cfg.concept_name);
    std::vector<std::string> names;
    for (std::size_t j : concepts) names.push_back(ds.concepts.names[j]);
    const std::uint64_t master = cfg.seed;
    const std::string setting = ds.classifier.class_names[data->target];
    RealData* d = data.get();

    Plan plan{setting, names, concepts, {}};
    switch (cfg.experiment) {
        case Experiment::global:
            if (n < 2) throw ShapeError("global tests need at least two rows");
            plan.run = [d, concepts, master](std::size_t pos, std::size_t r, const TestConfig& tc) {
                const auto stream = stream_global(d->z, d->scores, concepts[pos], data_seed(master, r));
                return run_skit(stream, tc);
            };
            break;
        case Experiment::global_cond:
            if (d->z.cols() < 2) throw ShapeError("conditional tests need at least two concepts");
            if (n < 2) throw ShapeError("conditional tests need at least two rows");
            d->kde.emplace(d->z, neff);
            plan.run = [d, concepts, master](std::size_t pos, std::size_t r, const TestConfig& tc) {
                const std::size_t j = concepts[pos];
                const auto stream = stream_global_conditional(d->z, d->scores, j, data_seed(master, r));
                ConditionalSampler sampler = [d, j](std::span<const double> zr, Rng& g) {
                    return d->kde->sample_zj_given_rest(j, zr, g);
                };
                return run_cskit(stream, sampler, tc);
            };
            break;
        case Experiment::local: {
            const std::size_t m = d->z.cols();
            if (cfg.cond_size + 1 > m) throw ConfigError("cond-size must be smaller than the concept count");
            const std::size_t row = resolve_sample(ds.embeddings, cfg.sample_id);
            d->embedding.emplace(ds.embeddings.h, d->z, neff);
            plan.name = setting + "@" + (ds.embeddings.ids.empty() ? std::to_string(row) : ds.embeddings.ids[row]);
            const std::size_t s = cfg.cond_size;
            plan.run = [d, concepts, master, row, m, s](std::size_t pos, std::size_t r, const TestConfig& tc) {
                const std::size_t j = concepts[pos];
                std::vector<std::size_t> pool;
                for (std::size_t k = 0; k < m; ++k) {
                    if (k != j) pool.push_back(k);
                }
                Rng pick(derive_seed(derive_seed(master, r, j), kDataStream));
                std::shuffle(pool.begin(), pool.end(), pick);
                std::vector<std::size_t> subset(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(s));
                std::sort(subset.begin(), subset.end());
                const auto z_obs = d->z.row(row);
                return run_xskit(z_obs, j, subset, *d->embedding, d->dataset.classifier, tc);
            };
            break;
        }
        default:
            throw ConfigError("not a real-data experiment");
    }
    return {std::move(plan)};
}

// ---------------------------------------------------------------------------
// Aggregation

std::vector<std::size_t> full_ranking(const SettingResult& s, std::size_t rep,
                                      const std::vector<double>& rates) {
    const std::size_t m = s.concepts.size();
    const RankOutput& fdr = s.fdr[rep];
    std::vector<std::size_t> order;
    for (const auto& rej : fdr.rejected) order.push_back(rej.concept_id);
    std::vector<std::size_t> rest;
    for (std::size_t c = 0; c < m; ++c) {
        if (!fdr.is_rejected[c]) rest.push_back(c);
    }
    auto terminal = [&](std::size_t c) {
        const auto& traj = s.outcomes[c][rep].wealth_trajectory;
        return traj.empty() ? 0.0 : traj.back();
    };
    std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
        if (rates[a] != rates[b]) return rates[a] > rates[b];
        const double ta = terminal(a), tb = terminal(b);
        if (ta != tb) return ta > tb;
        return a < b;
    });
    order.insert(order.end(), rest.begin(), rest.end());
    return order;
}

std::size_t modal_position(const std::vector<std::vector<std::size_t>>& rankings, std::size_t c) {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& order : rankings) {
        const auto it = std::find(order.begin(), order.end(), c);
        ++counts[static_cast<std::size_t>(it - order.begin()) + 1];
    }
    std::size_t best = 0, best_count = 0;
    for (const auto& [pos, count] : counts) {
        if (count > best_count) {
            best = pos;
            best_count = count;
        }
    }
    return best;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::shared_ptr<RealData> keep_alive;
    std::vector<Plan> plans;
    switch (cfg.experiment) {
        case Experiment::synthetic_gaussian: plans = gaussian_plans(cfg); break;
        case Experiment::synthetic_counting: plans = counting_plans(cfg); break;
        default: plans = real_plans(cfg, keep_alive); break;
    }

    TestConfig base;
    base.alpha = cfg.alpha;
    base.tau_max = cfg.resolved_tau_max();
    base.set_kernel(cfg.kernel == "linear" ? KernelSpec::linear()
                                           : KernelSpec::rbf_quantile(cfg.resolved_bandwidth_q()));
    if (cfg.bet_fraction) base.strategy = ConstantBetting{*cfg.bet_fraction};
    base.stop_on_reject = false;
    base.validate();

    struct Task {
        std::size_t plan, concept_pos, rep;
    };
    std::vector<Task> tasks;
    for (std::size_t p = 0; p < plans.size(); ++p) {
        for (std::size_t c = 0; c < plans[p].concepts.size(); ++c) {
            for (std::size_t r = 0; r < cfg.reps; ++r) tasks.push_back({p, c, r});
        }
    }

    ExperimentResult result;
    result.settings.resize(plans.size());
    for (std::size_t p = 0; p < plans.size(); ++p) {
        auto& s = result.settings[p];
        s.name = plans[p].name;
        s.concepts = plans[p].concepts;
        s.outcomes.assign(s.concepts.size(), std::vector<TestOutcome>(cfg.reps));
    }

    parallel_for(tasks.size(), resolve_threads(cfg.threads), [&](std::size_t i) {
        const Task& t = tasks[i];
        const Plan& plan = plans[t.plan];
        TestConfig tc = base;
        tc.seed = derive_seed(cfg.seed, t.rep, plan.ids[t.concept_pos]);
        // Past the largest FDR threshold every round's first crossing is already known.
        tc.stop_log_wealth =
            std::log(static_cast<double>(plan.concepts.size()) / cfg.alpha);
        result.settings[t.plan].outcomes[t.concept_pos][t.rep] = plan.run(t.concept_pos, t.rep, tc);
    });

    for (auto& s : result.settings) {
        const std::size_t m = s.concepts.size();
        std::vector<ConceptSummary> summaries(m);
        std::vector<double> rates(m);
        for (std::size_t c = 0; c < m; ++c) {
            summaries[c] = aggregate_outcomes(s.outcomes[c]);
            rates[c] = summaries[c].rejection_rate;
        }
        std::vector<std::size_t> selected(m, 0);
        for (std::size_t r = 0; r < cfg.reps; ++r) {
            ConceptTrajectories traj;
            traj.alpha = cfg.alpha;
            for (std::size_t c = 0; c < m; ++c) traj.log_wealth.push_back(s.outcomes[c][r].wealth_trajectory);
            s.fdr.push_back(greedy_fdr(traj));
            for (std::size_t c = 0; c < m; ++c) selected[c] += s.fdr.back().is_rejected[c] ? 1 : 0;
            s.rankings.push_back(full_ranking(s, r, rates));
        }
        for (std::size_t c = 0; c < m; ++c) {
            ConceptRow row;
            row.setting = s.name;
            row.concept_name = s.concepts[c];
            row.rejection_rate = summaries[c].rejection_rate;
            row.mean_normalized_tau = summaries[c].mean_normalized_tau;
            row.fdr_rank = modal_position(s.rankings, c);
            row.fdr_selected_rate = static_cast<double>(selected[c]) / static_cast<double>(cfg.reps);
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

constexpr const char* kCsvHeader =
    "setting,concept,rejection_rate,mean_normalized_tau,fdr_rank,fdr_selected_rate";

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string results_csv(const ExperimentResult& result) {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const auto& r : result.rows) {
        out += csv_field(r.setting) + "," + csv_field(r.concept_name) + "," + fixed6(r.rejection_rate) +
               "," + fixed6(r.mean_normalized_tau) + "," + std::to_string(r.fdr_rank) + "," +
               fixed6(r.fdr_selected_rate) + "\n";
    }
    return out;
}

std::string wealth_svg(const ExperimentResult& result, double alpha) {
    constexpr double kWidth = 720, kPanel = 300, kLeft = 60, kRight = 180, kTop = 30, kBottom = 40;
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    const double threshold = std::log(1.0 / alpha);
    std::ostringstream svg;
    const double height = kPanel * static_cast<double>(std::max<std::size_t>(1, result.settings.size()));
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (std::size_t p = 0; p < result.settings.size(); ++p) {
        const auto& s = result.settings[p];
        const double y0 = kPanel * static_cast<double>(p);
        std::vector<std::vector<double>> means;
        std::size_t steps = 1;
        double lo = std::min(0.0, threshold), hi = threshold;
        for (const auto& per_rep : s.outcomes) {
            std::size_t len = 0;
            for (const auto& o : per_rep) len = std::max(len, o.wealth_trajectory.size());
            std::vector<double> mean(len, 0.0);
            for (const auto& o : per_rep) {
                const auto& tr = o.wealth_trajectory;
                for (std::size_t t = 0; t < len; ++t) {
                    mean[t] += tr.empty() ? 0.0 : tr[std::min(t, tr.size() - 1)];
                }
            }
            for (double& v : mean) {
                v /= static_cast<double>(per_rep.size());
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            steps = std::max(steps, len);
            means.push_back(std::move(mean));
        }
        const double pw = kWidth - kLeft - kRight, ph = kPanel - kTop - kBottom;
        auto px = [&](double t) { return kLeft + pw * t / static_cast<double>(steps); };
        auto py = [&](double v) { return y0 + kTop + ph * (hi - v) / (hi - lo > 0 ? hi - lo : 1.0); };
        svg << "<text x=\"" << kLeft << "\" y=\"" << y0 + 18 << "\">" << s.name << "</text>\n";
        svg << "<rect x=\"" << kLeft << "\" y=\"" << y0 + kTop << "\" width=\"" << pw << "\" height=\"" << ph
            << "\" fill=\"none\" stroke=\"#444\"/>\n";
        svg << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(threshold) << "\" y2=\""
            << py(threshold) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
        svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(hi) + 4 << "\" text-anchor=\"end\">"
            << format_number(hi) << "</text>\n";
        svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(lo) + 4 << "\" text-anchor=\"end\">"
            << format_number(lo) << "</text>\n";
        svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << y0 + kPanel - 12
            << "\" text-anchor=\"middle\">step (mean log-wealth over repetitions)</text>\n";
        for (std::size_t c = 0; c < means.size(); ++c) {
            const char* color = palette[c % std::size(palette)];
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"" << px(0) << "," << py(0);
            for (std::size_t t = 0; t < means[c].size(); ++t) {
                svg << " " << px(static_cast<double>(t + 1)) << "," << py(means[c][t]);
            }
            svg << "\"/>\n";
            const double ly = y0 + kTop + 12 + 14 * static_cast<double>(c);
            svg << "<text x=\"" << kLeft + pw + 10 << "\" y=\"" << ly << "\" fill=\"" << color << "\">"
                << s.concepts[c] << "</text>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + cfg.out.string() + ": " + ec.message());
    auto write = [&](const char* name, const std::string& text) {
        std::ofstream f(cfg.out / name, std::ios::binary);
        if (!f) throw ConfigError("output directory is not writable: " + cfg.out.string());
        f << text;
        if (!f) throw ConfigError("failed writing " + (cfg.out / name).string());
    };
    write("results.csv", results_csv(result));
    ordered_json run;
    run["betkit_version"] = kVersion;
    run["config"] = ordered_json::parse(cfg.to_json());
    run["results_columns"] = {"setting", "concept", "rejection_rate", "mean_normalized_tau", "fdr_rank",
                              "fdr_selected_rate"};
    write("run.json", run.dump(2) + "\n");
    if (cfg.plot) write("wealth.svg", wealth_svg(result, cfg.alpha));
}

std::vector<ConceptRow> read_results_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError("cannot open results file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw FormatError("unexpected results header in " + path.string());
    }
    std::vector<ConceptRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 6) throw FormatError("malformed results row in " + path.string());
        try {
            rows.push_back({f[0], f[1], std::stod(f[2]), std::stod(f[3]),
                            static_cast<std::size_t>(std::stoull(f[4])), std::stod(f[5])});
        } catch (const std::exception&) {
            throw FormatError("malformed number in " + path.string());
        }
    }
    return rows;
}

std::set<std::string> read_truth_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError("cannot open truth file: " + path.string());
    std::set<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        names.insert(line.substr(first, last - first + 1));
    }
    return names;
}

namespace {

std::vector<ConceptRow> rows_of(const std::vector<ConceptRow>& rows, const std::string& setting) {
    std::vector<ConceptRow> out;
    for (const auto& r : rows) {
        if (r.setting == setting) out.push_back(r);
    }
    return out;
}

std::vector<std::size_t> order_of(const std::vector<ConceptRow>& rows,
                                  const std::vector<std::string>& shared) {
    std::vector<std::size_t> file_pos(shared.size());
    std::vector<const ConceptRow*> by_id(shared.size());
    for (std::size_t i = 0; i < shared.size(); ++i) {
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (rows[k].concept_name == shared[i]) {
                by_id[i] = &rows[k];
                file_pos[i] = k;
                break;
            }
        }
    }
    std::vector<std::size_t> order(shared.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (by_id[a]->fdr_rank != by_id[b]->fdr_rank) return by_id[a]->fdr_rank < by_id[b]->fdr_rank;
        if (by_id[a]->rejection_rate != by_id[b]->rejection_rate) {
            return by_id[a]->rejection_rate > by_id[b]->rejection_rate;
        }
        return file_pos[a] < file_pos[b];
    });
    return order;
}

}  // namespace

CompareReport compare_ranks(const std::vector<ConceptRow>& a, const std::vector<ConceptRow>& b,
                            double alpha, const std::string& setting,
                            const std::optional<std::set<std::string>>& truth) {
    if (a.empty() || b.empty()) throw FormatError("cannot compare empty result files");
    CompareReport rep;
    rep.setting = setting.empty() ? a.front().setting : setting;
    const auto ra = rows_of(a, rep.setting);
    const auto rb = rows_of(b, rep.setting);
    if (ra.empty() || rb.empty()) throw ConfigError("setting '" + rep.setting + "' missing from a result file");
    for (const auto& r : ra) {
        const bool in_b = std::any_of(rb.begin(), rb.end(),
                                      [&](const ConceptRow& x) { return x.concept_name == r.concept_name; });
        if (in_b) rep.concepts.push_back(r.concept_name);
    }
    if (rep.concepts.empty()) throw ConfigError("result files share no concepts");

    const auto oa = order_of(ra, rep.concepts);
    const auto ob = order_of(rb, rep.concepts);
    rep.tau_a_vs_b = weighted_kendall_tau(oa, ob);
    rep.tau_b_vs_a = weighted_kendall_tau(ob, oa);

    auto rates = [&](const std::vector<ConceptRow>& rows) {
        std::vector<double> out;
        for (const auto& name : rep.concepts) {
            for (const auto& r : rows) {
                if (r.concept_name == name) {
                    out.push_back(r.rejection_rate);
                    break;
                }
            }
        }
        return out;
    };
    const auto rates_a = rates(ra), rates_b = rates(rb);
    rep.agreement = importance_agreement(rates_a, rates_b, alpha);

    if (truth) {
        std::set<std::size_t> truth_ids;
        for (std::size_t i = 0; i < rep.concepts.size(); ++i) {
            if (truth->count(rep.concepts[i])) truth_ids.insert(i);
        }
        auto f1 = [&](const std::vector<double>& r) {
            std::set<std::size_t> predicted;
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (r[i] > alpha) predicted.insert(i);
            }
            return importance_f1(predicted, truth_ids, rep.concepts.size());
        };
        rep.f1_a = f1(rates_a);
        rep.f1_b = f1(rates_b);
    }
    return rep;
}

std::string CompareReport::to_json() const {
    ordered_json j;
    j["setting"] = setting;
    j["concepts"] = concepts;
    j["weighted_kendall_tau"] = {{"a_vs_b", tau_a_vs_b}, {"b_vs_a", tau_b_vs_a}};
    j["importance_agreement"] = agreement;
    if (f1_a) j["importance_f1"] = {{"a", *f1_a}, {"b", *f1_b}};
    return j.dump(2);
}

}  // namespace betkit
