// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "betkit/datastore.hpp"
#include "betkit/harness.hpp"
#include "betkit/multiplicity.hpp"
#include "betkit/payoffs.hpp"
#include "betkit/samplers.hpp"
#include "betkit/synthetic.hpp"
#include "betkit/testers.hpp"
#include "oracles.hpp"

using namespace betkit;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20241018;
constexpr double kAlpha = 0.05;

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s %s :: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

/// alpha + 3 binomial standard errors at `reps` trials.
double type1_bound(std::size_t reps) {
    return kAlpha + 3.0 * std::sqrt(kAlpha * (1.0 - kAlpha) / static_cast<double>(reps));
}

const ConceptRow& row(const ExperimentResult& res, const std::string& setting, const std::string& concept_name) {
    for (const auto& r : res.rows)
        if (r.setting == setting && r.concept_name == concept_name) return r;
    throw std::runtime_error("missing row " + setting + "/" + concept_name);
}

const SettingResult& setting(const ExperimentResult& res, const std::string& name) {
    for (const auto& s : res.settings)
        if (s.name == name) return s;
    throw std::runtime_error("missing setting " + name);
}

ExperimentConfig gaussian(TestKind test, std::vector<double> betas = {0.0, 0.5, 1.0, 2.0}) {
    ExperimentConfig cfg;
    cfg.experiment = Experiment::synthetic_gaussian;
    cfg.test = test;
    cfg.alpha = kAlpha;
    cfg.reps = 100;
    cfg.seed = kSeed;
    cfg.betas = std::move(betas);
    return cfg;
}

// ---------------------------------------------------------------------------

oracle::Kernel random_kernel(Rng& rng) {
    std::uniform_int_distribution<int> pick(0, 3);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    switch (pick(rng)) {
        case 0: return {false, 0.5, 0.0};
        case 1: return {true, u(rng), 0.0};
        case 2: return {true, 0.5, u(rng) + 0.2};
        default: return {true, 1.0, 0.0};
    }
}

KernelSpec to_spec(const oracle::Kernel& k) {
    if (!k.rbf) return KernelSpec::linear();
    return k.fixed_sigma > 0 ? KernelSpec::rbf_fixed(k.fixed_sigma) : KernelSpec::rbf_quantile(k.q);
}

void payoff_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(kSeed);
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<std::size_t> len(1, 10), rest_len(0, 3);
    double worst = 0.0;
    std::size_t checks = 0;
    for (int h = 0; h < 100; ++h) {
        const std::size_t n = len(rng);
        const auto ky = random_kernel(rng), kz = random_kernel(rng), kr = random_kernel(rng);

        SkitPayoff skit(to_spec(ky), to_spec(kz));
        std::vector<double> hy, hz;
        for (std::size_t i = 0; i < n; ++i) {
            hy.push_back(normal(rng));
            hz.push_back(normal(rng));
            skit.append({hy.back(), hz.back()});
        }

        const std::size_t rd = rest_len(rng);
        CskitPayoff cskit(to_spec(ky), to_spec(kz), to_spec(kr), rd);
        std::vector<double> cy, czj, czt;
        std::vector<oracle::Point> crest;
        for (std::size_t i = 0; i < n; ++i) {
            TripletObservation obs{normal(rng), normal(rng), std::vector<double>(rd)};
            for (double& x : obs.zrest) x = normal(rng);
            const double zt = normal(rng);
            cskit.append(obs, {obs.y, zt, obs.zrest});
            cy.push_back(obs.y);
            czj.push_back(obs.zj);
            czt.push_back(zt);
            crest.push_back(obs.zrest);
        }

        XskitPayoff xskit(to_spec(ky));
        std::vector<double> xt, xn;
        for (std::size_t i = 0; i < n; ++i) {
            xt.push_back(normal(rng) + 0.5);
            xn.push_back(normal(rng));
            xskit.append(xt.back(), xn.back());
        }

        for (int q = 0; q < 5; ++q) {
            const double y = normal(rng), z = normal(rng);
            oracle::Point r(rd);
            for (double& x : r) x = normal(rng);
            worst = std::max(worst, std::abs(skit.rho(y, z) - oracle::skit_rho(ky, kz, hy, hz, y, z)));
            worst = std::max(worst, std::abs(cskit.rho(y, z, r) -
                                             oracle::cskit_rho(ky, kz, kr, cy, czj, czt, crest, y, z, r)));
            worst = std::max(worst, std::abs(xskit.rho(y) - oracle::xskit_rho(ky, xt, xn, y)));
            checks += 3;
        }
    }
    const double secs = seconds_since(t0);
    report("payoff-oracle-equivalence", worst <= 1e-12 && secs < 5.0,
           std::to_string(checks) + " evaluations, max abs error " + fmt("%.3g", worst) + ", " +
               fmt("%.2f s", secs));
}

// ---------------------------------------------------------------------------

void gaussian_suites() {
    const double bound = type1_bound(100);

    auto t0 = std::chrono::steady_clock::now();
    const auto skit = run_experiment(gaussian(TestKind::skit));
    const double skit_secs = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto cskit = run_experiment(gaussian(TestKind::cskit));
    const double cskit_secs = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto xcfg = gaussian(TestKind::xskit);
    xcfg.z3_values = {-0.5, 0.0, 0.5};
    const auto xskit = run_experiment(xcfg);
    const double xskit_secs = seconds_since(t0);

    {
        const double a = row(skit, "beta2=0", "z2").rejection_rate;
        const double b = row(cskit, "beta1=0", "z1").rejection_rate;
        const double c = row(xskit, "z3=0", "z2").rejection_rate;
        const bool fast = std::max({skit_secs, cskit_secs, xskit_secs}) < 300.0;
        std::ostringstream d;
        d << "bound " << fmt("%.4f", bound) << "; skit " << a << ", cskit " << b << ", xskit " << c
          << "; suites " << fmt("%.1f", skit_secs) << "/" << fmt("%.1f", cskit_secs) << "/"
          << fmt("%.1f s", xskit_secs);
        report("type-I-control", a <= bound && b <= bound && c <= bound && fast, d.str());
    }

    {
        bool pass = true;
        std::ostringstream d;
        auto check = [&](const ExperimentResult& res, const char* label, const char* prefix,
                         const std::string& concept_name) {
            double prev = 2.0;
            d << label << " tau";
            for (const char* b : {"0.5", "1", "2"}) {
                const auto& r = row(res, std::string(prefix) + b, concept_name);
                d << " " << fmt("%.3f", r.mean_normalized_tau);
                if (!(r.mean_normalized_tau <= prev)) pass = false;
                prev = r.mean_normalized_tau;
            }
            const double rate = row(res, std::string(prefix) + "2", concept_name).rejection_rate;
            d << " rate@2 " << rate << "; ";
            if (rate < 0.9) pass = false;
        };
        check(skit, "skit", "beta2=", "z2");
        check(cskit, "cskit", "beta1=", "z1");
        report("power-and-adaptivity", pass, d.str());
    }

    {
        auto lin = gaussian(TestKind::cskit, {2.0});
        lin.kernel = "linear";
        const auto lres = run_experiment(lin);
        const double linear_rate = row(lres, "beta1=2", "z1").rejection_rate;
        const double rbf_rate = row(cskit, "beta1=2", "z1").rejection_rate;
        report("characteristic-kernel-failure", linear_rate <= 0.1 && rbf_rate >= 0.9,
               "linear " + fmt("%.2f", linear_rate) + ", rbf " + fmt("%.2f", rbf_rate) + " at beta1=2");
    }

    {
        const double lo = row(xskit, "z3=-0.5", "z2").rejection_rate;
        const double hi = row(xskit, "z3=0.5", "z2").rejection_rate;
        report("two-sided-local-test", lo >= 0.8 && hi >= 0.8,
               "z3=-0.5 " + fmt("%.2f", lo) + ", z3=+0.5 " + fmt("%.2f", hi));
    }
}

// ---------------------------------------------------------------------------

void counting_suite() {
    const double bound = type1_bound(100);
    ExperimentConfig cfg;
    cfg.experiment = Experiment::synthetic_counting;
    cfg.alpha = kAlpha;
    cfg.reps = 100;
    cfg.seed = kSeed;
    cfg.tau_max = 800;

    cfg.test = TestKind::skit;
    const auto skit = run_experiment(cfg);
    cfg.test = TestKind::cskit;
    const auto cskit = run_experiment(cfg);

    const double twos = row(skit, "red_threes", "blue twos").rejection_rate;
    const double sevens = row(skit, "red_threes", "purple sevens").rejection_rate;
    const double zeros = row(cskit, "red_threes", "blue zeros").rejection_rate;

    const auto& s = setting(skit, "red_threes");
    const auto idx = [&](const std::string& n) {
        return static_cast<std::size_t>(std::find(s.concepts.begin(), s.concepts.end(), n) - s.concepts.begin());
    };
    const std::size_t i_twos = idx("blue twos"), i_sevens = idx("purple sevens");
    std::size_t outside = 0;
    for (const auto& f : s.fdr) outside += (!f.is_rejected[i_twos] && !f.is_rejected[i_sevens]) ? 1 : 0;
    const double frac = static_cast<double>(outside) / static_cast<double>(s.fdr.size());

    std::ostringstream d;
    d << "skit twos " << twos << ", sevens " << sevens << "; cskit zeros " << zeros << " (bound "
      << fmt("%.4f", bound) << "); twos+sevens outside FDR set in " << fmt("%.2f", frac) << " of runs";
    report("counting-structure-recovery", twos <= bound && sevens <= bound && zeros <= bound && frac >= 0.9,
           d.str());
}

// ---------------------------------------------------------------------------

/// Rejection rate of SKIT on (<e1,H>, <e2,H>) with H uniform on the unit sphere in R^3.
double sphere_rate(double q, std::size_t tau) {
    const int runs = 100;
    int rejected = 0;
    for (int r = 0; r < runs; ++r) {
        Rng rng(derive_seed(kSeed, r, 0x5F4E));
        std::normal_distribution<double> normal;
        std::vector<PairObservation> stream(tau);
        for (auto& p : stream) {
            double h[3] = {normal(rng), normal(rng), normal(rng)};
            const double norm = std::sqrt(h[0] * h[0] + h[1] * h[1] + h[2] * h[2]);
            p.y = h[0] / norm;
            p.z = h[1] / norm;
        }
        TestConfig cfg;
        cfg.alpha = kAlpha;
        cfg.tau_max = tau;
        cfg.set_kernel(KernelSpec::rbf_quantile(q));
        rejected += run_skit(stream, cfg).rejected ? 1 : 0;
    }
    return rejected / static_cast<double>(runs);
}

void orthogonality() {
    // Criterion: median-heuristic bandwidth, tau_max = 1000. The other two runs are diagnostics only.
    const double rate = sphere_rate(0.5, 1000);
    const double longer = sphere_rate(0.5, 2000);
    const double narrower = sphere_rate(0.25, 1000);
    report("orthogonality-counterexample", rate >= 0.9,
           "uniform sphere d=3, <w,c>=0, median bandwidth, tau_max=1000: rate " + fmt("%.2f", rate) +
               " (diagnostics: tau_max=2000 -> " + fmt("%.2f", longer) + ", q=0.25 -> " + fmt("%.2f", narrower) +
               ")");
}

// ---------------------------------------------------------------------------

void fdr_control() {
    const std::size_t m = 20, nulls = 10, reps = 500, tau = 300;
    std::vector<double> fdp(reps);
    bool consistent = true;
    for (std::size_t r = 0; r < reps; ++r) {
        ConceptTrajectories traj;
        traj.alpha = kAlpha;
        for (std::size_t j = 0; j < m; ++j) {
            Rng rng(derive_seed(kSeed, r, j));
            std::normal_distribution<double> normal;
            const double strength = j < nulls ? 0.0 : 0.2 * static_cast<double>(j - nulls + 1);
            std::vector<PairObservation> stream(tau);
            for (auto& p : stream) {
                p.z = normal(rng);
                p.y = strength * p.z + normal(rng);
            }
            TestConfig cfg;
            cfg.alpha = kAlpha;
            cfg.tau_max = tau;
            cfg.stop_on_reject = false;
            cfg.stop_log_wealth = std::log(static_cast<double>(m) / kAlpha);
            traj.log_wealth.push_back(run_skit(stream, cfg).wealth_trajectory);
        }
        const auto out = greedy_fdr(traj);
        consistent = consistent && is_self_consistent(traj, out);
        std::size_t false_rej = 0;
        for (const auto& rej : out.rejected) false_rej += rej.concept_id < nulls ? 1 : 0;
        fdp[r] = out.size() == 0 ? 0.0 : static_cast<double>(false_rej) / static_cast<double>(out.size());
    }
    double mean = 0.0;
    for (double v : fdp) mean += v;
    mean /= static_cast<double>(reps);
    double var = 0.0;
    for (double v : fdp) var += (v - mean) * (v - mean);
    var /= static_cast<double>(reps - 1);
    const double se = std::sqrt(var / static_cast<double>(reps));
    report("fdr-control", mean <= kAlpha + 3.0 * se && consistent,
           "empirical FDR " + fmt("%.4f", mean) + " (SE " + fmt("%.4f", se) + "), self-consistent on all " +
               std::to_string(reps) + " replicates: " + (consistent ? "yes" : "no"));
}

// ---------------------------------------------------------------------------

/// Largest |E[Z1 | Z3 = z3] - analytic| over `grid`, plus the per-point errors.
std::pair<double, std::string> kde_mean_error(const WeightedKdeSampler& kde, const GaussianDgpParams& p,
                                              const std::vector<double>& grid, Rng& rng, double& worst_neff) {
    double worst = 0.0;
    std::string detail;
    const std::vector<std::size_t> cond{2};
    for (double z3 : grid) {
        const std::vector<double> value{z3};
        const auto w = kde.weights_for(cond, value);
        worst_neff = std::max(worst_neff, std::abs(w.n_eff - kde.target_neff()) / kde.target_neff());
        const auto prepared = kde.prepare(cond, value);
        double sum = 0.0;
        const int draws = 40000;
        for (int i = 0; i < draws; ++i) sum += kde.sample(prepared, rng)[0];
        const double err = sum / draws - gaussian_conditional(p.conditional(), z3).mean;
        worst = std::max(worst, std::abs(err));
        detail += (detail.empty() ? "" : " ") + fmt("%+.3f", err);
    }
    return {worst, detail};
}

void sampler_fidelity() {
    GaussianDgpParams p;
    Rng rng(kSeed);
    const auto data = sample_gaussian_dgp(p, 10000, rng);
    const std::vector<double> grid{-1.0, 0.0, 1.0, 2.0, 3.0};
    double worst_neff = 0.0, unused = 0.0;
    const auto [worst, detail] = kde_mean_error(WeightedKdeSampler(data.z, 2000.0), p, grid, rng, worst_neff);
    const auto [worst_small, detail_small] = kde_mean_error(WeightedKdeSampler(data.z, 1000.0), p, grid, rng, unused);
    report("sampler-fidelity", worst <= 0.05 && worst_neff <= 0.01,
           "n=1e4, n_eff=2000, z3 in {-1,0,1,2,3}: mean errors " + detail + " (max " + fmt("%.3f", worst) +
               "); max n_eff rel. error " + fmt("%.4f", worst_neff) + " (diagnostic n_eff=1000: " + detail_small +
               ", max " + fmt("%.3f", worst_small) + ")");
}

// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void determinism(const fs::path& manifest) {
    const fs::path root = fs::temp_directory_path() / "betkit_acceptance_det";
    fs::remove_all(root);
    std::vector<ExperimentConfig> configs;
    configs.push_back(gaussian(TestKind::cskit, {1.0}));
    configs.back().reps = 12;
    configs.back().tau_max = 300;
    configs.push_back(configs.back());
    configs.back().test = TestKind::xskit;
    configs.back().z3_values = {0.5};
    ExperimentConfig counting;
    counting.experiment = Experiment::synthetic_counting;
    counting.test = TestKind::skit;
    counting.reps = 12;
    counting.tau_max = 200;
    counting.seed = kSeed;
    configs.push_back(counting);
    for (auto e : {Experiment::global, Experiment::global_cond, Experiment::local}) {
        ExperimentConfig real;
        real.experiment = e;
        real.manifest = manifest.string();
        real.reps = 3;
        real.tau_max = 100;
        real.seed = kSeed;
        real.concept_name = "concept_0";
        configs.push_back(real);
    }
    bool same = true;
    std::size_t k = 0;
    for (auto cfg : configs) {
        std::string reference;
        for (std::size_t threads : {1u, 4u, 4u}) {
            cfg.threads = threads;
            cfg.out = root / (std::to_string(k++));
            write_outputs(cfg, run_experiment(cfg));
            const std::string csv = slurp(cfg.out / "results.csv");
            if (reference.empty()) reference = csv;
            same = same && !csv.empty() && csv == reference;
        }
    }
    report("determinism", same,
           std::to_string(configs.size()) + " experiments x {1,4,4} threads: results.csv byte-identical " +
               (same ? "yes" : "no"));
}

// ---------------------------------------------------------------------------

void smoke(const fs::path& manifest) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::ostringstream d;
    for (auto e : {Experiment::global, Experiment::global_cond, Experiment::local}) {
        ExperimentConfig cfg;
        cfg.experiment = e;
        cfg.manifest = manifest.string();
        cfg.reps = 2;
        cfg.seed = kSeed;
        cfg.out = fs::temp_directory_path() / ("betkit_acceptance_smoke_" + std::string(to_string(e)));
        const auto t = std::chrono::steady_clock::now();
        const auto res = run_experiment(cfg);
        write_outputs(cfg, res);
        ok = ok && res.rows.size() == 20 && fs::exists(cfg.out / "results.csv");
        d << to_string(e) << " " << fmt("%.1f s", seconds_since(t)) << "; ";
    }
    const double total = seconds_since(t0);
    d << "total " << fmt("%.1f s", total);
    report("smoke-end-to-end (n=2000, d=32, m=20)", ok && total < 120.0, d.str());
}

}  // namespace

int main() {
    const fs::path dir = fs::temp_directory_path() / "betkit_acceptance_toy";
    fs::remove_all(dir);
    const fs::path manifest = dir / "manifest.json";
    save_dataset(manifest, make_toy_dataset(2000, 32, 20, 4, kSeed));

    std::printf("betkit acceptance suite (seed %llu)\n", static_cast<unsigned long long>(kSeed));
    const auto t0 = std::chrono::steady_clock::now();
    payoff_oracle();
    gaussian_suites();
    counting_suite();
    orthogonality();
    fdr_control();
    sampler_fidelity();
    determinism(manifest);
    smoke(manifest);
    std::printf("%d failure(s), %.1f s\n", g_failures, seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
