// Python bindings for the betkit core.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "betkit/betting.hpp"
#include "betkit/datastore.hpp"
#include "betkit/harness.hpp"
#include "betkit/kernels.hpp"
#include "betkit/multiplicity.hpp"
#include "betkit/payoffs.hpp"
#include "betkit/samplers.hpp"
#include "betkit/synthetic.hpp"
#include "betkit/testers.hpp"
#include "betkit/version.hpp"

namespace py = pybind11;
using namespace betkit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
    if (a.ndim() == 1) return Matrix(static_cast<std::size_t>(a.shape(0)), 1, std::vector<double>(a.data(), a.data() + a.size()));
    if (a.ndim() != 2) throw ConfigError("expected a 1-D or 2-D array");
    return Matrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                  std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Matrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw ConfigError("expected a 1-D array");
    return {a.data(), a.data() + a.size()};
}

KernelSpec kernel_from(const std::string& family, double q, std::optional<double> sigma) {
    if (family == "linear") return KernelSpec::linear();
    if (family != "rbf") throw ConfigError("kernel must be 'rbf' or 'linear'");
    return sigma ? KernelSpec::rbf_fixed(*sigma) : KernelSpec::rbf_quantile(q);
}

TestConfig test_config(double alpha, std::size_t tau_max, const std::string& kernel, double bandwidth_q,
                       std::optional<double> bet_fraction, std::uint64_t seed, bool stop_on_reject) {
    TestConfig cfg;
    cfg.alpha = alpha;
    cfg.tau_max = tau_max;
    cfg.set_kernel(kernel_from(kernel, bandwidth_q, std::nullopt));
    if (bet_fraction) cfg.strategy = ConstantBetting{*bet_fraction};
    cfg.seed = seed;
    cfg.stop_on_reject = stop_on_reject;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_betkit, m) {
    m.doc() = "Sequential kernelized independence tests via betting";
    m.attr("__version__") = kVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<SamplerError>(m, "SamplerError", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

    // Betting
    m.def("ons_step_size", &ons_step_size);
    m.def(
        "ons_update",
        [](double a, double v, double kappa) {
            const auto s = ons_update({a, v}, kappa);
            return py::make_tuple(s.a, s.v);
        },
        py::arg("a"), py::arg("v"), py::arg("kappa"), "One online Newton step; returns (a, v).");

    // Kernels
    py::class_<KernelSpec>(m, "KernelSpec")
        .def_static("linear", &KernelSpec::linear)
        .def_static("rbf_quantile", &KernelSpec::rbf_quantile, py::arg("q") = 0.5)
        .def_static("rbf_fixed", &KernelSpec::rbf_fixed, py::arg("sigma"))
        .def("validate", &KernelSpec::validate)
        .def_property_readonly("is_linear", [](const KernelSpec& k) { return k.family == KernelFamily::linear; });
    m.def("eval_kernel", py::overload_cast<const KernelSpec&, double, double, double>(&eval_kernel),
          py::arg("spec"), py::arg("bandwidth"), py::arg("x"), py::arg("y"));

    // Payoffs
    m.def("bounded_tanh", &bounded_tanh);
    py::class_<SkitPayoff>(m, "SkitPayoff")
        .def(py::init<KernelSpec, KernelSpec>(), py::arg("kernel_y"), py::arg("kernel_z"))
        .def("rho", &SkitPayoff::rho, py::arg("y"), py::arg("z"))
        .def(
            "step",
            [](SkitPayoff& p, double y1, double z1, double y2, double z2) { return p.step({y1, z1}, {y2, z2}); },
            py::arg("y1"), py::arg("z1"), py::arg("y2"), py::arg("z2"))
        .def("append", [](SkitPayoff& p, double y, double z) { p.append({y, z}); }, py::arg("y"), py::arg("z"))
        .def_property_readonly("bandwidth_y", &SkitPayoff::bandwidth_y)
        .def_property_readonly("bandwidth_z", &SkitPayoff::bandwidth_z);
    py::class_<CskitPayoff>(m, "CskitPayoff")
        .def(py::init<KernelSpec, KernelSpec, KernelSpec, std::size_t>(), py::arg("kernel_y"),
             py::arg("kernel_zj"), py::arg("kernel_rest"), py::arg("rest_dim"))
        .def("rho", [](const CskitPayoff& p, double y, double zj, const std::vector<double>& r) { return p.rho(y, zj, r); },
             py::arg("y"), py::arg("zj"), py::arg("zrest"))
        .def(
            "step",
            [](CskitPayoff& p, double y, double zj, std::vector<double> r, double zt) {
                return p.step({y, zj, std::move(r)}, zt);
            },
            py::arg("y"), py::arg("zj"), py::arg("zrest"), py::arg("zj_tilde"))
        .def("__len__", &CskitPayoff::size);
    py::class_<XskitPayoff>(m, "XskitPayoff")
        .def(py::init<KernelSpec>(), py::arg("kernel_y"))
        .def("rho", &XskitPayoff::rho, py::arg("y"))
        .def("step", &XskitPayoff::step, py::arg("y_test"), py::arg("y_null"))
        .def("append", &XskitPayoff::append, py::arg("y_test"), py::arg("y_null"))
        .def_property_readonly("bandwidth", &XskitPayoff::bandwidth);

    // Testers
    py::class_<TestOutcome>(m, "TestOutcome")
        .def_readonly("rejected", &TestOutcome::rejected)
        .def_readonly("samples_used", &TestOutcome::samples_used)
        .def_readonly("normalized_tau", &TestOutcome::normalized_tau)
        .def_readonly("wealth_trajectory", &TestOutcome::wealth_trajectory)
        .def_readonly("rejection_step", &TestOutcome::rejection_step);

    m.def(
        "run_skit",
        [](const Array& y, const Array& z, double alpha, std::size_t tau_max, const std::string& kernel,
           double bandwidth_q, std::optional<double> bet_fraction, bool stop_on_reject) {
            const auto ys = to_vector(y), zs = to_vector(z);
            if (ys.size() != zs.size()) throw ConfigError("y and z differ in length");
            std::vector<PairObservation> stream(ys.size());
            for (std::size_t i = 0; i < ys.size(); ++i) stream[i] = {ys[i], zs[i]};
            const auto cfg = test_config(alpha, tau_max, kernel, bandwidth_q, bet_fraction, 0, stop_on_reject);
            py::gil_scoped_release release;
            return run_skit(stream, cfg);
        },
        py::arg("y"), py::arg("z"), py::arg("alpha") = 0.05, py::arg("tau_max") = 1000,
        py::arg("kernel") = "rbf", py::arg("bandwidth_q") = 0.5, py::arg("bet_fraction") = py::none(),
        py::arg("stop_on_reject") = true, "Tests Y independent of Z from paired samples.");
    m.def(
        "run_cskit",
        [](const Array& y, const Array& zj, const Array& zrest, const std::function<double(std::vector<double>)>& sampler,
           double alpha, std::size_t tau_max, const std::string& kernel, double bandwidth_q,
           std::optional<double> bet_fraction, std::uint64_t seed) {
            const auto ys = to_vector(y), zs = to_vector(zj);
            const Matrix rest = to_matrix(zrest);
            if (ys.size() != zs.size() || rest.rows() != ys.size()) throw ConfigError("inputs differ in length");
            std::vector<TripletObservation> stream(ys.size());
            for (std::size_t i = 0; i < ys.size(); ++i) {
                const auto r = rest.row(i);
                stream[i] = {ys[i], zs[i], {r.begin(), r.end()}};
            }
            ConditionalSampler cond = [&](std::span<const double> r, Rng&) {
                return sampler(std::vector<double>(r.begin(), r.end()));
            };
            return run_cskit(stream, cond, test_config(alpha, tau_max, kernel, bandwidth_q, bet_fraction, seed, true));
        },
        py::arg("y"), py::arg("zj"), py::arg("zrest"), py::arg("sampler"), py::arg("alpha") = 0.05,
        py::arg("tau_max") = 1000, py::arg("kernel") = "rbf", py::arg("bandwidth_q") = 0.5,
        py::arg("bet_fraction") = py::none(), py::arg("seed") = 0,
        "Tests Y independent of Z_j given Z_-j; `sampler(zrest)` draws from the conditional of Z_j.");
    m.def(
        "run_xskit",
        [](const std::function<double(std::vector<std::size_t>)>& sampler, std::size_t j,
           const std::vector<std::size_t>& subset, double alpha, std::size_t tau_max, const std::string& kernel,
           double bandwidth_q, std::optional<double> bet_fraction, std::uint64_t seed) {
            ResponseSampler respond = [&](std::span<const std::size_t> c, Rng&) {
                return sampler(std::vector<std::size_t>(c.begin(), c.end()));
            };
            return run_xskit(respond, j, subset, test_config(alpha, tau_max, kernel, bandwidth_q, bet_fraction, seed, true));
        },
        py::arg("sampler"), py::arg("j"), py::arg("subset"), py::arg("alpha") = 0.05, py::arg("tau_max") = 1000,
        py::arg("kernel") = "rbf", py::arg("bandwidth_q") = 0.5, py::arg("bet_fraction") = py::none(),
        py::arg("seed") = 0,
        "Local test of concept j given `subset`; `sampler(fixed)` returns a model response with the "
        "concepts in `fixed` pinned.");

    // Multiple testing and metrics
    m.def(
        "greedy_fdr",
        [](const std::vector<std::vector<double>>& log_wealth, double alpha) {
            const ConceptTrajectories traj{log_wealth, alpha};
            const auto out = greedy_fdr(traj);
            py::list rejected;
            for (const auto& r : out.rejected) rejected.append(py::make_tuple(r.concept_id, r.adjusted_tau, r.log_wealth));
            return py::make_tuple(rejected, is_self_consistent(traj, out));
        },
        py::arg("log_wealth"), py::arg("alpha") = 0.05,
        "Returns ([(concept, adjusted_tau, log_wealth), ...], self_consistent).");
    m.def("weighted_kendall_tau",
          [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) { return weighted_kendall_tau(a, b); },
          py::arg("reference"), py::arg("other"));
    m.def("importance_agreement",
          [](const std::vector<double>& a, const std::vector<double>& b, double alpha) {
              return importance_agreement(a, b, alpha);
          },
          py::arg("rates_a"), py::arg("rates_b"), py::arg("alpha") = 0.05);
    m.def("importance_f1", &importance_f1, py::arg("predicted"), py::arg("truth"), py::arg("universe"));

    // Synthetic data
    m.def("sigmoid", &sigmoid);
    m.def(
        "gaussian_conditional",
        [](double z3, double mu1, double sigma1, double sigma3) {
            const auto r = gaussian_conditional({mu1, sigma1, sigma3}, z3);
            return py::make_tuple(r.mean, r.variance);
        },
        py::arg("z3"), py::arg("mu1") = 1.0, py::arg("sigma1") = 1.0, py::arg("sigma3") = 1.0);
    m.def(
        "sample_gaussian_dgp",
        [](std::size_t n, double beta1, double beta2, double beta3, std::uint64_t seed) {
            GaussianDgpParams p;
            p.beta1 = beta1;
            p.beta2 = beta2;
            p.beta3 = beta3;
            Rng rng(seed);
            const auto s = sample_gaussian_dgp(p, n, rng);
            return py::make_tuple(to_array(s.z), Array(s.y.size(), s.y.data()));
        },
        py::arg("n"), py::arg("beta1") = 0.0, py::arg("beta2") = 0.0, py::arg("beta3") = 0.0, py::arg("seed") = 0,
        "Returns (z of shape (n, 3), y of shape (n,)).");

    // Samplers
    py::class_<WeightedKdeSampler>(m, "WeightedKdeSampler")
        .def(py::init([](const Array& data, double target_neff, double smoothing) {
                 return WeightedKdeSampler(to_matrix(data), target_neff, smoothing);
             }),
             py::arg("data"), py::arg("target_neff") = WeightedKdeSampler::kDefaultTargetNeff,
             py::arg("smoothing_scale") = 1.0)
        .def(
            "effective_size_at",
            [](const WeightedKdeSampler& s, const std::vector<std::size_t>& dims, const std::vector<double>& cond) {
                const auto w = s.weights_for(dims, cond);
                return py::make_tuple(w.nu, w.n_eff);
            },
            py::arg("dims"), py::arg("condition"), "Returns (nu, n_eff) at the sampler's target.")
        .def(
            "sample",
            [](const WeightedKdeSampler& s, const std::vector<std::size_t>& subset, const std::vector<double>& values,
               std::size_t n, std::uint64_t seed) {
                const auto prepared = s.prepare(subset, values);
                Rng rng(seed);
                Matrix out(n, s.dims());
                for (std::size_t i = 0; i < n; ++i) {
                    const auto z = s.sample(prepared, rng);
                    std::copy(z.begin(), z.end(), out.row(i).begin());
                }
                return to_array(out);
            },
            py::arg("subset"), py::arg("values"), py::arg("n") = 1, py::arg("seed") = 0,
            "Draws n concept vectors with `subset` pinned to `values`.");

    // Datastore
    m.def("read_npy", [](const std::filesystem::path& p) { return to_array(read_npy(p)); });
    m.def("write_npy", [](const std::filesystem::path& p, const Array& a) { write_npy(p, to_matrix(a)); });
    m.def(
        "make_toy_dataset",
        [](const std::filesystem::path& manifest, std::size_t n, std::size_t d, std::size_t concepts,
           std::size_t important, std::uint64_t seed) {
            save_dataset(manifest, make_toy_dataset(n, d, concepts, important, seed));
        },
        py::arg("manifest"), py::arg("n") = 2000, py::arg("d") = 32, py::arg("m") = 20, py::arg("important") = 4,
        py::arg("seed") = 0, "Writes a synthetic embedding dataset and its manifest.");
    m.def(
        "load_concepts",
        [](const std::filesystem::path& manifest) {
            const auto ds = load_dataset(manifest);
            return py::make_tuple(to_array(project_concepts(ds.embeddings, ds.concepts)), ds.concepts.names,
                                  ds.classifier.class_names);
        },
        py::arg("manifest"), "Returns (concept projections, concept names, class names).");

    // Harness
    m.def(
        "run_experiment",
        [](const std::string& experiment, const std::string& test, double alpha, std::optional<std::size_t> tau_max,
           const std::string& kernel, std::optional<double> bandwidth_q, std::size_t reps, std::uint64_t seed,
           std::optional<std::vector<double>> betas, std::optional<std::vector<double>> z3_values,
           const std::string& manifest, const std::string& concept_name, const std::string& class_name,
           const std::string& sample_id, std::size_t cond_size, std::size_t threads) {
            ExperimentConfig cfg;
            cfg.experiment = parse_experiment(experiment);
            cfg.test = parse_test_kind(test);
            cfg.alpha = alpha;
            cfg.tau_max = tau_max;
            cfg.kernel = kernel;
            cfg.bandwidth_q = bandwidth_q;
            cfg.reps = reps;
            cfg.seed = seed;
            if (betas) cfg.betas = *betas;
            if (z3_values) cfg.z3_values = *z3_values;
            cfg.manifest = manifest;
            cfg.concept_name = concept_name;
            cfg.class_name = class_name;
            cfg.sample_id = sample_id;
            cfg.cond_size = cond_size;
            cfg.threads = threads;
            ExperimentResult res;
            {
                py::gil_scoped_release release;
                res = run_experiment(cfg);
            }
            py::list rows;
            for (const auto& r : res.rows) {
                py::dict d;
                d["setting"] = r.setting;
                d["concept"] = r.concept_name;
                d["rejection_rate"] = r.rejection_rate;
                d["mean_normalized_tau"] = r.mean_normalized_tau;
                d["fdr_rank"] = r.fdr_rank;
                d["fdr_selected_rate"] = r.fdr_selected_rate;
                rows.append(d);
            }
            return py::make_tuple(rows, results_csv(res));
        },
        py::arg("experiment"), py::arg("test") = "skit", py::arg("alpha") = 0.05, py::arg("tau_max") = py::none(),
        py::arg("kernel") = "rbf", py::arg("bandwidth_q") = py::none(), py::arg("reps") = 100, py::arg("seed") = 0,
        py::arg("betas") = py::none(), py::arg("z3_values") = py::none(), py::arg("manifest") = "",
        py::arg("concept") = "", py::arg("class_name") = "", py::arg("sample_id") = "", py::arg("cond_size") = 1,
        py::arg("threads") = 0, "Runs an experiment; returns (rows as dicts, results.csv text).");
}
