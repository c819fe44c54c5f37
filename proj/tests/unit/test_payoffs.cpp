#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "betkit/common.hpp"
#include "betkit/payoffs.hpp"
#include "oracles.hpp"

using namespace betkit;

namespace {

KernelSpec to_spec(const oracle::Kernel& k) {
    if (!k.rbf) return KernelSpec::linear();
    return k.fixed_sigma > 0 ? KernelSpec::rbf_fixed(k.fixed_sigma) : KernelSpec::rbf_quantile(k.q);
}

const oracle::Kernel kKernels[] = {{true, 0.5, 0.0}, {true, 0.9, 0.0}, {false, 0.5, 0.0}, {true, 0.5, 0.7}};

}  // namespace

TEST(Payoffs, BoundedTanhStaysInside) {
    EXPECT_LT(bounded_tanh(1e3), 1.0);
    EXPECT_GT(bounded_tanh(-1e3), -1.0);
    EXPECT_DOUBLE_EQ(bounded_tanh(0.3), std::tanh(0.3));
}

TEST(Payoffs, SkitFirstStepIsZero) {
    SkitPayoff p(KernelSpec::rbf_quantile(0.5), KernelSpec::rbf_quantile(0.5));
    EXPECT_EQ(p.step({1.0, 2.0}, {0.0, -1.0}), 0.0);
    EXPECT_EQ(p.history_y().size(), 2u);
}

TEST(Payoffs, SkitMatchesOracle) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    for (const auto& ky : kKernels) {
        for (const auto& kz : kKernels) {
            SkitPayoff p(to_spec(ky), to_spec(kz));
            std::vector<double> hy, hz;
            for (int t = 0; t < 8; ++t) {
                const PairObservation d1{normal(rng), normal(rng)}, d2{normal(rng), normal(rng)};
                const double expected =
                    hy.empty() ? 0.0
                               : std::tanh(oracle::skit_rho(ky, kz, hy, hz, d1.y, d1.z) +
                                           oracle::skit_rho(ky, kz, hy, hz, d2.y, d2.z) -
                                           oracle::skit_rho(ky, kz, hy, hz, d1.y, d2.z) -
                                           oracle::skit_rho(ky, kz, hy, hz, d2.y, d1.z));
                const double got = p.step(d1, d2);
                EXPECT_NEAR(got, expected, 1e-12);
                hy.insert(hy.end(), {d1.y, d2.y});
                hz.insert(hz.end(), {d1.z, d2.z});
                const double y = normal(rng), z = normal(rng);
                EXPECT_NEAR(p.rho(y, z), oracle::skit_rho(ky, kz, hy, hz, y, z), 1e-12);
            }
        }
    }
}

TEST(Payoffs, SkitAntisymmetricUnderSwap) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal;
    SkitPayoff a(KernelSpec::rbf_quantile(0.5), KernelSpec::rbf_quantile(0.5));
    for (int t = 0; t < 10; ++t) a.step({normal(rng), normal(rng)}, {normal(rng), normal(rng)});
    SkitPayoff b = a;
    const PairObservation d1{0.3, -0.4}, d2{-1.1, 0.8};
    const double k = a.step(d1, d2);
    const double k_swapped = b.step({d1.y, d2.z}, {d2.y, d1.z});
    EXPECT_NEAR(k, -k_swapped, 1e-14);
}

TEST(Payoffs, SkitPredictable) {
    // The payoff at a step depends only on earlier observations.
    SkitPayoff a(KernelSpec::rbf_quantile(0.5), KernelSpec::rbf_quantile(0.5));
    SkitPayoff b = a;
    a.step({0.1, 0.2}, {0.3, 0.4});
    b.step({0.1, 0.2}, {0.3, 0.4});
    const double ka = a.step({1.0, 1.0}, {-1.0, -1.0});
    const double kb = b.step({1.0, 1.0}, {-1.0, -1.0});
    EXPECT_EQ(ka, kb);
    a.step({5.0, 5.0}, {4.0, 4.0});
    b.step({-5.0, 2.0}, {4.0, 0.0});
    EXPECT_NE(a.rho(0.0, 0.0), b.rho(0.0, 0.0));
}

TEST(Payoffs, CskitMatchesOracle) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal;
    for (std::size_t rest_dim : {0u, 1u, 3u}) {
        for (const auto& ky : kKernels) {
            for (const auto& kz : kKernels) {
                const oracle::Kernel& kr = kKernels[(rest_dim + 1) % 4];
                CskitPayoff p(to_spec(ky), to_spec(kz), to_spec(kr), rest_dim);
                std::vector<double> hy, hzj, hzt;
                std::vector<oracle::Point> hrest;
                for (int t = 0; t < 10; ++t) {
                    TripletObservation obs{normal(rng), normal(rng), std::vector<double>(rest_dim)};
                    for (double& x : obs.zrest) x = normal(rng);
                    const double zt = normal(rng);
                    const double expected =
                        hy.empty() ? 0.0
                                   : std::tanh(oracle::cskit_rho(ky, kz, kr, hy, hzj, hzt, hrest, obs.y,
                                                                 obs.zj, obs.zrest) -
                                               oracle::cskit_rho(ky, kz, kr, hy, hzj, hzt, hrest, obs.y,
                                                                 zt, obs.zrest));
                    EXPECT_NEAR(p.step(obs, zt), expected, 1e-12) << "rest_dim=" << rest_dim;
                    hy.push_back(obs.y);
                    hzj.push_back(obs.zj);
                    hzt.push_back(zt);
                    hrest.push_back(obs.zrest);
                }
            }
        }
    }
}

TEST(Payoffs, CskitZeroWhenResampleEqualsObserved) {
    CskitPayoff p(KernelSpec::rbf_quantile(0.5), KernelSpec::rbf_quantile(0.5),
                  KernelSpec::rbf_quantile(0.5), 2);
    p.step({0.1, 0.2, {0.0, 1.0}}, -0.3);
    p.step({0.5, -0.2, {1.0, 1.0}}, 0.9);
    EXPECT_NEAR(p.step({0.4, 0.7, {0.5, 0.5}}, 0.7), 0.0, 1e-15);
    EXPECT_EQ(p.size(), 3u);
    EXPECT_THROW(p.step({0.0, 0.0, {1.0}}, 0.0), ConfigError);
}

TEST(Payoffs, XskitMatchesOracle) {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> normal;
    for (const auto& k : kKernels) {
        XskitPayoff p(to_spec(k));
        std::vector<double> test, null;
        for (int t = 0; t < 10; ++t) {
            const double a = normal(rng), b = 0.5 * normal(rng) + 1.0;
            const double expected = test.empty() ? 0.0
                                                 : std::tanh(oracle::xskit_rho(k, test, null, a) -
                                                             oracle::xskit_rho(k, test, null, b));
            EXPECT_NEAR(p.step(a, b), expected, 1e-12);
            test.push_back(a);
            null.push_back(b);
        }
    }
}

TEST(Payoffs, XskitAntisymmetric) {
    XskitPayoff a(KernelSpec::rbf_quantile(0.5));
    for (int t = 0; t < 5; ++t) a.step(0.1 * t, -0.2 * t);
    XskitPayoff b = a;
    EXPECT_NEAR(a.step(0.7, 0.2), -b.step(0.2, 0.7), 1e-15);
}
