#include "betkit/synthetic.hpp"

#include <cmath>

namespace betkit {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double gaussian_response(const GaussianDgpParams& p, std::span<const double> z) {
    if (z.size() != 3) throw ConfigError("Gaussian response expects three concepts");
    return sigmoid(p.beta1 * z[0] + p.beta2 * z[1] * z[2] + p.beta3 * z[2]);
}

GaussianSample sample_gaussian_dgp(const GaussianDgpParams& p, std::size_t n, Rng& rng) {
    GaussianSample out{Matrix(n, 3), std::vector<double>(n)};
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = p.mu1 + p.sigma1 * normal(rng);
        const double z2 = p.mu2 + p.sigma2 * normal(rng);
        const double z3 = z1 + p.sigma3 * normal(rng);
        out.z(i, 0) = z1;
        out.z(i, 1) = z2;
        out.z(i, 2) = z3;
        out.y[i] = gaussian_response(p, out.z.row(i)) + p.sigma0 * normal(rng);
    }
    return out;
}

std::array<double, 3> sample_gaussian_given_subset(const GaussianDgpParams& p,
                                                   std::span<const std::size_t> subset,
                                                   std::span<const double> values, Rng& rng) {
    if (subset.size() != values.size()) throw ConfigError("conditioning values/subset mismatch");
    std::array<bool, 3> fixed{false, false, false};
    std::array<double, 3> z{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < subset.size(); ++k) {
        if (subset[k] >= 3 || fixed[subset[k]]) throw ConfigError("invalid conditioning index");
        fixed[subset[k]] = true;
        z[subset[k]] = values[k];
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    // Z2 is independent of (Z1, Z3).
    if (!fixed[1]) z[1] = p.mu2 + p.sigma2 * normal(rng);
    if (!fixed[0] && !fixed[2]) {
        z[0] = p.mu1 + p.sigma1 * normal(rng);
        z[2] = z[0] + p.sigma3 * normal(rng);
    } else if (!fixed[0]) {
        const NormalMoments m = gaussian_conditional(p.conditional(), z[2]);
        z[0] = m.mean + std::sqrt(m.variance) * normal(rng);
    } else if (!fixed[2]) {
        z[2] = z[0] + p.sigma3 * normal(rng);
    }
    return z;
}

double sample_gaussian_zj_given_rest(const GaussianDgpParams& p, std::size_t j,
                                     std::span<const double> zrest, Rng& rng) {
    if (j >= 3 || zrest.size() != 2) throw ConfigError("Gaussian DGP has three concepts");
    std::array<std::size_t, 2> rest{};
    std::size_t k = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        if (c != j) rest[k++] = c;
    }
    return sample_gaussian_given_subset(p, rest, zrest, rng)[j];
}

// ---------------------------------------------------------------------------

namespace counting {
std::string_view name(std::size_t idx) {
    static constexpr std::array<std::string_view, kConcepts> names{
        "blue zeros", "orange threes", "green fives", "red threes", "blue twos", "purple sevens"};
    if (idx >= kConcepts) throw ConfigError("counting concept out of range");
    return names[idx];
}
}  // namespace counting

namespace {

constexpr std::array<int, 3> kZeroToTwo{0, 1, 2};
constexpr std::array<int, 3> kOneToThree{1, 2, 3};
constexpr std::array<int, 2> kOneToTwo{1, 2};
constexpr std::array<int, 2> kTwoToThree{2, 3};

/// Cat({1,2,3}) probabilities of green fives given blue zeros.
double fives_given_zeros(int fives, int zeros) {
    return fives - 1 == zeros ? 0.75 : 0.125;
}

double red_given(const CountingDgpParams& p, int red, int orange, int fives) {
    const double prob_three = orange * fives >= 3 ? p.alpha_flip : 1.0 - p.alpha_flip;
    return red == 3 ? prob_three : 1.0 - prob_three;
}

double dither(Rng& rng) { return std::uniform_real_distribution<double>(-0.5, 0.5)(rng); }

int nearest_count(double z) { return static_cast<int>(std::lround(z)); }

template <typename Fn>
void for_each_count_vector(Fn&& fn) {
    CountVector c{};
    for (int a : kZeroToTwo)
        for (int b : kZeroToTwo)
            for (int f : kOneToThree)
                for (int r : kTwoToThree)
                    for (int t : kOneToTwo)
                        for (int s : kOneToTwo) {
                            c = {a, b, f, r, t, s};
                            fn(c);
                        }
}

bool matches(const CountVector& c, std::span<const std::pair<std::size_t, double>> given) {
    for (const auto& [idx, value] : given) {
        if (idx >= counting::kConcepts) throw ConfigError("counting concept out of range");
        if (c[idx] != nearest_count(value)) return false;
    }
    return true;
}

}  // namespace

std::span<const int> counting_support(std::size_t idx) {
    using namespace counting;
    switch (idx) {
        case kBlueZeros:
        case kOrangeThrees:
            return kZeroToTwo;
        case kGreenFives:
            return kOneToThree;
        case kRedThrees:
            return kTwoToThree;
        case kBlueTwos:
        case kPurpleSevens:
            return kOneToTwo;
        default:
            throw ConfigError("counting concept out of range");
    }
}

double counting_joint_probability(const CountingDgpParams& p, const CountVector& c) {
    using namespace counting;
    auto in = [](std::span<const int> s, int v) {
        for (int x : s)
            if (x == v) return true;
        return false;
    };
    for (std::size_t k = 0; k < kConcepts; ++k) {
        if (!in(counting_support(k), c[k])) return 0.0;
    }
    return (1.0 / 3.0) * (1.0 / 3.0) * 0.5 * 0.5 * fives_given_zeros(c[kGreenFives], c[kBlueZeros]) *
           red_given(p, c[kRedThrees], c[kOrangeThrees], c[kGreenFives]);
}

Matrix sample_counting_dgp(const CountingDgpParams& p, std::size_t n, Rng& rng) {
    using namespace counting;
    Matrix out(n, kConcepts);
    std::uniform_int_distribution<int> zero_to_two(0, 2);
    std::uniform_int_distribution<int> one_to_two(1, 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const int zeros = zero_to_two(rng);
        const int orange = zero_to_two(rng);
        const int twos = one_to_two(rng);
        const int sevens = one_to_two(rng);
        // Categorical over {1,2,3} with 3/4 on fives = zeros + 1.
        const double u = unit(rng);
        int fives = 0;
        double acc = 0.0;
        for (int f : kOneToThree) {
            acc += fives_given_zeros(f, zeros);
            fives = f;
            if (u < acc) break;
        }
        const int red = 2 + (unit(rng) < red_given(p, 3, orange, fives) ? 1 : 0);
        const CountVector c{zeros, orange, fives, red, twos, sevens};
        for (std::size_t k = 0; k < kConcepts; ++k) out(i, k) = c[k] + dither(rng);
    }
    return out;
}

std::vector<std::pair<int, double>> counting_posterior(
    const CountingDgpParams& p, std::size_t j,
    std::span<const std::pair<std::size_t, double>> given) {
    const auto support = counting_support(j);
    std::vector<std::pair<int, double>> post;
    for (int v : support) post.emplace_back(v, 0.0);
    double total = 0.0;
    for_each_count_vector([&](const CountVector& c) {
        if (!matches(c, given)) return;
        const double pr = counting_joint_probability(p, c);
        for (auto& [v, mass] : post) {
            if (c[j] == v) mass += pr;
        }
        total += pr;
    });
    if (!(total > 0.0)) throw SamplerError("conditioning event has probability zero");
    for (auto& entry : post) entry.second /= total;
    return post;
}

double counting_conditional_sample(const CountingDgpParams& p, std::size_t j,
                                   std::span<const std::pair<std::size_t, double>> given,
                                   Rng& rng) {
    const auto post = counting_posterior(p, j, given);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    int value = post.back().first;
    for (const auto& [v, mass] : post) {
        acc += mass;
        if (u < acc) {
            value = v;
            break;
        }
    }
    return value + dither(rng);
}

std::array<double, counting::kConcepts> counting_conditional_joint(
    const CountingDgpParams& p, std::span<const std::pair<std::size_t, double>> given, Rng& rng) {
    std::vector<CountVector> atoms;
    std::vector<double> mass;
    double total = 0.0;
    for_each_count_vector([&](const CountVector& c) {
        if (!matches(c, given)) return;
        const double pr = counting_joint_probability(p, c);
        if (pr <= 0.0) return;
        atoms.push_back(c);
        mass.push_back(pr);
        total += pr;
    });
    if (!(total > 0.0)) throw SamplerError("conditioning event has probability zero");
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double acc = 0.0;
    std::size_t pick = atoms.size() - 1;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        acc += mass[i];
        if (u < acc) {
            pick = i;
            break;
        }
    }
    std::array<double, counting::kConcepts> z{};
    std::array<bool, counting::kConcepts> fixed{};
    for (const auto& [idx, value] : given) {
        z[idx] = value;
        fixed[idx] = true;
    }
    for (std::size_t k = 0; k < counting::kConcepts; ++k) {
        if (!fixed[k]) z[k] = atoms[pick][k] + dither(rng);
    }
    return z;
}

double counting_oracle_predictor(std::span<const double> z, Rng& rng) {
    if (z.size() != counting::kConcepts) throw ConfigError("counting predictor expects six concepts");
    return static_cast<double>(nearest_count(z[counting::kRedThrees])) + dither(rng);
}

}  // namespace betkit
