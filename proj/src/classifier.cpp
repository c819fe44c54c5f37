#include "betkit/classifier.hpp"

#include <algorithm>
#include <cmath>

namespace betkit {

void Classifier::validate() const {
    if (weights.rows() == 0 || weights.cols() == 0) throw ConfigError("classifier has no classes");
    if (!class_names.empty() && class_names.size() != weights.rows()) {
        throw ConfigError("classifier class names do not match weight rows");
    }
    if (target_class >= weights.rows()) throw ConfigError("target class out of range");
    if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be positive");
}

double classify(const Classifier& c, std::span<const double> h) {
    if (h.size() != c.dim()) throw ConfigError("classifier: embedding dimension mismatch");
    const double target = dot(c.weights.row(c.target_class), h);
    if (c.score_mode == ScoreMode::logit) return target;
    // Shift by the largest logit for a stable softmax.
    std::vector<double> logits(c.classes());
    for (std::size_t k = 0; k < c.classes(); ++k) logits[k] = dot(c.weights.row(k), h) / c.temperature;
    const double top = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double l : logits) denom += std::exp(l - top);
    return std::exp(target / c.temperature - top) / denom;
}

std::size_t predicted_class(const Classifier& c, std::span<const double> h) {
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t k = 0; k < c.classes(); ++k) {
        const double s = dot(c.weights.row(k), h);
        if (s > best_score) {
            best_score = s;
            best = k;
        }
    }
    return best;
}

}  // namespace betkit
