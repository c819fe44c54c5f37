#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "betkit/common.hpp"

namespace betkit {

enum class ScoreMode { logit, softmax };

/// Linear zero-shot classifier: one unit-norm weight row per class.
struct Classifier {
    Matrix weights;  ///< k x d
    std::vector<std::string> class_names;
    ScoreMode score_mode = ScoreMode::logit;
    double temperature = 1.0;
    std::size_t target_class = 0;

    void validate() const;
    std::size_t classes() const noexcept { return weights.rows(); }
    std::size_t dim() const noexcept { return weights.cols(); }
};

/// Score of the target class for embedding `h`: <w_k', h> in logit mode, or
/// exp(<w_k',h>/T) / sum_k exp(<w_k,h>/T) in softmax mode.
double classify(const Classifier& classifier, std::span<const double> h);

/// Index of the largest logit.
std::size_t predicted_class(const Classifier& classifier, std::span<const double> h);

}  // namespace betkit
