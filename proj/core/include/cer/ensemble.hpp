#pragma once

#include <string>
#include <vector>

#include "cer/matrix.hpp"

namespace cer {

struct EnsembleConfig {
  std::vector<std::string> member_names;
  std::vector<double> weights; ///< >= 0, not all zero; empty = uniform
};

/// Entrywise weighted arithmetic mean of row-stochastic matrices, weights
/// normalized to sum 1. All members must share one shape; every row must be
/// a distribution. Throws ShapeMismatch / InvalidDistribution /
/// AllZeroWeights (also used for negative weights).
MatD fuse_probs(const std::vector<MatD>& members, const std::vector<double>& weights);

/// Row-wise argmax; exact ties go to the lowest class index.
std::vector<int> predict_labels(const MatD& probs);

} // namespace cer
