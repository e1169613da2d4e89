#pragma once

#include <Eigen/Dense>

namespace cer {

// Row-major throughout: one sample per row, matching the on-disk cache layout.
using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecD = Eigen::VectorXd;

/// Row-wise softmax with max-shift for stability.
MatD softmax_rows(const MatD& logits);

bool all_finite(const MatD& m);
bool all_finite(const MatF& m);

} // namespace cer
