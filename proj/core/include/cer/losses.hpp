#pragma once

#include <vector>

#include "cer/matrix.hpp"

namespace cer {

struct LossWeights {
  double lambda_basic = 1.0;
  double lambda_cl = 0.1;
  double temperature = 0.07;
};

/// Probability floor applied inside every log to avoid -inf on saturated rows.
inline constexpr double kProbFloor = 1e-12;

/// Mean over the batch of -log(probs[i, target_i] + floor). Rows must be
/// distributions (sum 1 +- 1e-6, entries >= 0); targets must lie in [0, K).
double cross_entropy(const MatD& probs, const std::vector<int>& targets);

/// NT-Xent over the 2B-view batch built from the paired rows of z1 and z2.
/// Rows are L2-normalized internally; each view's positive is its pair, the
/// other 2B-2 views are negatives. Throws BatchTooSmall when B < 2.
double contrastive_nt_xent(const MatD& z1, const MatD& z2, double temperature);

/// Same value, also accumulating d(loss)/dz1 and d(loss)/dz2 when the output
/// pointers are non-null.
double contrastive_nt_xent_grad(const MatD& z1, const MatD& z2, double temperature,
                                MatD* grad_z1, MatD* grad_z2);

/// l_ce + lambda_basic * l_basic + lambda_cl * l_cl.
double total_loss(double l_ce, double l_basic, double l_cl, const LossWeights& w);

} // namespace cer
