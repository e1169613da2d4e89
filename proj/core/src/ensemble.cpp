#include "cer/ensemble.hpp"

#include <cmath>

#include "cer/errors.hpp"

namespace cer {

namespace {

void check_rows_stochastic(const MatD& m, std::size_t member) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double p = m(i, j);
      if (!std::isfinite(p) || p < 0.0)
        throw InvalidDistribution("fuse_probs: member " + std::to_string(member) + " row " +
                                  std::to_string(i) + " has an invalid entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw InvalidDistribution("fuse_probs: member " + std::to_string(member) + " row " +
                                std::to_string(i) + " sums to " + std::to_string(sum));
  }
}

} // namespace

MatD fuse_probs(const std::vector<MatD>& members, const std::vector<double>& weights) {
  if (members.empty()) throw ShapeMismatch("fuse_probs: no member outputs given");
  const Eigen::Index rows = members.front().rows();
  const Eigen::Index cols = members.front().cols();
  for (std::size_t m = 0; m < members.size(); ++m) {
    if (members[m].rows() != rows || members[m].cols() != cols)
      throw ShapeMismatch("fuse_probs: member " + std::to_string(m) + " is " +
                          std::to_string(members[m].rows()) + "x" +
                          std::to_string(members[m].cols()) + ", expected " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    check_rows_stochastic(members[m], m);
  }

  std::vector<double> w = weights;
  if (w.empty()) w.assign(members.size(), 1.0);
  if (w.size() != members.size())
    throw LengthMismatch("fuse_probs: " + std::to_string(w.size()) + " weights for " +
                         std::to_string(members.size()) + " members");
  double total = 0.0;
  for (const double x : w) {
    if (!std::isfinite(x) || x < 0.0)
      throw AllZeroWeights("fuse_probs: weights must be finite and non-negative");
    total += x;
  }
  if (total <= 0.0) throw AllZeroWeights("fuse_probs: ensemble weights sum to zero");

  MatD fused = MatD::Zero(rows, cols);
  for (std::size_t m = 0; m < members.size(); ++m) fused += (w[m] / total) * members[m];
  return fused;
}

std::vector<int> predict_labels(const MatD& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    int arg = 0;
    for (Eigen::Index j = 1; j < probs.cols(); ++j)
      if (probs(i, j) > probs(i, arg)) arg = static_cast<int>(j);
    out[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

} // namespace cer
