#include "cer/losses.hpp"

#include <cmath>

#include "cer/errors.hpp"

namespace cer {

double cross_entropy(const MatD& probs, const std::vector<int>& targets) {
  if (static_cast<Eigen::Index>(targets.size()) != probs.rows())
    throw LengthMismatch("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(probs.rows()) + " rows");
  if (probs.rows() == 0) throw LengthMismatch("cross_entropy: empty batch");

  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if ((probs.row(i).array() < 0.0).any() || std::abs(probs.row(i).sum() - 1.0) > 1e-6)
      throw InvalidDistribution("cross_entropy: row " + std::to_string(i) +
                                " is not a probability distribution");
  }

  double sum = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= probs.cols())
      throw LabelOutOfRange("cross_entropy: target " + std::to_string(t) + " outside [0, " +
                            std::to_string(probs.cols()) + ")");
    sum += -std::log(probs(i, t) + kProbFloor);
  }
  return sum / static_cast<double>(probs.rows());
}

namespace {

// Rows of z normalized to unit length; zero rows get a tiny-norm guard.
MatD l2_normalize_rows(const MatD& z, VecD& norms) {
  MatD u(z.rows(), z.cols());
  norms.resize(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    norms(i) = z.row(i).norm() + 1e-12;
    u.row(i) = z.row(i) / norms(i);
  }
  return u;
}

double nt_xent_impl(const MatD& z1, const MatD& z2, double temperature, MatD* grad_z1,
                    MatD* grad_z2) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols())
    throw ShapeMismatch("nt_xent: view shapes differ");
  const Eigen::Index b = z1.rows();
  if (b < 2) throw BatchTooSmall("nt_xent needs a batch of at least 2 (no negatives otherwise)");
  if (temperature <= 0.0) throw ConfigError("nt_xent temperature must be positive");

  const Eigen::Index n = 2 * b;
  MatD z(n, z1.cols());
  z.topRows(b) = z1;
  z.bottomRows(b) = z2;

  VecD norms;
  const MatD u = l2_normalize_rows(z, norms);
  const MatD sim = (u * u.transpose()) / temperature;

  // Row-wise log-softmax over k != i; positive for i is its paired view.
  auto pair_of = [b](Eigen::Index i) { return i < b ? i + b : i - b; };

  double loss = 0.0;
  MatD soft(n, n); // p_ik over k != i (diag zero); only filled when grads wanted
  const bool want_grad = grad_z1 != nullptr || grad_z2 != nullptr;
  if (want_grad) soft.setZero();

  for (Eigen::Index i = 0; i < n; ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i) row_max = std::max(row_max, sim(i, k));
    double denom = 0.0;
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i) denom += std::exp(sim(i, k) - row_max);
    loss += -(sim(i, pair_of(i)) - row_max - std::log(denom));
    if (want_grad)
      for (Eigen::Index k = 0; k < n; ++k)
        if (k != i) soft(i, k) = std::exp(sim(i, k) - row_max) / denom;
  }
  loss /= static_cast<double>(n);

  if (want_grad) {
    // dL/dsim = (soft - pair indicator) / n, zero diagonal
    MatD g_sim = soft;
    for (Eigen::Index i = 0; i < n; ++i) g_sim(i, pair_of(i)) -= 1.0;
    g_sim /= static_cast<double>(n);

    // sim = u u^T / tau
    const MatD g_u = (g_sim + g_sim.transpose()) * u / temperature;

    // back through row normalization: dz = (du - u (u . du)) / norm
    MatD g_z(n, z.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dot = u.row(i).dot(g_u.row(i));
      g_z.row(i) = (g_u.row(i) - dot * u.row(i)) / norms(i);
    }
    if (grad_z1) *grad_z1 = g_z.topRows(b);
    if (grad_z2) *grad_z2 = g_z.bottomRows(b);
  }
  return loss;
}

} // namespace

double contrastive_nt_xent(const MatD& z1, const MatD& z2, double temperature) {
  return nt_xent_impl(z1, z2, temperature, nullptr, nullptr);
}

double contrastive_nt_xent_grad(const MatD& z1, const MatD& z2, double temperature, MatD* grad_z1,
                                MatD* grad_z2) {
  return nt_xent_impl(z1, z2, temperature, grad_z1, grad_z2);
}

double total_loss(double l_ce, double l_basic, double l_cl, const LossWeights& w) {
  return l_ce + w.lambda_basic * l_basic + w.lambda_cl * l_cl;
}

} // namespace cer
