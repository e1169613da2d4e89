#include <cmath>
#include <numeric>
#include <vector>

#include "cer/errors.hpp"
#include "cer/losses.hpp"
#include "cer/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cer;
using cer::test::random_matrix;
using cer::test::random_prob_rows;

namespace {

// Straight-from-the-definition NT-Xent: 2B views, the positive of view i is
// its paired view, every other view is a negative.
double nt_xent_reference(const MatD& z1, const MatD& z2, double temperature) {
  const Eigen::Index b = z1.rows();
  const Eigen::Index d = z1.cols();
  const Eigen::Index n = 2 * b;
  std::vector<std::vector<double>> v(static_cast<std::size_t>(n),
                                     std::vector<double>(static_cast<std::size_t>(d)));
  for (Eigen::Index i = 0; i < b; ++i) {
    double n1 = 0.0, n2 = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      n1 += z1(i, j) * z1(i, j);
      n2 += z2(i, j) * z2(i, j);
    }
    n1 = std::sqrt(n1);
    n2 = std::sqrt(n2);
    for (Eigen::Index j = 0; j < d; ++j) {
      v[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = z1(i, j) / n1;
      v[static_cast<std::size_t>(b + i)][static_cast<std::size_t>(j)] = z2(i, j) / n2;
    }
  }
  const auto sim = [&](Eigen::Index i, Eigen::Index k) {
    double dot = 0.0;
    for (Eigen::Index j = 0; j < d; ++j)
      dot += v[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
             v[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
    return dot / temperature;
  };
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index pos = i < b ? i + b : i - b;
    double denom = 0.0;
    for (Eigen::Index k = 0; k < n; ++k)
      if (k != i) denom += std::exp(sim(i, k));
    total += -std::log(std::exp(sim(i, pos)) / denom);
  }
  return total / static_cast<double>(n);
}

} // namespace

TEST_CASE("cross entropy vanishes on one-hot correct predictions") {
  MatD probs = MatD::Zero(3, 7);
  probs(0, 2) = 1.0;
  probs(1, 0) = 1.0;
  probs(2, 6) = 1.0;
  CHECK(std::abs(cross_entropy(probs, {2, 0, 6})) <= 1e-11);
}

TEST_CASE("cross entropy of uniform predictions is ln 7") {
  const MatD probs = MatD::Constant(4, 7, 1.0 / 7);
  const double ce = cross_entropy(probs, {0, 3, 5, 6});
  CHECK(std::abs(ce - std::log(7.0)) <= 1e-9);
  CHECK(ce == doctest::Approx(1.945910).epsilon(1e-6));
}

TEST_CASE("cross entropy matches direct per-row arithmetic") {
  MatD probs(3, 7);
  probs.row(0) << 0.7, 0.1, 0.05, 0.05, 0.05, 0.025, 0.025;
  probs.row(1) << 0.1, 0.1, 0.3, 0.2, 0.1, 0.1, 0.1;
  probs.row(2) << 0.05, 0.05, 0.1, 0.1, 0.1, 0.1, 0.5;
  const double expected = (-std::log(0.7 + 1e-12) - std::log(0.3 + 1e-12) -
                           std::log(0.5 + 1e-12)) / 3.0;
  CHECK(std::abs(cross_entropy(probs, {0, 2, 6}) - expected) <= 1e-9);
}

TEST_CASE("cross entropy validates rows and targets") {
  MatD probs = MatD::Constant(2, 7, 1.0 / 7);
  CHECK_THROWS_AS(cross_entropy(probs, {0}), LengthMismatch);
  CHECK_THROWS_AS(cross_entropy(probs, {0, 7}), LabelOutOfRange);
  CHECK_THROWS_AS(cross_entropy(probs, {-1, 0}), LabelOutOfRange);
  MatD bad = probs;
  bad(0, 0) = 0.5; // row no longer sums to 1
  CHECK_THROWS_AS(cross_entropy(bad, {0, 0}), InvalidDistribution);
  bad = probs;
  bad(1, 3) = -0.1;
  CHECK_THROWS_AS(cross_entropy(bad, {0, 0}), InvalidDistribution);
}

TEST_CASE("contrastive loss needs at least two pairs") {
  const MatD z = MatD::Ones(1, 4);
  CHECK_THROWS_AS(contrastive_nt_xent(z, z, 0.07), BatchTooSmall);
}

TEST_CASE("identical orthonormal views match the closed-form reference") {
  MatD z1 = MatD::Zero(2, 4);
  z1(0, 0) = 1.0;
  z1(1, 1) = 1.0;
  const double loss = contrastive_nt_xent(z1, z1, 0.07);
  CHECK(std::abs(loss - nt_xent_reference(z1, z1, 0.07)) <= 1e-9);
  // positives at similarity 1, both negatives orthogonal
  const double pos = std::exp(1.0 / 0.07);
  const double expected = -std::log(pos / (pos + 2.0 * std::exp(0.0)));
  CHECK(std::abs(loss - expected) <= 1e-9);
}

TEST_CASE("contrastive loss agrees with the brute-force oracle") {
  Rng rng(31);
  for (const int b : {2, 3, 5, 8}) {
    const MatD z1 = random_matrix(rng, b, 6);
    const MatD z2 = random_matrix(rng, b, 6);
    const double got = contrastive_nt_xent(z1, z2, 0.07);
    CHECK(std::abs(got - nt_xent_reference(z1, z2, 0.07)) <= 1e-9);
    const double warm = contrastive_nt_xent(z1, z2, 0.5);
    CHECK(std::abs(warm - nt_xent_reference(z1, z2, 0.5)) <= 1e-9);
  }
}

TEST_CASE("contrastive loss is invariant to joint pair permutation") {
  Rng rng(32);
  const int b = 6;
  MatD z1 = random_matrix(rng, b, 5);
  MatD z2 = random_matrix(rng, b, 5);
  std::vector<int> perm(b);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> shuffled = perm;
  Rng shuffle_rng(33);
  shuffle_rng.shuffle(shuffled);
  MatD p1(b, 5), p2(b, 5);
  for (int i = 0; i < b; ++i) {
    p1.row(i) = z1.row(shuffled[static_cast<std::size_t>(i)]);
    p2.row(i) = z2.row(shuffled[static_cast<std::size_t>(i)]);
  }
  CHECK(std::abs(contrastive_nt_xent(z1, z2, 0.07) - contrastive_nt_xent(p1, p2, 0.07)) <= 1e-9);
}

TEST_CASE("contrastive loss is invariant to a joint rotation") {
  Rng rng(34);
  const int b = 4, d = 5;
  const MatD z1 = random_matrix(rng, b, d);
  const MatD z2 = random_matrix(rng, b, d);
  const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
      d, d, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  const MatD r1 = z1 * q;
  const MatD r2 = z2 * q;
  CHECK(std::abs(contrastive_nt_xent(z1, z2, 0.07) - contrastive_nt_xent(r1, r2, 0.07)) <= 1e-6);
}

TEST_CASE("contrastive gradients match central differences") {
  Rng rng(35);
  const int b = 3, d = 5;
  const double tau = 0.2;
  MatD z1 = random_matrix(rng, b, d);
  MatD z2 = random_matrix(rng, b, d);
  MatD g1, g2;
  contrastive_nt_xent_grad(z1, z2, tau, &g1, &g2);

  const double h = 1e-6;
  const auto check_block = [&](MatD& z, const MatD& g) {
    for (Eigen::Index i = 0; i < b; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        const double saved = z(i, j);
        z(i, j) = saved + h;
        const double up = contrastive_nt_xent(z1, z2, tau);
        z(i, j) = saved - h;
        const double down = contrastive_nt_xent(z1, z2, tau);
        z(i, j) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(numeric), std::abs(g(i, j)), 1e-6});
        CHECK(std::abs(numeric - g(i, j)) / denom <= 1e-4);
      }
  };
  check_block(z1, g1);
  check_block(z2, g2);
}

TEST_CASE("total loss composes the three terms linearly") {
  LossWeights off;
  off.lambda_basic = 0.0;
  off.lambda_cl = 0.0;
  CHECK(total_loss(0.37, 5.0, 9.0, off) == 0.37);

  LossWeights unit;
  unit.lambda_basic = 1.0;
  unit.lambda_cl = 1.0;
  CHECK(total_loss(1.0, 2.0, 3.0, unit) == doctest::Approx(6.0).epsilon(1e-12));

  const LossWeights defaults; // lambda_basic = 1.0, lambda_cl = 0.1
  CHECK(total_loss(0.5, 0.7, 4.0, defaults) == doctest::Approx(1.6).epsilon(1e-12));

  Rng rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    LossWeights w;
    w.lambda_basic = rng.uniform(0.0, 2.0);
    w.lambda_cl = rng.uniform(0.0, 2.0);
    const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
    const double x = rng.uniform(), y = rng.uniform(), z = rng.uniform();
    CHECK(std::abs(total_loss(a + x, b + y, c + z, w) -
                   (total_loss(a, b, c, w) + total_loss(x, y, z, w))) <= 1e-12);
  }
}

TEST_CASE("mismatched view shapes are rejected") {
  CHECK_THROWS_AS(contrastive_nt_xent(MatD::Ones(3, 4), MatD::Ones(2, 4), 0.07),
                  ShapeMismatch);
  CHECK_THROWS_AS(contrastive_nt_xent(MatD::Ones(3, 4), MatD::Ones(3, 5), 0.07),
                  ShapeMismatch);
}
