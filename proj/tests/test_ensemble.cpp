#include <cmath>
#include <vector>

#include "cer/ensemble.hpp"
#include "cer/errors.hpp"
#include "cer/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cer;
using cer::test::random_prob_rows;

TEST_CASE("a single member passes through unchanged") {
  Rng rng(71);
  const MatD m = random_prob_rows(rng, 5, 7);
  CHECK(fuse_probs({m}, {}) == m);
  CHECK(fuse_probs({m}, {3.5}) == m);
}

TEST_CASE("zero-weight members are ignored") {
  Rng rng(72);
  const MatD a = random_prob_rows(rng, 4, 7);
  const MatD b = random_prob_rows(rng, 4, 7);
  CHECK(fuse_probs({a, b}, {1.0, 0.0}) == a);
  CHECK(fuse_probs({a, b}, {0.0, 2.0}) == b);
}

TEST_CASE("uniform weights average the member rows") {
  MatD a = MatD::Zero(1, 7);
  a(0, 0) = 0.6;
  a(0, 1) = 0.4;
  MatD b = MatD::Zero(1, 7);
  b(0, 0) = 0.2;
  b(0, 1) = 0.8;
  const MatD fused = fuse_probs({a, b}, {});
  CHECK(fused(0, 0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(fused(0, 1) == doctest::Approx(0.6).epsilon(1e-12));
  for (int c = 2; c < 7; ++c) CHECK(fused(0, c) == 0.0);
}

TEST_CASE("fused rows remain distributions for random members and weights") {
  Rng rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n_members = static_cast<std::size_t>(1 + rng.below(4));
    const auto rows = static_cast<Eigen::Index>(1 + rng.below(6));
    std::vector<MatD> members;
    std::vector<double> weights;
    for (std::size_t m = 0; m < n_members; ++m) {
      members.push_back(random_prob_rows(rng, rows, 7));
      weights.push_back(rng.uniform(0.1, 3.0));
    }
    const MatD fused = fuse_probs(members, weights);
    CHECK((fused.array() >= 0.0).all());
    for (Eigen::Index i = 0; i < rows; ++i) CHECK(std::abs(fused.row(i).sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("fusing k copies of one model is the identity") {
  Rng rng(74);
  const MatD m = random_prob_rows(rng, 6, 7);
  for (int k = 2; k <= 5; ++k) {
    const std::vector<MatD> copies(static_cast<std::size_t>(k), m);
    const MatD fused = fuse_probs(copies, {});
    CHECK((fused - m).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("rescaling all weights changes nothing") {
  Rng rng(75);
  const MatD a = random_prob_rows(rng, 5, 7);
  const MatD b = random_prob_rows(rng, 5, 7);
  const MatD c = random_prob_rows(rng, 5, 7);
  const MatD base = fuse_probs({a, b, c}, {1.0, 2.0, 3.0});
  const MatD scaled = fuse_probs({a, b, c}, {5.5, 11.0, 16.5});
  CHECK((base - scaled).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(predict_labels(base) == predict_labels(scaled));
}

TEST_CASE("degenerate ensembles are rejected") {
  Rng rng(76);
  const MatD a = random_prob_rows(rng, 3, 7);
  const MatD b = random_prob_rows(rng, 4, 7);
  CHECK_THROWS_AS(fuse_probs({}, {}), ShapeMismatch);
  CHECK_THROWS_AS(fuse_probs({a, b}, {}), ShapeMismatch);
  CHECK_THROWS_AS(fuse_probs({a, a}, {1.0}), LengthMismatch);
  CHECK_THROWS_AS(fuse_probs({a, a}, {0.0, 0.0}), AllZeroWeights);
  CHECK_THROWS_AS(fuse_probs({a, a}, {1.0, -0.5}), AllZeroWeights);

  MatD bad = a;
  bad(0, 0) += 0.5;
  CHECK_THROWS_AS(fuse_probs({bad}, {}), InvalidDistribution);
}

TEST_CASE("argmax prediction breaks exact ties toward the lower class") {
  MatD probs = MatD::Zero(3, 7);
  probs(0, 4) = 1.0;
  probs.row(1).setConstant(1.0 / 7);
  probs(2, 1) = 0.5;
  probs(2, 5) = 0.5;
  CHECK(predict_labels(probs) == std::vector<int>{4, 0, 1});
}

TEST_CASE("one-hot members vote by weight mass") {
  MatD a = MatD::Zero(2, 7);
  a(0, 2) = 1.0;
  a(1, 3) = 1.0;
  MatD b = MatD::Zero(2, 7);
  b(0, 5) = 1.0;
  b(1, 3) = 1.0;
  CHECK(predict_labels(fuse_probs({a, b}, {0.7, 0.3})) == std::vector<int>{2, 3});
  CHECK(predict_labels(fuse_probs({a, b}, {0.3, 0.7})) == std::vector<int>{5, 3});
  // equal weights: row 0 ties between classes 2 and 5, the lower index wins
  CHECK(predict_labels(fuse_probs({a, b}, {})) == std::vector<int>{2, 3});
}

TEST_CASE("argmax agrees with a linear-scan oracle on random rows") {
  Rng rng(77);
  const MatD probs = random_prob_rows(rng, 50, 7);
  const std::vector<int> got = predict_labels(probs);
  REQUIRE(got.size() == 50);
  for (Eigen::Index i = 0; i < 50; ++i) {
    int best = 0;
    for (int c = 1; c < 7; ++c)
      if (probs(i, c) > probs(i, best)) best = c;
    CHECK(got[static_cast<std::size_t>(i)] == best);
  }
}
