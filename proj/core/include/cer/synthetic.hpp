#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cer/matrix.hpp"

namespace cer {

/// On-disk toy dataset: per compound class, frames drawn as a class-specific
/// mean image (pixels U(0.2, 0.8)) plus N(0, noise) pixel jitter, written as
/// PPM under <dir>/frames with a manifest at <dir>/manifest.tsv (train/val
/// splits, compound labels, source "synthetic").
struct SyntheticDatasetParams {
  int train_per_class = 100;
  int val_per_class = 20;
  int resolution = 16;
  double noise = 0.05;
  std::uint64_t seed = 7;
};

std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir,
                                              const SyntheticDatasetParams& params);

/// In-memory feature-table fixture with one Gaussian cluster per compound
/// class. Cluster means are scale * axis-aligned unit directions, so classes
/// are linearly separable at small noise. Basic targets are each compound's
/// modifier constituent.
struct FeatureFixture {
  MatD features;
  std::vector<int> basic_targets;
  std::vector<int> compound_targets;
};

FeatureFixture make_cluster_features(int per_class, int dim, double noise, double scale,
                                     std::uint64_t seed);

/// Complementary-information fixture over 12 dims: the first 6 dims identify
/// classes 0..3 (classes 4..6 collapse onto class 3's pattern there), the
/// last 6 identify classes 3..6 (0..2 collapse). A model shown only one half
/// can separate four classes; fusing both recovers all seven.
FeatureFixture make_split_information_features(int per_class, double noise, std::uint64_t seed);

/// Copy with the given half-open column range zeroed out.
MatD zero_columns(const MatD& features, int begin, int end);

} // namespace cer
