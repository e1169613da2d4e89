#include "cer/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <vector>

#include "cer/errors.hpp"
#include "cer/image.hpp"
#include "cer/manifest.hpp"
#include "cer/rng.hpp"
#include "cer/taxonomy.hpp"

namespace cer {

std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir,
                                              const SyntheticDatasetParams& params) {
  if (params.resolution < 1 || params.train_per_class < 0 || params.val_per_class < 0)
    throw ConfigError("synthetic dataset: bad shape parameters");
  const auto frames = dir / "frames";
  std::filesystem::create_directories(frames);

  const int res = params.resolution;
  const std::size_t pixels = static_cast<std::size_t>(res) * res * 3;

  Rng mean_rng(mix_seed(params.seed, 101));
  std::vector<std::vector<float>> class_means(kNumCompound);
  for (auto& mean : class_means) {
    mean.resize(pixels);
    for (auto& v : mean) v = static_cast<float>(mean_rng.uniform(0.2, 0.8));
  }

  std::vector<ManifestRecord> records;
  auto emit = [&](int c, int index, Split split, Rng& rng) {
    Image img(res, res);
    const auto& mean = class_means[static_cast<std::size_t>(c)];
    for (std::size_t p = 0; p < pixels; ++p) {
      const double v = mean[p] + params.noise * rng.normal();
      img.data[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    char name[64];
    std::snprintf(name, sizeof name, "%s_c%d_%04d.ppm", to_string(split), c, index);
    write_ppm(img, (frames / name).string());
    records.push_back({std::string("frames/") + name, "synthetic",
                       ParsedLabel{LabelKind::Compound, c}, split});
  };

  Rng sample_rng(mix_seed(params.seed, 202));
  for (int c = 0; c < kNumCompound; ++c)
    for (int i = 0; i < params.train_per_class; ++i) emit(c, i, Split::Train, sample_rng);
  for (int c = 0; c < kNumCompound; ++c)
    for (int i = 0; i < params.val_per_class; ++i) emit(c, i, Split::Val, sample_rng);

  const auto manifest = dir / "manifest.tsv";
  write_manifest(records, manifest.string());
  return manifest;
}

namespace {

int modifier_of(int compound) {
  return static_cast<int>(constituents(static_cast<Compound>(compound)).first);
}

} // namespace

FeatureFixture make_cluster_features(int per_class, int dim, double noise, double scale,
                                     std::uint64_t seed) {
  if (dim < kNumCompound)
    throw ShapeMismatch("cluster features need dim >= 7 for separable class means");
  FeatureFixture fx;
  const int n = per_class * kNumCompound;
  fx.features.resize(n, dim);
  fx.basic_targets.reserve(static_cast<std::size_t>(n));
  fx.compound_targets.reserve(static_cast<std::size_t>(n));

  Rng rng(mix_seed(seed, 303));
  int row = 0;
  for (int c = 0; c < kNumCompound; ++c) {
    for (int i = 0; i < per_class; ++i, ++row) {
      for (int j = 0; j < dim; ++j)
        fx.features(row, j) = (j == c ? scale : 0.0) + noise * rng.normal();
      fx.compound_targets.push_back(c);
      fx.basic_targets.push_back(modifier_of(c));
    }
  }
  return fx;
}

FeatureFixture make_split_information_features(int per_class, double noise, std::uint64_t seed) {
  constexpr int kDim = 12;
  FeatureFixture fx;
  const int n = per_class * kNumCompound;
  fx.features.resize(n, kDim);
  fx.basic_targets.reserve(static_cast<std::size_t>(n));
  fx.compound_targets.reserve(static_cast<std::size_t>(n));

  Rng rng(mix_seed(seed, 404));
  int row = 0;
  for (int c = 0; c < kNumCompound; ++c) {
    const int ga = std::min(c, 3);     // identity visible in dims 0..5
    const int gb = std::max(c, 3) - 3; // identity visible in dims 6..11
    for (int i = 0; i < per_class; ++i, ++row) {
      for (int j = 0; j < kDim; ++j) {
        const double mean = (j < 6) ? (j == ga ? 2.0 : 0.0) : (j - 6 == gb ? 2.0 : 0.0);
        fx.features(row, j) = mean + noise * rng.normal();
      }
      fx.compound_targets.push_back(c);
      fx.basic_targets.push_back(modifier_of(c));
    }
  }
  return fx;
}

MatD zero_columns(const MatD& features, int begin, int end) {
  if (begin < 0 || end < begin || end > features.cols())
    throw ShapeMismatch("zero_columns: bad column range");
  MatD out = features;
  out.middleCols(begin, end - begin).setZero();
  return out;
}

} // namespace cer
