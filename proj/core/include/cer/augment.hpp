#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "cer/image.hpp"
#include "cer/rng.hpp"

namespace cer {

/// Augmentation recipe for the paired contrastive views. Every transform is
/// deterministic given the RNG handed to apply_view.
struct AugmentationConfig {
  int target_resolution = 224;
  double flip_prob = 0.5;
  double crop_scale_min = 0.8; ///< area fraction, aspect preserved
  double crop_scale_max = 1.0;
  double color_jitter = 0.2; ///< brightness/contrast/saturation factor range
  std::array<float, 3> mean = {0.485f, 0.456f, 0.406f};
  std::array<float, 3> stdev = {0.229f, 0.224f, 0.225f};

  /// Resize + normalize only; produces bit-identical views.
  static AugmentationConfig identity(int resolution);
  /// The default contrastive-view recipe at the given resolution.
  static AugmentationConfig training_default(int resolution);
};

/// One randomly augmented view: crop -> resize -> flip -> jitter -> normalize.
Image apply_view(const Image& img, const AugmentationConfig& cfg, Rng& rng);

/// Deterministic resize + normalize, used for originals and at eval time.
Image eval_view(const Image& img, const AugmentationConfig& cfg);

/// Two independently sampled views of the same image. The same seed always
/// reproduces the identical pair. Throws DecodeError on an empty image.
std::pair<Image, Image> augment_pair(const Image& img, const AugmentationConfig& cfg,
                                     std::uint64_t seed);

} // namespace cer
