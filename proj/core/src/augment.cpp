#include "cer/augment.hpp"

#include <algorithm>
#include <cmath>

#include "cer/errors.hpp"

namespace cer {

namespace {

Image crop(const Image& img, int top, int left, int h, int w) {
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(top + y, left + x, c);
  return out;
}

void flip_horizontal(Image& img) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width / 2; ++x)
      for (int c = 0; c < 3; ++c) std::swap(img.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

float luma(const Image& img, int y, int x) {
  return 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
}

void color_jitter(Image& img, float brightness, float contrast, float saturation) {
  if (brightness != 1.0f)
    for (float& v : img.data) v *= brightness;
  if (contrast != 1.0f) {
    double sum = 0.0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) sum += luma(img, y, x);
    const float mean_luma =
        static_cast<float>(sum / (static_cast<double>(img.height) * img.width));
    for (float& v : img.data) v = (v - mean_luma) * contrast + mean_luma;
  }
  if (saturation != 1.0f) {
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const float g = luma(img, y, x);
        for (int c = 0; c < 3; ++c)
          img.at(y, x, c) = g + (img.at(y, x, c) - g) * saturation;
      }
  }
  if (brightness != 1.0f || contrast != 1.0f || saturation != 1.0f)
    for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
}

void normalize(Image& img, const std::array<float, 3>& mean, const std::array<float, 3>& stdev) {
  if (mean == std::array<float, 3>{0.0f, 0.0f, 0.0f} &&
      stdev == std::array<float, 3>{1.0f, 1.0f, 1.0f})
    return;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = (img.at(y, x, c) - mean[c]) / stdev[c];
}

} // namespace

AugmentationConfig AugmentationConfig::identity(int resolution) {
  AugmentationConfig cfg;
  cfg.target_resolution = resolution;
  cfg.flip_prob = 0.0;
  cfg.crop_scale_min = 1.0;
  cfg.crop_scale_max = 1.0;
  cfg.color_jitter = 0.0;
  cfg.mean = {0.0f, 0.0f, 0.0f};
  cfg.stdev = {1.0f, 1.0f, 1.0f};
  return cfg;
}

AugmentationConfig AugmentationConfig::training_default(int resolution) {
  AugmentationConfig cfg;
  cfg.target_resolution = resolution;
  return cfg;
}

Image apply_view(const Image& img, const AugmentationConfig& cfg, Rng& rng) {
  if (img.height < 1 || img.width < 1 || img.data.empty())
    throw DecodeError("cannot augment an empty image");

  // Draw the full parameter set up front so every view consumes the same
  // number of RNG values regardless of which transforms trigger.
  const double scale = rng.uniform(cfg.crop_scale_min, cfg.crop_scale_max);
  const double u_top = rng.uniform();
  const double u_left = rng.uniform();
  const bool do_flip = rng.uniform() < cfg.flip_prob;
  const auto brightness = static_cast<float>(rng.uniform(1.0 - cfg.color_jitter, 1.0 + cfg.color_jitter));
  const auto contrast = static_cast<float>(rng.uniform(1.0 - cfg.color_jitter, 1.0 + cfg.color_jitter));
  const auto saturation = static_cast<float>(rng.uniform(1.0 - cfg.color_jitter, 1.0 + cfg.color_jitter));

  Image view = img;
  const double side = std::sqrt(scale);
  const int ch = std::clamp(static_cast<int>(std::lround(img.height * side)), 1, img.height);
  const int cw = std::clamp(static_cast<int>(std::lround(img.width * side)), 1, img.width);
  if (ch != img.height || cw != img.width) {
    const int top = static_cast<int>(u_top * (img.height - ch + 1));
    const int left = static_cast<int>(u_left * (img.width - cw + 1));
    view = crop(view, top, left, ch, cw);
  }
  view = resize_bilinear(view, cfg.target_resolution, cfg.target_resolution);
  if (do_flip) flip_horizontal(view);
  color_jitter(view, brightness, contrast, saturation);
  normalize(view, cfg.mean, cfg.stdev);
  return view;
}

Image eval_view(const Image& img, const AugmentationConfig& cfg) {
  if (img.height < 1 || img.width < 1 || img.data.empty())
    throw DecodeError("cannot transform an empty image");
  Image view = resize_bilinear(img, cfg.target_resolution, cfg.target_resolution);
  normalize(view, cfg.mean, cfg.stdev);
  return view;
}

std::pair<Image, Image> augment_pair(const Image& img, const AugmentationConfig& cfg,
                                     std::uint64_t seed) {
  Rng rng(seed);
  Image first = apply_view(img, cfg, rng);
  Image second = apply_view(img, cfg, rng);
  return {std::move(first), std::move(second)};
}

} // namespace cer
