#pragma once

#include <string>
#include <vector>

namespace cer {

/// Dense float image, HWC layout, RGB channel order. Decoded pixel values are
/// in [0,1]; normalized values may leave that range.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0.0f) {}

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  bool operator==(const Image&) const = default;
};

/// Reads any format OpenCV can decode (png, jpg, ppm, bmp, ...).
/// Throws DecodeError when the file is missing or unreadable.
Image decode_image(const std::string& path);

/// Writes a binary PPM (P6), clamping values into [0,1]. Byte-stable.
void write_ppm(const Image& img, const std::string& path);

Image resize_bilinear(const Image& img, int out_height, int out_width);

/// Batch in B x 3 x H x W layout (channel-major per sample), the shape the
/// encoders consume.
struct ImageBatch {
  int batch = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  ImageBatch() = default;
  ImageBatch(int b, int h, int w)
      : batch(b), height(h), width(w), data(static_cast<std::size_t>(b) * 3 * h * w, 0.0f) {}

  float& at(int b, int c, int y, int x) {
    return data[((static_cast<std::size_t>(b) * 3 + c) * height + y) * width + x];
  }
  float at(int b, int c, int y, int x) const {
    return data[((static_cast<std::size_t>(b) * 3 + c) * height + y) * width + x];
  }

  /// Assembles a batch at `resolution`, bilinearly resizing any image whose
  /// size differs.
  static ImageBatch from_images(const std::vector<Image>& images, int resolution);
};

} // namespace cer
