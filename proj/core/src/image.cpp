#include "cer/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <opencv2/imgcodecs.hpp>

#include "cer/errors.hpp"

namespace cer {

Image decode_image(const std::string& path) {
  const cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw DecodeError("cannot decode image: " + path);
  Image img(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(y, x, 0) = static_cast<float>(row[x][2]) / 255.0f;
      img.at(y, x, 1) = static_cast<float>(row[x][1]) / 255.0f;
      img.at(y, x, 2) = static_cast<float>(row[x][0]) / 255.0f;
    }
  }
  return img;
}

void write_ppm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DecodeError("cannot write image: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(y, x, c), 0.0f, 1.0f);
        row[static_cast<std::size_t>(x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw DecodeError("write failed: " + path);
}

Image resize_bilinear(const Image& img, int out_height, int out_width) {
  if (img.height == out_height && img.width == out_width) return img;
  Image out(out_height, out_width);
  // align_corners=false convention: sample at pixel centers.
  const float sy = static_cast<float>(img.height) / static_cast<float>(out_height);
  const float sx = static_cast<float>(img.width) / static_cast<float>(out_width);
  for (int y = 0; y < out_height; ++y) {
    const float fy = std::max(0.0f, (y + 0.5f) * sy - 0.5f);
    const int y0 = std::min(static_cast<int>(fy), img.height - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const float wy = fy - static_cast<float>(y0);
    for (int x = 0; x < out_width; ++x) {
      const float fx = std::max(0.0f, (x + 0.5f) * sx - 0.5f);
      const int x0 = std::min(static_cast<int>(fx), img.width - 1);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const float wx = fx - static_cast<float>(x0);
      for (int c = 0; c < 3; ++c) {
        const float top = img.at(y0, x0, c) * (1.0f - wx) + img.at(y0, x1, c) * wx;
        const float bot = img.at(y1, x0, c) * (1.0f - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return out;
}

ImageBatch ImageBatch::from_images(const std::vector<Image>& images, int resolution) {
  ImageBatch batch(static_cast<int>(images.size()), resolution, resolution);
  for (int b = 0; b < batch.batch; ++b) {
    const Image& src = images[static_cast<std::size_t>(b)];
    const Image img = (src.height == resolution && src.width == resolution)
                          ? src
                          : resize_bilinear(src, resolution, resolution);
    for (int y = 0; y < resolution; ++y)
      for (int x = 0; x < resolution; ++x)
        for (int c = 0; c < 3; ++c) batch.at(b, c, y, x) = img.at(y, x, c);
  }
  return batch;
}

} // namespace cer
