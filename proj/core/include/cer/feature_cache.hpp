#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "cer/matrix.hpp"

namespace cer {

// On-disk embedding cache. Layout (little-endian):
//   bytes 0-3   magic "CERF"
//   u32         version, currently 1
//   u32         row count N
//   u32         dim D
//   N*D f32     row-major payload
inline constexpr char kCacheMagic[4] = {'C', 'E', 'R', 'F'};
inline constexpr std::uint32_t kCacheVersion = 1;

/// Writes the whole matrix in one go.
void write_feature_cache(const MatF& features, const std::string& path);

/// Reads a cache back; throws CacheFormatError on bad magic, version, or a
/// truncated payload.
MatF read_feature_cache(const std::string& path);

/// Incremental writer: rows can be appended batch by batch; the row count in
/// the header is patched on close.
class FeatureCacheWriter {
public:
  FeatureCacheWriter(const std::string& path, int dim);
  ~FeatureCacheWriter();

  FeatureCacheWriter(const FeatureCacheWriter&) = delete;
  FeatureCacheWriter& operator=(const FeatureCacheWriter&) = delete;

  /// Appends rows; every batch must share the writer's dim.
  void append(const MatF& rows);
  void close();

  std::int64_t rows_written() const { return rows_; }

private:
  std::ofstream out_;
  std::string path_;
  int dim_ = 0;
  std::int64_t rows_ = 0;
  bool closed_ = false;
};

} // namespace cer
