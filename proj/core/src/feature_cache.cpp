#include "cer/feature_cache.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "cer/errors.hpp"

namespace cer {

namespace {

static_assert(std::endian::native == std::endian::little,
              "cache IO assumes a little-endian host");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                   static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4))
    throw CacheFormatError(path + ": truncated header");
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_header(std::ostream& out, std::uint32_t rows, std::uint32_t dim) {
  out.write(kCacheMagic, 4);
  put_u32(out, kCacheVersion);
  put_u32(out, rows);
  put_u32(out, dim);
}

} // namespace

void write_feature_cache(const MatF& features, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CacheFormatError("cannot open for writing: " + path);
  write_header(out, static_cast<std::uint32_t>(features.rows()),
               static_cast<std::uint32_t>(features.cols()));
  out.write(reinterpret_cast<const char*>(features.data()),
            static_cast<std::streamsize>(sizeof(float) * features.size()));
  if (!out) throw CacheFormatError("write failed: " + path);
}

MatF read_feature_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheFormatError("cannot open: " + path);

  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCacheMagic, 4) != 0)
    throw CacheFormatError(path + ": bad magic");
  const std::uint32_t version = get_u32(in, path);
  if (version != kCacheVersion)
    throw CacheFormatError(path + ": unsupported version " + std::to_string(version));
  const std::uint32_t rows = get_u32(in, path);
  const std::uint32_t dim = get_u32(in, path);
  if (rows > 0 && dim == 0) throw CacheFormatError(path + ": zero dim with nonzero rows");

  MatF features(rows, dim);
  const auto payload = static_cast<std::streamsize>(sizeof(float) * features.size());
  if (payload > 0 && !in.read(reinterpret_cast<char*>(features.data()), payload))
    throw CacheFormatError(path + ": truncated payload");
  // trailing bytes indicate a corrupt or mislabeled file
  char extra;
  if (in.read(&extra, 1)) throw CacheFormatError(path + ": trailing bytes after payload");
  return features;
}

FeatureCacheWriter::FeatureCacheWriter(const std::string& path, int dim)
    : out_(path, std::ios::binary), path_(path), dim_(dim) {
  if (!out_) throw CacheFormatError("cannot open for writing: " + path);
  if (dim <= 0) throw CacheFormatError("cache dim must be positive");
  write_header(out_, 0, static_cast<std::uint32_t>(dim));
}

FeatureCacheWriter::~FeatureCacheWriter() {
  if (!closed_) {
    try {
      close();
    } catch (...) {
    }
  }
}

void FeatureCacheWriter::append(const MatF& rows) {
  if (closed_) throw CacheFormatError("writer already closed: " + path_);
  if (rows.cols() != dim_)
    throw CacheFormatError(path_ + ": appended rows have dim " + std::to_string(rows.cols()) +
                           ", writer expects " + std::to_string(dim_));
  out_.write(reinterpret_cast<const char*>(rows.data()),
             static_cast<std::streamsize>(sizeof(float) * rows.size()));
  rows_ += rows.rows();
}

void FeatureCacheWriter::close() {
  if (closed_) return;
  closed_ = true;
  out_.seekp(8);
  put_u32(out_, static_cast<std::uint32_t>(rows_));
  out_.flush();
  if (!out_) throw CacheFormatError("write failed: " + path_);
}

} // namespace cer
