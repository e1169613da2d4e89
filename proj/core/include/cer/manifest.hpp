#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cer/taxonomy.hpp"

namespace cer {

enum class Split { Train, Val, Test, Unlabeled, Unassigned };

const char* to_string(Split s);
Split split_from_string(std::string_view s);

/// One dataset entry. The label, when present, is already resolved into the
/// canonical taxonomy; the raw source id only exists in the file.
struct ManifestRecord {
  std::string image_path;
  std::string source;
  std::optional<ParsedLabel> label;
  Split split = Split::Unassigned;

  bool operator==(const ManifestRecord&) const = default;
};

/// Maps one source's integer label ids onto canonical class names.
class SchemaMap {
public:
  SchemaMap() = default;
  SchemaMap(std::string source, std::map<int, std::string> mapping);

  /// Parses a schema file: one `source_id<TAB>canonical_name` per line,
  /// blank lines and `#` comments skipped.
  static SchemaMap load(const std::string& path, const std::string& source_name);

  /// The scheme unified manifests are written in: ids 0-6 are the basic
  /// classes, 7-13 the compound classes, both in canonical order.
  static const SchemaMap& canonical();

  const std::string& source() const { return source_; }

  /// Throws UnknownSourceId when the id has no entry.
  ParsedLabel resolve(int source_id) const;

  /// Inverse lookup; throws UnknownSourceId when the label is not mapped.
  int source_id_for(const ParsedLabel& label) const;

private:
  std::string source_;
  std::map<int, std::string> mapping_;
  std::map<int, ParsedLabel> resolved_;
};

inline constexpr const char* kManifestHeader = "path\tsource\tkind\tlabel\tsplit";

/// Reads a manifest file, resolving every label through `schema`.
/// Throws ManifestParseError (with line number) on malformed lines and
/// UnknownSourceId on unmapped ids.
std::vector<ManifestRecord> load_manifest(const std::string& path, const SchemaMap& schema);

/// Writes records in the canonical id scheme, so the file round-trips through
/// load_manifest(path, SchemaMap::canonical()).
void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path);

/// Assigns round(val_fraction * N) of the still-unassigned records to Val and
/// the rest to Train, deterministically in `seed`. Pre-assigned records are
/// left untouched.
void split_manifest(std::vector<ManifestRecord>& records, double val_fraction,
                    std::uint64_t seed);

} // namespace cer
