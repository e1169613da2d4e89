#include "cer/manifest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cer/errors.hpp"
#include "cer/rng.hpp"

namespace cer {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

int parse_int_field(const std::string& s, const char* what, std::size_t line_no) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ManifestParseError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  return v;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

} // namespace

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unlabeled: return "unlabeled";
    case Split::Unassigned: return "-";
  }
  return "-";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  if (s == "unlabeled") return Split::Unlabeled;
  if (s == "-") return Split::Unassigned;
  throw ManifestParseError("unknown split '" + std::string(s) + "'");
}

SchemaMap::SchemaMap(std::string source, std::map<int, std::string> mapping)
    : source_(std::move(source)), mapping_(std::move(mapping)) {
  for (const auto& [id, name] : mapping_) {
    const ParsedLabel label = parse_label(name);
    for (const auto& [other_id, other] : resolved_) {
      if (other == label)
        throw ConfigError("schema '" + source_ + "': ids " + std::to_string(other_id) +
                          " and " + std::to_string(id) + " both map to '" + name + "'");
    }
    resolved_.emplace(id, label);
  }
}

SchemaMap SchemaMap::load(const std::string& path, const std::string& source_name) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file: " + path);
  std::map<int, std::string> mapping;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'id<TAB>name'");
    mapping[parse_int_field(fields[0], "schema id", line_no)] = fields[1];
  }
  return SchemaMap(source_name, std::move(mapping));
}

const SchemaMap& SchemaMap::canonical() {
  static const SchemaMap schema = [] {
    std::map<int, std::string> mapping;
    for (int i = 0; i < kNumBasic; ++i) mapping[i] = to_string(static_cast<Basic>(i));
    for (int i = 0; i < kNumCompound; ++i)
      mapping[kNumBasic + i] = to_string(static_cast<Compound>(i));
    return SchemaMap("canonical", std::move(mapping));
  }();
  return schema;
}

ParsedLabel SchemaMap::resolve(int source_id) const {
  const auto it = resolved_.find(source_id);
  if (it == resolved_.end())
    throw UnknownSourceId("schema '" + source_ + "' has no entry for id " +
                          std::to_string(source_id));
  return it->second;
}

int SchemaMap::source_id_for(const ParsedLabel& label) const {
  for (const auto& [id, resolved] : resolved_)
    if (resolved == label) return id;
  throw UnknownSourceId("schema '" + source_ + "' does not cover label kind/id " +
                        std::to_string(label.id));
}

std::vector<ManifestRecord> load_manifest(const std::string& path, const SchemaMap& schema) {
  std::ifstream in(path);
  if (!in) throw ManifestParseError("cannot open manifest: " + path);

  std::string line;
  if (!std::getline(in, line))
    throw ManifestParseError(path + ": empty file (missing header)");
  if (strip_cr(line) != kManifestHeader)
    throw ManifestParseError(path + ":1: bad header, expected '" + std::string(kManifestHeader) + "'");

  std::vector<ManifestRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 5)
      throw ManifestParseError(path + ":" + std::to_string(line_no) + ": expected 5 tab-separated fields, got " +
                               std::to_string(fields.size()));

    ManifestRecord rec;
    rec.image_path = fields[0];
    rec.source = fields[1];
    const std::string& kind = fields[2];
    const std::string& label = fields[3];

    if (kind == "-" || label == "-") {
      if (kind != label)
        throw ManifestParseError(path + ":" + std::to_string(line_no) +
                                 ": kind and label must both be '-' for unlabeled records");
    } else {
      const int source_id = parse_int_field(label, "label id", line_no);
      ParsedLabel resolved;
      try {
        resolved = schema.resolve(source_id);
      } catch (const UnknownSourceId& e) {
        throw UnknownSourceId(path + ":" + std::to_string(line_no) + ": " + e.what());
      }
      const LabelKind declared = kind == "basic"      ? LabelKind::Basic
                                 : kind == "compound" ? LabelKind::Compound
                                                      : throw ManifestParseError(
                                                            path + ":" + std::to_string(line_no) +
                                                            ": kind must be 'basic', 'compound' or '-'");
      if (declared != resolved.kind)
        throw ManifestParseError(path + ":" + std::to_string(line_no) + ": label id " + label +
                                 " resolves to a " +
                                 (resolved.kind == LabelKind::Basic ? "basic" : "compound") +
                                 " class but kind column says '" + kind + "'");
      rec.label = resolved;
    }

    try {
      rec.split = split_from_string(fields[4]);
    } catch (const ManifestParseError& e) {
      throw ManifestParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ManifestParseError("cannot write manifest: " + path);
  out << kManifestHeader << "\n";
  for (const auto& rec : records) {
    out << rec.image_path << '\t' << rec.source << '\t';
    if (rec.label) {
      const bool basic = rec.label->kind == LabelKind::Basic;
      out << (basic ? "basic" : "compound") << '\t'
          << (basic ? rec.label->id : kNumBasic + rec.label->id);
    } else {
      out << "-\t-";
    }
    out << '\t' << to_string(rec.split) << "\n";
  }
  if (!out) throw ManifestParseError("write failed: " + path);
}

void split_manifest(std::vector<ManifestRecord>& records, double val_fraction,
                    std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ConfigError("val_fraction must be in [0, 1)");

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == Split::Unassigned) pending.push_back(i);

  const auto n_val =
      static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(pending.size())));
  Rng rng(seed);
  rng.shuffle(pending);
  for (std::size_t k = 0; k < pending.size(); ++k)
    records[pending[k]].split = k < n_val ? Split::Val : Split::Train;
}

} // namespace cer
