#include "cer/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>

#include "cer/errors.hpp"

namespace cer {

namespace {

constexpr std::array<const char*, kNumBasic> kBasicNames = {
    "Anger", "Happiness", "Sadness", "Surprise", "Disgust", "Fear", "Neutral"};

constexpr std::array<const char*, kNumCompound> kCompoundNames = {
    "Angrily Surprised", "Disgustedly Surprised", "Fearfully Surprised",
    "Happily Surprised", "Sadly Angry",           "Sadly Fearful",
    "Sadly Surprised"};

constexpr std::array<std::pair<Basic, Basic>, kNumCompound> kConstituents = {{
    {Basic::Anger, Basic::Surprise},
    {Basic::Disgust, Basic::Surprise},
    {Basic::Fear, Basic::Surprise},
    {Basic::Happiness, Basic::Surprise},
    {Basic::Sadness, Basic::Anger},
    {Basic::Sadness, Basic::Fear},
    {Basic::Sadness, Basic::Surprise},
}};

// lower-case, underscores to spaces, runs of whitespace collapsed, trimmed
std::string normalize(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char raw : s) {
    char c = raw == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c);
  }
  return out;
}

bool parse_int(std::string_view s, int& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

} // namespace

const char* to_string(Basic b) { return kBasicNames[static_cast<int>(b)]; }
const char* to_string(Compound c) { return kCompoundNames[static_cast<int>(c)]; }

std::pair<Basic, Basic> constituents(Compound c) {
  return kConstituents[static_cast<int>(c)];
}

const Eigen::Matrix<double, kNumCompound, kNumBasic>& compound_basic_map() {
  static const auto m = [] {
    Eigen::Matrix<double, kNumCompound, kNumBasic> map;
    map.setZero();
    for (int c = 0; c < kNumCompound; ++c) {
      const auto [first, second] = kConstituents[c];
      map(c, static_cast<int>(first)) = 1.0;
      map(c, static_cast<int>(second)) = 1.0;
    }
    return map;
  }();
  return m;
}

ParsedLabel parse_label(std::string_view s) {
  const std::string norm = normalize(s);

  auto in_space = [&](LabelKind kind, std::string_view body) -> ParsedLabel {
    const int count = kind == LabelKind::Basic ? kNumBasic : kNumCompound;
    int id = 0;
    if (parse_int(body, id)) {
      if (id < 0 || id >= count)
        throw UnknownLabel("label id out of range: " + std::string(s));
      return {kind, id};
    }
    for (int i = 0; i < count; ++i) {
      const char* name = kind == LabelKind::Basic ? kBasicNames[i] : kCompoundNames[i];
      if (normalize(name) == body) return {kind, i};
    }
    throw UnknownLabel("unknown label: " + std::string(s));
  };

  if (norm.rfind("basic:", 0) == 0) return in_space(LabelKind::Basic, std::string_view(norm).substr(6));
  if (norm.rfind("compound:", 0) == 0) return in_space(LabelKind::Compound, std::string_view(norm).substr(9));

  for (int i = 0; i < kNumBasic; ++i)
    if (normalize(kBasicNames[i]) == norm) return {LabelKind::Basic, i};
  for (int i = 0; i < kNumCompound; ++i)
    if (normalize(kCompoundNames[i]) == norm) return {LabelKind::Compound, i};
  throw UnknownLabel("unknown label: " + std::string(s));
}

VecD compound_prior(const VecD& p_basic) {
  if (p_basic.size() != kNumBasic)
    throw InvalidDistribution("expected a length-7 basic distribution");
  if ((p_basic.array() < 0.0).any() || !p_basic.allFinite())
    throw InvalidDistribution("basic distribution has negative or non-finite entries");
  if (std::abs(p_basic.sum() - 1.0) > 1e-6)
    throw InvalidDistribution("basic distribution does not sum to 1");

  VecD raw = compound_basic_map() * p_basic;
  const double total = raw.sum();
  if (total <= 0.0) return VecD::Constant(kNumCompound, 1.0 / kNumCompound);
  return raw / total;
}

} // namespace cer
