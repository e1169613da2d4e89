#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>

#include "cer/matrix.hpp"

namespace cer {

inline constexpr int kNumBasic = 7;
inline constexpr int kNumCompound = 7;

/// The seven single-emotion classes. Order is canonical: the six classical
/// emotions first, Neutral appended.
enum class Basic : int {
  Anger = 0,
  Happiness,
  Sadness,
  Surprise,
  Disgust,
  Fear,
  Neutral,
};

/// The seven compound classes, in canonical (report row) order.
enum class Compound : int {
  AngrilySurprised = 0,
  DisgustedlySurprised,
  FearfullySurprised,
  HappilySurprised,
  SadlyAngry,
  SadlyFearful,
  SadlySurprised,
};

enum class LabelKind { Basic, Compound };

/// A resolved label: which space it lives in and its canonical index.
struct ParsedLabel {
  LabelKind kind;
  int id;

  bool operator==(const ParsedLabel&) const = default;
};

const char* to_string(Basic b);
const char* to_string(Compound c);

/// (modifier emotion, head emotion) named by the compound, e.g.
/// SadlyAngry -> (Sadness, Anger).
std::pair<Basic, Basic> constituents(Compound c);

/// 7x7 binary membership matrix: row c has a 1 in column b iff basic b is a
/// constituent of compound c. Every row sums to 2; the Neutral column is zero.
const Eigen::Matrix<double, kNumCompound, kNumBasic>& compound_basic_map();

/// Resolves a class name (case-insensitive, spaces and underscores
/// interchangeable) or a kind-tagged numeric id ("basic:3", "compound:0").
/// Throws UnknownLabel on anything unmatched.
ParsedLabel parse_label(std::string_view s);

/// Additive constituent-mass prior: raw score for compound c is the summed
/// basic probability of its two constituents, renormalized to a distribution.
/// An all-zero raw score vector (e.g. one-hot Neutral) falls back to uniform.
/// Throws InvalidDistribution if p_basic is not a distribution.
VecD compound_prior(const VecD& p_basic);

} // namespace cer
