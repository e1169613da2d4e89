#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "cer/taxonomy.hpp"

namespace cer {

inline constexpr const char* kPredictionHeader = "item_id,predicted_class,p0,p1,p2,p3,p4,p5,p6";

/// One output row: item id (path or video_id/frame_index), the predicted
/// compound class name (or ERROR when the frame could not be decoded), and
/// the seven compound probabilities in canonical order.
struct PredictionRecord {
  std::string item_id;
  std::string predicted_class;
  std::array<double, kNumCompound> probabilities{};
};

/// Builds a record from a probability row; predicted class is the argmax
/// (lowest index on ties). Throws InvalidDistribution on a bad row.
PredictionRecord make_prediction(const std::string& item_id,
                                 const std::array<double, kNumCompound>& probs);

/// Decode-failure placeholder: class ERROR, all-zero probabilities.
PredictionRecord error_prediction(const std::string& item_id);

/// CSV line without trailing newline; probabilities with six decimals.
std::string format_prediction(const PredictionRecord& rec);

/// Header plus one line per record, in order.
void write_predictions(const std::vector<PredictionRecord>& records, std::ostream& out);

} // namespace cer
