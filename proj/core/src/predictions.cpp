#include "cer/predictions.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "cer/errors.hpp"

namespace cer {

PredictionRecord make_prediction(const std::string& item_id,
                                 const std::array<double, kNumCompound>& probs) {
  double sum = 0.0;
  int arg = 0;
  for (int j = 0; j < kNumCompound; ++j) {
    const double p = probs[static_cast<std::size_t>(j)];
    if (!std::isfinite(p) || p < 0.0)
      throw InvalidDistribution("prediction for '" + item_id + "' has an invalid probability");
    sum += p;
    if (p > probs[static_cast<std::size_t>(arg)]) arg = j;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw InvalidDistribution("prediction for '" + item_id + "' sums to " + std::to_string(sum));
  return {item_id, to_string(static_cast<Compound>(arg)), probs};
}

PredictionRecord error_prediction(const std::string& item_id) { return {item_id, "ERROR", {}}; }

std::string format_prediction(const PredictionRecord& rec) {
  std::string line = rec.item_id + "," + rec.predicted_class;
  char buf[16];
  for (const double p : rec.probabilities) {
    std::snprintf(buf, sizeof buf, ",%.6f", p);
    line += buf;
  }
  return line;
}

void write_predictions(const std::vector<PredictionRecord>& records, std::ostream& out) {
  out << kPredictionHeader << '\n';
  for (const auto& rec : records) out << format_prediction(rec) << '\n';
}

} // namespace cer
