#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cer/matrix.hpp"
#include "cer/taxonomy.hpp"

namespace cer {

/// 7x7 count matrix, rows = true class, columns = predicted class.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumCompound>, kNumCompound> counts{};

  std::int64_t total() const;
  std::int64_t row_sum(int r) const;
  std::int64_t col_sum(int c) const;
};

/// Tally of equal-length label sequences with values in [0, 7).
ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted);

/// Per-class recall in percent; NaN for classes with no true samples.
std::array<double, kNumCompound> per_class_accuracy(const ConfusionMatrix& cm);

/// Per-class F1 = 2PR/(P+R), defined as 0 whenever a marginal sum or the
/// P+R denominator is zero.
std::array<double, kNumCompound> per_class_f1(const ConfusionMatrix& cm);

/// Unweighted mean of the seven per-class F1 values.
double macro_f1(const ConfusionMatrix& cm);

/// trace/total in percent; NaN when the matrix is empty.
double overall_accuracy(const ConfusionMatrix& cm);

struct EvalReport {
  std::array<double, kNumCompound> class_accuracy{}; ///< percent, NaN = no samples
  std::array<double, kNumCompound> class_f1{};
  double accuracy = 0.0; ///< percent
  double macro_f1 = 0.0; ///< in [0, 1]
  std::int64_t samples = 0;

  static EvalReport from_confusion(const ConfusionMatrix& cm);
};

/// Fixed-width text table, one column per report: class rows (per-class
/// accuracy), then `acc`, then `F1` (macro-F1 x 100). Two decimals; NaN and
/// zero-sample cells render as "—". Byte-stable for golden-file comparison.
std::string render_report(const std::vector<EvalReport>& reports,
                          const std::vector<std::string>& model_names);
std::string render_report(const EvalReport& report, const std::string& model_name);

/// Machine-readable form: header `class\taccuracy\tf1`, one row per class
/// plus an `overall` row; six decimals, "-" for unavailable cells.
std::string report_tsv(const EvalReport& report);

} // namespace cer
