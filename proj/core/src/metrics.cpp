#include "cer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "cer/errors.hpp"

namespace cer {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (const auto& row : counts)
    for (const auto c : row) n += c;
  return n;
}

std::int64_t ConfusionMatrix::row_sum(int r) const {
  std::int64_t n = 0;
  for (const auto c : counts[static_cast<std::size_t>(r)]) n += c;
  return n;
}

std::int64_t ConfusionMatrix::col_sum(int c) const {
  std::int64_t n = 0;
  for (const auto& row : counts) n += row[static_cast<std::size_t>(c)];
  return n;
}

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size())
    throw LengthMismatch("confusion: " + std::to_string(truth.size()) + " true labels vs " +
                         std::to_string(predicted.size()) + " predictions");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= kNumCompound || p < 0 || p >= kNumCompound)
      throw LabelOutOfRange("confusion: label pair (" + std::to_string(t) + ", " +
                            std::to_string(p) + ") at index " + std::to_string(i));
    cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] += 1;
  }
  return cm;
}

std::array<double, kNumCompound> per_class_accuracy(const ConfusionMatrix& cm) {
  std::array<double, kNumCompound> out{};
  for (int c = 0; c < kNumCompound; ++c) {
    const std::int64_t n = cm.row_sum(c);
    out[static_cast<std::size_t>(c)] =
        n == 0 ? std::numeric_limits<double>::quiet_NaN()
               : 100.0 * static_cast<double>(cm.counts[static_cast<std::size_t>(c)]
                                                       [static_cast<std::size_t>(c)]) /
                     static_cast<double>(n);
  }
  return out;
}

std::array<double, kNumCompound> per_class_f1(const ConfusionMatrix& cm) {
  std::array<double, kNumCompound> out{};
  for (int c = 0; c < kNumCompound; ++c) {
    const std::int64_t rs = cm.row_sum(c);
    const std::int64_t cs = cm.col_sum(c);
    if (rs == 0 || cs == 0) continue; // F1 defined as 0 on empty marginals
    const double tp =
        static_cast<double>(cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]);
    const double precision = tp / static_cast<double>(cs);
    const double recall = tp / static_cast<double>(rs);
    if (precision + recall > 0.0)
      out[static_cast<std::size_t>(c)] = 2.0 * precision * recall / (precision + recall);
  }
  return out;
}

double macro_f1(const ConfusionMatrix& cm) {
  const auto f1 = per_class_f1(cm);
  double sum = 0.0;
  for (const double v : f1) sum += v;
  return sum / static_cast<double>(kNumCompound);
}

double overall_accuracy(const ConfusionMatrix& cm) {
  const std::int64_t n = cm.total();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  std::int64_t tp = 0;
  for (int c = 0; c < kNumCompound; ++c)
    tp += cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  return 100.0 * static_cast<double>(tp) / static_cast<double>(n);
}

EvalReport EvalReport::from_confusion(const ConfusionMatrix& cm) {
  EvalReport r;
  r.class_accuracy = per_class_accuracy(cm);
  r.class_f1 = per_class_f1(cm);
  r.accuracy = overall_accuracy(cm);
  r.macro_f1 = cer::macro_f1(cm);
  r.samples = cm.total();
  return r;
}

namespace {

constexpr const char* kNaCell = "—"; // em dash

std::string fmt_cell(double value, bool available) {
  if (!available || std::isnan(value)) return kNaCell;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

// Pads by display width; the em-dash cell is 3 bytes but 1 column.
std::string rpad(const std::string& s, std::size_t width) {
  const std::size_t display = s == kNaCell ? 1 : s.size();
  return s + std::string(display < width ? width - display : 0, ' ');
}

std::string lpad(const std::string& s, std::size_t width) {
  const std::size_t display = s == kNaCell ? 1 : s.size();
  return std::string(display < width ? width - display : 0, ' ') + s;
}

} // namespace

std::string render_report(const std::vector<EvalReport>& reports,
                          const std::vector<std::string>& model_names) {
  if (reports.size() != model_names.size())
    throw LengthMismatch("render_report: " + std::to_string(reports.size()) + " reports vs " +
                         std::to_string(model_names.size()) + " names");

  std::size_t name_width = std::string("class").size();
  for (int c = 0; c < kNumCompound; ++c)
    name_width = std::max(name_width, std::string(to_string(static_cast<Compound>(c))).size());

  std::vector<std::size_t> col_width(reports.size());
  for (std::size_t m = 0; m < reports.size(); ++m)
    col_width[m] = std::max<std::size_t>(model_names[m].size(), 6);

  std::string out;
  out += rpad("class", name_width);
  for (std::size_t m = 0; m < reports.size(); ++m) out += "  " + lpad(model_names[m], col_width[m]);
  out += '\n';

  auto emit_row = [&](const std::string& label, auto cell_for) {
    out += rpad(label, name_width);
    for (std::size_t m = 0; m < reports.size(); ++m) out += "  " + lpad(cell_for(m), col_width[m]);
    out += '\n';
  };

  for (int c = 0; c < kNumCompound; ++c) {
    emit_row(to_string(static_cast<Compound>(c)), [&](std::size_t m) {
      return fmt_cell(reports[m].class_accuracy[static_cast<std::size_t>(c)],
                      reports[m].samples > 0);
    });
  }
  emit_row("acc", [&](std::size_t m) { return fmt_cell(reports[m].accuracy, reports[m].samples > 0); });
  emit_row("F1", [&](std::size_t m) {
    return fmt_cell(100.0 * reports[m].macro_f1, reports[m].samples > 0);
  });
  return out;
}

std::string render_report(const EvalReport& report, const std::string& model_name) {
  return render_report(std::vector<EvalReport>{report}, std::vector<std::string>{model_name});
}

std::string report_tsv(const EvalReport& report) {
  auto cell = [&](double v) -> std::string {
    if (report.samples == 0 || std::isnan(v)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
  };
  std::string out = "class\taccuracy\tf1\n";
  for (int c = 0; c < kNumCompound; ++c) {
    out += to_string(static_cast<Compound>(c));
    out += '\t';
    out += cell(report.class_accuracy[static_cast<std::size_t>(c)]);
    out += '\t';
    out += cell(report.class_f1[static_cast<std::size_t>(c)]);
    out += '\n';
  }
  out += "overall\t" + cell(report.accuracy) + '\t' + cell(report.macro_f1) + '\n';
  return out;
}

} // namespace cer
