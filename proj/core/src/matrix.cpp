#include "cer/matrix.hpp"

namespace cer {

MatD softmax_rows(const MatD& logits) {
  MatD out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

bool all_finite(const MatD& m) { return m.allFinite(); }
bool all_finite(const MatF& m) { return m.allFinite(); }

} // namespace cer
