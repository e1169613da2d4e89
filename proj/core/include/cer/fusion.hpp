#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cer/encoder.hpp"
#include "cer/losses.hpp"
#include "cer/matrix.hpp"
#include "cer/rng.hpp"

namespace cer {

struct FusionConfig {
  std::vector<std::string> encoder_names;
  std::vector<int> encoder_dims;
  std::vector<int> hidden_dims = {512};
  int basic_classes = 7;
  int compound_classes = 7;
  double combine_alpha = 1.0;
  double dropout = 0.1;

  int fused_dim() const;
  void validate() const;
};

struct ModelOutput {
  MatD trunk_embedding;
  MatD basic_logits;
  MatD compound_logits;
  MatD basic_probs;
  MatD compound_probs;
  MatD combined_probs;
};

/// Column-wise concatenation of same-batch feature blocks, in list order.
/// Throws BatchSizeMismatch when row counts differ.
FeatureBatch concat_features(const std::vector<FeatureBatch>& parts);

/// Same, also checking that part names match `expected_order` exactly
/// (EncoderOrderMismatch otherwise).
FeatureBatch concat_features(const std::vector<FeatureBatch>& parts,
                             const std::vector<std::string>& expected_order);

/// Compound logits shifted by the log of the additive basic-constituent
/// prior: combined = compound_logits + alpha * log(softmax(basic) M^T + 1e-12).
/// alpha = 0 passes the compound head through unchanged.
MatD combine_logits(const MatD& basic_logits, const MatD& compound_logits, double alpha);

/// softmax of combine_logits.
MatD combine_heads(const MatD& basic_logits, const MatD& compound_logits, double alpha);

/// Shared trunk MLP (tanh layers, optional dropout) with a basic and a
/// compound head. Parameters live in one flat arena so the optimizer and
/// finite-difference checks can treat them uniformly.
class FusionModel {
public:
  struct TensorRef {
    std::string name;
    std::size_t offset;
    Eigen::Index rows;
    Eigen::Index cols;
  };

  FusionModel(FusionConfig config, std::uint64_t seed);

  const FusionConfig& config() const { return config_; }
  const std::vector<TensorRef>& tensors() const { return tensors_; }

  std::vector<double>& params() { return theta_; }
  const std::vector<double>& params() const { return theta_; }

  Eigen::Map<MatD> tensor(const TensorRef& ref);
  Eigen::Map<const MatD> tensor(const TensorRef& ref) const;
  Eigen::Map<const MatD> tensor(const std::string& name) const;

  /// Evaluation-mode forward pass (no dropout). Throws DimensionMismatch when
  /// the fused width differs from the config.
  ModelOutput forward(const FeatureBatch& fused) const;
  ModelOutput forward(const MatD& fused) const;

  /// Trunk embedding only (the representation the contrastive loss sees).
  MatD embed(const MatD& fused) const;

  struct TrainStep {
    double loss_basic = 0.0;
    double loss_ce = 0.0;
    double loss_cl = 0.0;
    double loss_total = 0.0;
    ModelOutput output; ///< original-image path outputs
  };

  /// One supervised batch: forward on the original features plus the two
  /// augmented views, loss composition per the wiring (L_ce on combined
  /// predictions, L_basic on the basic head, NT-Xent on view embeddings),
  /// and, when `grad` is non-null, the full parameter gradient of the total.
  ///
  /// basic/compound targets use -1 for "no label of this kind"; rows lacking
  /// a target are excluded from that loss term. Views may be empty (0 rows)
  /// to skip the contrastive term. `dropout_rng` enables dropout (training
  /// mode); pass nullptr for a deterministic pass.
  TrainStep train_step(const MatD& orig, const MatD& view1, const MatD& view2,
                       const std::vector<int>& basic_targets,
                       const std::vector<int>& compound_targets, const LossWeights& weights,
                       std::vector<double>* grad, Rng* dropout_rng) const;

private:
  struct TrunkCache {
    std::vector<MatD> inputs; ///< layer inputs, inputs[0] = x
    std::vector<MatD> acts;   ///< tanh outputs before dropout
    std::vector<MatD> masks;  ///< scaled dropout masks, empty rows when off
  };

  MatD trunk_forward(const MatD& x, Rng* dropout_rng, TrunkCache* cache) const;
  void trunk_backward(const TrunkCache& cache, MatD d_out, std::vector<double>& grad) const;

  std::size_t tensor_index(const std::string& name) const;

  FusionConfig config_;
  std::vector<TensorRef> tensors_;
  std::vector<double> theta_;
  std::size_t trunk_layers_ = 0;
};

} // namespace cer
