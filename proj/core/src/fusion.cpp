#include "cer/fusion.hpp"

#include <cmath>
#include <numeric>

#include "cer/errors.hpp"
#include "cer/taxonomy.hpp"

namespace cer {

int FusionConfig::fused_dim() const {
  return std::accumulate(encoder_dims.begin(), encoder_dims.end(), 0);
}

void FusionConfig::validate() const {
  if (encoder_names.size() != encoder_dims.size())
    throw ConfigError("fusion config: encoder_names and encoder_dims lengths differ");
  if (encoder_dims.empty()) throw ConfigError("fusion config: at least one encoder required");
  for (const int d : encoder_dims)
    if (d <= 0) throw ConfigError("fusion config: encoder dims must be positive");
  for (const int h : hidden_dims)
    if (h <= 0) throw ConfigError("fusion config: hidden dims must be positive");
  if (hidden_dims.empty()) throw ConfigError("fusion config: at least one hidden layer required");
  if (basic_classes != kNumBasic || compound_classes != kNumCompound)
    throw ConfigError("fusion config: heads must output 7 classes each");
  if (combine_alpha < 0.0) throw ConfigError("fusion config: combine_alpha must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("fusion config: dropout must be in [0, 1)");
}

FeatureBatch concat_features(const std::vector<FeatureBatch>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_features: empty input list");
  const Eigen::Index rows = parts.front().values.rows();
  Eigen::Index cols = 0;
  for (const auto& part : parts) {
    if (part.values.rows() != rows)
      throw BatchSizeMismatch("concat_features: '" + part.encoder_name + "' has " +
                              std::to_string(part.values.rows()) + " rows, expected " +
                              std::to_string(rows));
    cols += part.values.cols();
  }
  FeatureBatch fused;
  fused.values.resize(rows, cols);
  Eigen::Index offset = 0;
  std::string name;
  for (const auto& part : parts) {
    fused.values.middleCols(offset, part.values.cols()) = part.values;
    offset += part.values.cols();
    if (!name.empty()) name += "+";
    name += part.encoder_name;
  }
  fused.encoder_name = name;
  return fused;
}

FeatureBatch concat_features(const std::vector<FeatureBatch>& parts,
                             const std::vector<std::string>& expected_order) {
  if (parts.size() != expected_order.size())
    throw EncoderOrderMismatch("concat_features: got " + std::to_string(parts.size()) +
                               " blocks, config lists " + std::to_string(expected_order.size()));
  for (std::size_t i = 0; i < parts.size(); ++i)
    if (parts[i].encoder_name != expected_order[i])
      throw EncoderOrderMismatch("concat_features: block " + std::to_string(i) + " is '" +
                                 parts[i].encoder_name + "', config expects '" +
                                 expected_order[i] + "'");
  return concat_features(parts);
}

MatD combine_logits(const MatD& basic_logits, const MatD& compound_logits, double alpha) {
  if (basic_logits.rows() != compound_logits.rows())
    throw BatchSizeMismatch("combine_heads: head batch sizes differ");
  if (basic_logits.cols() != kNumBasic || compound_logits.cols() != kNumCompound)
    throw DimensionMismatch("combine_heads: expected 7 logits per head");
  if (alpha < 0.0) throw ConfigError("combine_heads: alpha must be >= 0");
  if (alpha == 0.0) return compound_logits;

  const MatD prior = softmax_rows(basic_logits) * compound_basic_map().transpose();
  return compound_logits + alpha * (prior.array() + kProbFloor).log().matrix();
}

MatD combine_heads(const MatD& basic_logits, const MatD& compound_logits, double alpha) {
  return softmax_rows(combine_logits(basic_logits, compound_logits, alpha));
}

namespace {

// VJP of row-wise softmax: out_i = s_i (.) (g_i - <s_i, g_i>)
MatD softmax_vjp(const MatD& s, const MatD& g) {
  MatD out(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double dot = s.row(i).dot(g.row(i));
    out.row(i) = s.row(i).array() * (g.row(i).array() - dot);
  }
  return out;
}

} // namespace

FusionModel::FusionModel(FusionConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  trunk_layers_ = config_.hidden_dims.size();

  std::size_t offset = 0;
  auto add_tensor = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    tensors_.push_back({name, offset, rows, cols});
    offset += static_cast<std::size_t>(rows * cols);
  };

  Eigen::Index in_dim = config_.fused_dim();
  for (std::size_t l = 0; l < trunk_layers_; ++l) {
    const Eigen::Index out_dim = config_.hidden_dims[l];
    add_tensor("trunk." + std::to_string(l) + ".w", in_dim, out_dim);
    add_tensor("trunk." + std::to_string(l) + ".b", 1, out_dim);
    in_dim = out_dim;
  }
  add_tensor("head.basic.w", in_dim, config_.basic_classes);
  add_tensor("head.basic.b", 1, config_.basic_classes);
  add_tensor("head.compound.w", in_dim, config_.compound_classes);
  add_tensor("head.compound.b", 1, config_.compound_classes);

  theta_.assign(offset, 0.0);

  // symmetric uniform fan-in init for weights, zero biases
  Rng rng(seed);
  for (const auto& ref : tensors_) {
    if (ref.name.ends_with(".b")) continue;
    const double limit = 1.0 / std::sqrt(static_cast<double>(ref.rows));
    double* p = theta_.data() + ref.offset;
    for (Eigen::Index k = 0; k < ref.rows * ref.cols; ++k) p[k] = rng.uniform(-limit, limit);
  }
}

std::size_t FusionModel::tensor_index(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return i;
  throw CheckpointFormatError("no such tensor: " + name);
}

Eigen::Map<MatD> FusionModel::tensor(const TensorRef& ref) {
  return {theta_.data() + ref.offset, ref.rows, ref.cols};
}

Eigen::Map<const MatD> FusionModel::tensor(const TensorRef& ref) const {
  return {theta_.data() + ref.offset, ref.rows, ref.cols};
}

Eigen::Map<const MatD> FusionModel::tensor(const std::string& name) const {
  return tensor(tensors_[tensor_index(name)]);
}

MatD FusionModel::trunk_forward(const MatD& x, Rng* dropout_rng, TrunkCache* cache) const {
  if (x.cols() != config_.fused_dim())
    throw DimensionMismatch("fusion forward: input width " + std::to_string(x.cols()) +
                            ", config fused_dim " + std::to_string(config_.fused_dim()));
  MatD h = x;
  if (cache) cache->inputs.push_back(h);
  for (std::size_t l = 0; l < trunk_layers_; ++l) {
    const auto w = tensor(tensors_[2 * l]);
    const auto b = tensor(tensors_[2 * l + 1]);
    MatD act = ((h * w).rowwise() + b.row(0)).array().tanh();
    if (cache) cache->acts.push_back(act);
    if (dropout_rng && config_.dropout > 0.0) {
      const double keep = 1.0 - config_.dropout;
      MatD mask(act.rows(), act.cols());
      for (Eigen::Index i = 0; i < mask.rows(); ++i)
        for (Eigen::Index j = 0; j < mask.cols(); ++j)
          mask(i, j) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
      act.array() *= mask.array();
      if (cache) cache->masks.push_back(std::move(mask));
    } else if (cache) {
      cache->masks.emplace_back();
    }
    h = std::move(act);
    if (cache) cache->inputs.push_back(h);
  }
  return h;
}

void FusionModel::trunk_backward(const TrunkCache& cache, MatD d_out,
                                 std::vector<double>& grad) const {
  for (std::size_t li = trunk_layers_; li-- > 0;) {
    if (cache.masks[li].size() > 0) d_out.array() *= cache.masks[li].array();
    const MatD d_pre = d_out.array() * (1.0 - cache.acts[li].array().square());
    const auto& w_ref = tensors_[2 * li];
    const auto& b_ref = tensors_[2 * li + 1];
    Eigen::Map<MatD>(grad.data() + w_ref.offset, w_ref.rows, w_ref.cols) +=
        cache.inputs[li].transpose() * d_pre;
    Eigen::Map<MatD>(grad.data() + b_ref.offset, 1, b_ref.cols) += d_pre.colwise().sum();
    if (li > 0) d_out = d_pre * tensor(w_ref).transpose();
  }
}

ModelOutput FusionModel::forward(const FeatureBatch& fused) const { return forward(MatD(fused.values.cast<double>())); }

ModelOutput FusionModel::forward(const MatD& fused) const {
  ModelOutput out;
  out.trunk_embedding = trunk_forward(fused, nullptr, nullptr);
  const auto wb = tensor("head.basic.w");
  const auto bb = tensor("head.basic.b");
  const auto wc = tensor("head.compound.w");
  const auto bc = tensor("head.compound.b");
  out.basic_logits = (out.trunk_embedding * wb).rowwise() + bb.row(0);
  out.compound_logits = (out.trunk_embedding * wc).rowwise() + bc.row(0);
  out.basic_probs = softmax_rows(out.basic_logits);
  out.compound_probs = softmax_rows(out.compound_logits);
  out.combined_probs = combine_heads(out.basic_logits, out.compound_logits, config_.combine_alpha);
  return out;
}

MatD FusionModel::embed(const MatD& fused) const { return trunk_forward(fused, nullptr, nullptr); }

FusionModel::TrainStep FusionModel::train_step(const MatD& orig, const MatD& view1,
                                               const MatD& view2,
                                               const std::vector<int>& basic_targets,
                                               const std::vector<int>& compound_targets,
                                               const LossWeights& weights,
                                               std::vector<double>* grad, Rng* dropout_rng) const {
  const Eigen::Index batch = orig.rows();
  if (batch < 1) throw BatchSizeMismatch("train_step: empty batch");
  if (static_cast<Eigen::Index>(basic_targets.size()) != batch ||
      static_cast<Eigen::Index>(compound_targets.size()) != batch)
    throw LengthMismatch("train_step: target vectors must match the batch size");
  if (view1.rows() != view2.rows() || view1.cols() != view2.cols())
    throw ShapeMismatch("train_step: view shapes differ");
  const bool with_views = view1.rows() > 0;

  if (grad) {
    grad->assign(theta_.size(), 0.0);
  }

  TrainStep step;

  // ---- original-image path ----
  TrunkCache cache;
  const MatD embedding = trunk_forward(orig, dropout_rng, grad ? &cache : nullptr);
  const auto wb = tensor("head.basic.w");
  const auto bb = tensor("head.basic.b");
  const auto wc = tensor("head.compound.w");
  const auto bc = tensor("head.compound.b");

  ModelOutput& out = step.output;
  out.trunk_embedding = embedding;
  out.basic_logits = (embedding * wb).rowwise() + bb.row(0);
  out.compound_logits = (embedding * wc).rowwise() + bc.row(0);
  out.basic_probs = softmax_rows(out.basic_logits);
  out.compound_probs = softmax_rows(out.compound_logits);

  const MatD prior =
      ((out.basic_probs * compound_basic_map().transpose()).array() + kProbFloor).matrix();
  const MatD combined_logits =
      config_.combine_alpha == 0.0
          ? out.compound_logits
          : MatD(out.compound_logits + config_.combine_alpha * prior.array().log().matrix());
  out.combined_probs = softmax_rows(combined_logits);

  std::vector<Eigen::Index> basic_rows, compound_rows;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int tb = basic_targets[static_cast<std::size_t>(i)];
    const int tc = compound_targets[static_cast<std::size_t>(i)];
    if (tb >= config_.basic_classes || tc >= config_.compound_classes)
      throw LabelOutOfRange("train_step: target outside class range");
    if (tb >= 0) basic_rows.push_back(i);
    if (tc >= 0) compound_rows.push_back(i);
  }

  if (!compound_rows.empty()) {
    double sum = 0.0;
    for (const Eigen::Index i : compound_rows)
      sum += -std::log(out.combined_probs(i, compound_targets[static_cast<std::size_t>(i)]) +
                       kProbFloor);
    step.loss_ce = sum / static_cast<double>(compound_rows.size());
  }
  if (!basic_rows.empty()) {
    double sum = 0.0;
    for (const Eigen::Index i : basic_rows)
      sum += -std::log(out.basic_probs(i, basic_targets[static_cast<std::size_t>(i)]) + kProbFloor);
    step.loss_basic = sum / static_cast<double>(basic_rows.size());
  }

  // ---- contrastive path over the two views ----
  TrunkCache cache_v1, cache_v2;
  MatD z1, z2, g_z1, g_z2;
  if (with_views && weights.lambda_cl != 0.0) {
    if (view1.rows() < 2)
      throw BatchTooSmall("train_step: contrastive loss needs at least 2 view pairs");
    z1 = trunk_forward(view1, dropout_rng, grad ? &cache_v1 : nullptr);
    z2 = trunk_forward(view2, dropout_rng, grad ? &cache_v2 : nullptr);
    step.loss_cl = contrastive_nt_xent_grad(z1, z2, weights.temperature, grad ? &g_z1 : nullptr,
                                            grad ? &g_z2 : nullptr);
  }

  step.loss_total = total_loss(step.loss_ce, step.loss_basic, step.loss_cl, weights);

  if (!grad) return step;

  // ---- backward ----
  MatD d_combined = MatD::Zero(batch, config_.compound_classes);
  if (!compound_rows.empty()) {
    MatD g_py = MatD::Zero(batch, config_.compound_classes);
    const double inv = 1.0 / static_cast<double>(compound_rows.size());
    for (const Eigen::Index i : compound_rows) {
      const int t = compound_targets[static_cast<std::size_t>(i)];
      g_py(i, t) = -inv / (out.combined_probs(i, t) + kProbFloor);
    }
    d_combined = softmax_vjp(out.combined_probs, g_py);
  }

  // combined = zc + alpha * log(prior); prior = q M^T (+ floor)
  const MatD d_zc = d_combined;
  MatD d_q = MatD::Zero(batch, config_.basic_classes);
  if (config_.combine_alpha != 0.0 && !compound_rows.empty()) {
    const MatD d_prior = config_.combine_alpha * (d_combined.array() / prior.array()).matrix();
    d_q = d_prior * compound_basic_map();
  }
  if (!basic_rows.empty()) {
    const double inv = weights.lambda_basic / static_cast<double>(basic_rows.size());
    for (const Eigen::Index i : basic_rows) {
      const int t = basic_targets[static_cast<std::size_t>(i)];
      d_q(i, t) += -inv / (out.basic_probs(i, t) + kProbFloor);
    }
  }
  const MatD d_zb = softmax_vjp(out.basic_probs, d_q);

  const auto& wb_ref = tensors_[tensor_index("head.basic.w")];
  const auto& bb_ref = tensors_[tensor_index("head.basic.b")];
  const auto& wc_ref = tensors_[tensor_index("head.compound.w")];
  const auto& bc_ref = tensors_[tensor_index("head.compound.b")];
  Eigen::Map<MatD>(grad->data() + wb_ref.offset, wb_ref.rows, wb_ref.cols) +=
      embedding.transpose() * d_zb;
  Eigen::Map<MatD>(grad->data() + bb_ref.offset, 1, bb_ref.cols) += d_zb.colwise().sum();
  Eigen::Map<MatD>(grad->data() + wc_ref.offset, wc_ref.rows, wc_ref.cols) +=
      embedding.transpose() * d_zc;
  Eigen::Map<MatD>(grad->data() + bc_ref.offset, 1, bc_ref.cols) += d_zc.colwise().sum();

  const MatD d_embedding = d_zb * wb.transpose() + d_zc * wc.transpose();
  trunk_backward(cache, d_embedding, *grad);

  if (with_views && weights.lambda_cl != 0.0) {
    trunk_backward(cache_v1, weights.lambda_cl * g_z1, *grad);
    trunk_backward(cache_v2, weights.lambda_cl * g_z2, *grad);
  }
  return step;
}

} // namespace cer
