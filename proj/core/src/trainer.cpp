#include "cer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "cer/checkpoint.hpp"
#include "cer/errors.hpp"
#include "cer/metrics.hpp"

namespace cer {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train config: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (!(peak_lr > 0.0)) throw ConfigError("train config: peak_lr must be > 0");
  if (warmup_steps < 0) throw ConfigError("train config: warmup_steps must be >= 0");
  if (checkpoint_every < 1) throw ConfigError("train config: checkpoint_every must be >= 1");
  if (loss_weights.temperature <= 0.0) throw ConfigError("train config: temperature must be > 0");
  for (const int h : hidden_dims)
    if (h < 1) throw ConfigError("train config: hidden_dims entries must be >= 1");
}

double lr_at_step(std::int64_t step, const TrainConfig& cfg) {
  if (step < cfg.warmup_steps)
    return cfg.peak_lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  if (cfg.schedule == LrSchedule::Cosine && cfg.total_steps > cfg.warmup_steps) {
    const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
    const double progress =
        std::min(1.0, static_cast<double>(step - cfg.warmup_steps) / span);
    return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  }
  return cfg.peak_lr;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("train config: bad integer for '" + key + "': " + v);
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("train config: bad real for '" + key + "': " + v);
  }
}

} // namespace

void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "epochs") {
    cfg.epochs = static_cast<int>(parse_int(key, value));
  } else if (key == "batch_size") {
    cfg.batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "peak_lr") {
    cfg.peak_lr = parse_real(key, value);
  } else if (key == "warmup_steps") {
    cfg.warmup_steps = static_cast<int>(parse_int(key, value));
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "lambda_basic") {
    cfg.loss_weights.lambda_basic = parse_real(key, value);
  } else if (key == "lambda_cl") {
    cfg.loss_weights.lambda_cl = parse_real(key, value);
  } else if (key == "temperature") {
    cfg.loss_weights.temperature = parse_real(key, value);
  } else if (key == "combine_alpha") {
    cfg.combine_alpha = parse_real(key, value);
  } else if (key == "encoders") {
    cfg.encoders = split_csv(value);
  } else if (key == "hidden_dims") {
    cfg.hidden_dims.clear();
    for (const auto& d : split_csv(value))
      cfg.hidden_dims.push_back(static_cast<int>(parse_int(key, d)));
  } else if (key == "schedule") {
    if (value == "constant")
      cfg.schedule = LrSchedule::Constant;
    else if (value == "cosine")
      cfg.schedule = LrSchedule::Cosine;
    else
      throw ConfigError("train config: schedule must be constant or cosine, got '" + value + "'");
  } else {
    throw ConfigError("train config: unknown key '" + key + "'");
  }
}

TrainConfig parse_train_config(std::istream& in) {
  TrainConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError("train config line " + std::to_string(lineno) + ": expected key = value");
    apply_config_override(cfg, trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open train config: " + path.string());
  return parse_train_config(in);
}

void AdamState::init(std::size_t n) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
  t = 0;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw LengthMismatch("adam_step: parameter/gradient/state sizes differ");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

FeatureBatchSource::FeatureBatchSource(MatD features, std::vector<int> basic_targets,
                                       std::vector<int> compound_targets, MatD view1, MatD view2)
    : features_(std::move(features)), view1_(std::move(view1)), view2_(std::move(view2)),
      basic_(std::move(basic_targets)), compound_(std::move(compound_targets)) {
  const auto n = features_.rows();
  if (static_cast<Eigen::Index>(basic_.size()) != n ||
      static_cast<Eigen::Index>(compound_.size()) != n)
    throw LengthMismatch("feature source: target lengths must match feature rows");
  if (view1_.rows() != view2_.rows())
    throw ShapeMismatch("feature source: view tables must pair up");
  if (view1_.rows() != 0 && view1_.rows() != n)
    throw ShapeMismatch("feature source: view tables must cover every record");
  order_.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order_[static_cast<std::size_t>(i)] = i;
}

void FeatureBatchSource::start_epoch(std::uint64_t seed, int epoch) {
  // rebuild from identity so the order depends on (seed, epoch) alone, not on
  // whatever arrangement the previous epoch left behind
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::int64_t>(i);
  Rng rng(mix_seed(seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order_);
  cursor_ = 0;
}

bool FeatureBatchSource::next(int batch_size, TrainBatch& out) {
  const std::int64_t n = size();
  if (cursor_ >= n) return false;
  const std::int64_t take = std::min<std::int64_t>(batch_size, n - cursor_);
  out.orig.resize(take, features_.cols());
  const bool views = view1_.rows() > 0;
  if (views) {
    out.view1.resize(take, view1_.cols());
    out.view2.resize(take, view2_.cols());
  } else {
    out.view1.resize(0, 0);
    out.view2.resize(0, 0);
  }
  out.basic_targets.resize(static_cast<std::size_t>(take));
  out.compound_targets.resize(static_cast<std::size_t>(take));
  for (std::int64_t k = 0; k < take; ++k) {
    const std::int64_t src = order_[static_cast<std::size_t>(cursor_ + k)];
    out.orig.row(k) = features_.row(src);
    if (views) {
      out.view1.row(k) = view1_.row(src);
      out.view2.row(k) = view2_.row(src);
    }
    out.basic_targets[static_cast<std::size_t>(k)] = basic_[static_cast<std::size_t>(src)];
    out.compound_targets[static_cast<std::size_t>(k)] = compound_[static_cast<std::size_t>(src)];
  }
  cursor_ += take;
  return true;
}

EpochMetrics train_epoch(FusionModel& model, BatchSource& data, const TrainConfig& cfg,
                         AdamState& adam, TrainState& state) {
  data.start_epoch(cfg.seed, state.epoch);
  Rng dropout_rng(mix_seed(cfg.seed, kDropoutStream, static_cast<std::uint64_t>(state.epoch)));

  EpochMetrics metrics;
  std::vector<double> grad;
  TrainBatch batch;
  while (data.next(cfg.batch_size, batch)) {
    const double lr = lr_at_step(state.step, cfg);
    const auto step = model.train_step(batch.orig, batch.view1, batch.view2, batch.basic_targets,
                                       batch.compound_targets, cfg.loss_weights, &grad,
                                       model.config().dropout > 0.0 ? &dropout_rng : nullptr);
    if (!std::isfinite(step.loss_total))
      throw NonFiniteLoss("non-finite loss at step " + std::to_string(state.step) +
                          " (L_basic=" + std::to_string(step.loss_basic) +
                          ", L_ce=" + std::to_string(step.loss_ce) +
                          ", L_CL=" + std::to_string(step.loss_cl) + ")");
    adam_step(model.params(), grad, adam, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    metrics.mean_basic += step.loss_basic;
    metrics.mean_ce += step.loss_ce;
    metrics.mean_cl += step.loss_cl;
    metrics.mean_total += step.loss_total;
    metrics.last_lr = lr;
    metrics.batches += 1;
    state.step += 1;
  }
  if (metrics.batches > 0) {
    const double inv = 1.0 / static_cast<double>(metrics.batches);
    metrics.mean_basic *= inv;
    metrics.mean_ce *= inv;
    metrics.mean_cl *= inv;
    metrics.mean_total *= inv;
  }
  state.epoch += 1;
  return metrics;
}

double validation_macro_f1(const FusionModel& model, const EvalData& val, int batch_size) {
  std::vector<int> pred;
  pred.reserve(static_cast<std::size_t>(val.features.rows()));
  for (Eigen::Index start = 0; start < val.features.rows(); start += batch_size) {
    const Eigen::Index take = std::min<Eigen::Index>(batch_size, val.features.rows() - start);
    const ModelOutput out = model.forward(MatD(val.features.middleRows(start, take)));
    for (Eigen::Index i = 0; i < take; ++i) {
      int arg = 0;
      for (int j = 1; j < out.combined_probs.cols(); ++j)
        if (out.combined_probs(i, j) > out.combined_probs(i, arg)) arg = j;
      pred.push_back(arg);
    }
  }
  return macro_f1(confusion(val.compound_targets, pred));
}

std::string format_train_log_line(int epoch, std::int64_t step, double lr, const EpochMetrics& m,
                                  double val_f1_or_nan) {
  char buf[256];
  if (std::isnan(val_f1_or_nan)) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%.8e,%.6f,%.6f,%.6f,%.6f,-", epoch,
                  static_cast<long long>(step), lr, m.mean_basic, m.mean_ce, m.mean_cl,
                  m.mean_total);
  } else {
    std::snprintf(buf, sizeof buf, "%d,%lld,%.8e,%.6f,%.6f,%.6f,%.6f,%.6f", epoch,
                  static_cast<long long>(step), lr, m.mean_basic, m.mean_ce, m.mean_cl,
                  m.mean_total, val_f1_or_nan);
  }
  return buf;
}

TrainResult run_training(FusionModel& model, BatchSource& data, const EvalData* val,
                         const TrainConfig& config, const std::filesystem::path& out_dir,
                         std::ostream* log, TrainState state, AdamState adam) {
  TrainConfig cfg = config;
  cfg.validate();
  if (cfg.total_steps == 0 && cfg.schedule == LrSchedule::Cosine) {
    const std::int64_t per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
    cfg.total_steps = per_epoch * cfg.epochs;
  }
  if (adam.m.size() != model.params().size()) adam.init(model.params().size());
  state.rng_seed = cfg.seed;

  std::filesystem::create_directories(out_dir);
  TrainResult result;
  const auto best_path = out_dir / "best.cerc";
  const auto last_path = out_dir / "last.cerc";

  while (state.epoch < cfg.epochs) {
    const EpochMetrics metrics = train_epoch(model, data, cfg, adam, state);
    double val_f1 = std::numeric_limits<double>::quiet_NaN();
    if (val && val->features.rows() > 0) {
      val_f1 = validation_macro_f1(model, *val, cfg.batch_size);
      if (state.best_epoch < 0 || val_f1 > state.best_val_f1) {
        state.best_val_f1 = val_f1;
        state.best_epoch = state.epoch;
        save_checkpoint(model, state, &adam, best_path);
        result.best_checkpoint = best_path;
      }
    }
    if (state.epoch % cfg.checkpoint_every == 0 || state.epoch == cfg.epochs) {
      save_checkpoint(model, state, &adam, last_path);
      result.last_checkpoint = last_path;
    }
    if (log)
      *log << format_train_log_line(state.epoch, state.step, metrics.last_lr, metrics, val_f1)
           << '\n';
    result.history.push_back(metrics);
  }
  result.state = state;
  return result;
}

} // namespace cer
