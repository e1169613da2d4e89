#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cer/fusion.hpp"
#include "cer/losses.hpp"
#include "cer/matrix.hpp"
#include "cer/rng.hpp"

namespace cer {

enum class LrSchedule { Constant, Cosine };

// Stream tags feeding mix_seed so independent RNG consumers never collide.
inline constexpr std::uint64_t kModelInitStream = 0x01;
inline constexpr std::uint64_t kShuffleStream = 0x02;
inline constexpr std::uint64_t kDropoutStream = 0x03;
inline constexpr std::uint64_t kAugmentStream = 0x04;
inline constexpr std::uint64_t kDataStream = 0x05;

struct TrainConfig {
  int epochs = 100;
  int batch_size = 128;
  double peak_lr = 5e-5;
  int warmup_steps = 500;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int checkpoint_every = 1; ///< epochs between "last" checkpoints
  LrSchedule schedule = LrSchedule::Constant;
  std::int64_t total_steps = 0; ///< cosine horizon; 0 = derive from epochs

  LossWeights loss_weights;
  double combine_alpha = 1.0;
  std::vector<std::string> encoders; ///< encoder instance strings, in fusion order
  std::vector<int> hidden_dims = {512};

  void validate() const;
};

/// Linear warm-up to peak_lr over warmup_steps, then constant (default) or
/// cosine decay to zero at total_steps.
double lr_at_step(std::int64_t step, const TrainConfig& cfg);

/// `key = value` training config file. Unknown keys, bad values, or malformed
/// lines raise ConfigError. Blank lines and #-comments are ignored. Keys:
/// epochs, batch_size, peak_lr, warmup_steps, seed, lambda_basic, lambda_cl,
/// temperature, combine_alpha, encoders, hidden_dims, schedule.
TrainConfig parse_train_config(std::istream& in);
TrainConfig load_train_config(const std::filesystem::path& path);
/// Applies one "key=value" override on top of an existing config (CLI flags).
void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value);

struct AdamState {
  std::vector<double> m, v;
  std::int64_t t = 0;

  void init(std::size_t n);
};

/// One Adam update in place. Bias-corrected, standard epsilon placement.
void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
               double lr, double beta1, double beta2, double eps);

struct TrainState {
  std::int64_t step = 0;
  int epoch = 0; ///< completed epochs
  double best_val_f1 = 0.0;
  int best_epoch = -1; ///< -1 until a validation pass has run
  std::uint64_t rng_seed = 0;
};

/// One optimizer batch. Views with zero rows skip the contrastive term;
/// targets use -1 for "no label of this kind".
struct TrainBatch {
  MatD orig;
  MatD view1, view2;
  std::vector<int> basic_targets;
  std::vector<int> compound_targets;
};

/// Deterministic batch stream for one epoch at a time.
class BatchSource {
public:
  virtual ~BatchSource() = default;
  virtual std::int64_t size() const = 0;
  /// Reshuffles for the given epoch; the schedule depends only on (seed, epoch).
  virtual void start_epoch(std::uint64_t seed, int epoch) = 0;
  /// Fills `out` with up to batch_size records; false once the epoch is done.
  virtual bool next(int batch_size, TrainBatch& out) = 0;
};

/// In-memory feature table (already encoded). Optional paired view features
/// drive the contrastive term; pass empty matrices to train without it.
class FeatureBatchSource final : public BatchSource {
public:
  FeatureBatchSource(MatD features, std::vector<int> basic_targets,
                     std::vector<int> compound_targets, MatD view1 = {}, MatD view2 = {});

  std::int64_t size() const override { return features_.rows(); }
  void start_epoch(std::uint64_t seed, int epoch) override;
  bool next(int batch_size, TrainBatch& out) override;

private:
  MatD features_, view1_, view2_;
  std::vector<int> basic_, compound_;
  std::vector<std::int64_t> order_;
  std::int64_t cursor_ = 0;
};

struct EpochMetrics {
  double mean_basic = 0.0;
  double mean_ce = 0.0;
  double mean_cl = 0.0;
  double mean_total = 0.0;
  double last_lr = 0.0;
  std::int64_t batches = 0;
};

/// One full pass: forward/backward/Adam per batch, lr from lr_at_step,
/// dropout stream derived from (seed, epoch). Throws NonFiniteLoss with a
/// step diagnostic if any loss component goes NaN/Inf.
EpochMetrics train_epoch(FusionModel& model, BatchSource& data, const TrainConfig& cfg,
                         AdamState& adam, TrainState& state);

struct EvalData {
  MatD features;
  std::vector<int> compound_targets;
};

/// Argmax of combined probabilities against compound targets -> macro-F1.
double validation_macro_f1(const FusionModel& model, const EvalData& val, int batch_size);

struct TrainResult {
  TrainState state;
  std::vector<EpochMetrics> history;
  std::filesystem::path best_checkpoint; ///< empty when no epoch ran
  std::filesystem::path last_checkpoint;
};

inline constexpr const char* kTrainLogHeader = "epoch,step,lr,L_basic,L_ce,L_CL,total,val_macro_f1";

/// Formats one training-log line; byte-stable for determinism comparisons.
std::string format_train_log_line(int epoch, std::int64_t step, double lr,
                                  const EpochMetrics& m, double val_f1_or_nan);

/// Full loop: per-epoch train_epoch + validation, best/last checkpointing
/// under out_dir, and one log line per epoch to `log` (train_log.csv is the
/// caller's concern; this writes nothing but checkpoints). `val` may be null.
/// Pass a restored (state, adam) pair to continue an interrupted run; epochs
/// already recorded in `state` are not repeated.
TrainResult run_training(FusionModel& model, BatchSource& data, const EvalData* val,
                         const TrainConfig& cfg, const std::filesystem::path& out_dir,
                         std::ostream* log, TrainState state = {}, AdamState adam = {});

} // namespace cer
