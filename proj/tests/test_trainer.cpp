#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cer/checkpoint.hpp"
#include "cer/errors.hpp"
#include "cer/fusion.hpp"
#include "cer/metrics.hpp"
#include "cer/synthetic.hpp"
#include "cer/trainer.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cer;
using cer::test::random_matrix;
using cer::test::slurp;
using cer::test::spit;
using cer::test::TempDir;

namespace {

FusionConfig feature_model_config(int dim, int hidden = 16) {
  FusionConfig cfg;
  cfg.encoder_names = {"features"};
  cfg.encoder_dims = {dim};
  cfg.hidden_dims = {hidden};
  cfg.dropout = 0.0;
  return cfg;
}

TrainConfig fast_train_config(int epochs, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 16;
  cfg.peak_lr = 5e-3;
  cfg.warmup_steps = 5;
  cfg.seed = seed;
  cfg.encoders = {"features"};
  cfg.hidden_dims = {16};
  return cfg;
}

} // namespace

TEST_CASE("warm-up reaches the peak rate exactly at warmup_steps") {
  TrainConfig cfg;
  cfg.peak_lr = 5e-5;
  cfg.warmup_steps = 500;
  CHECK(lr_at_step(500, cfg) == 5e-5);
  CHECK(lr_at_step(249, cfg) == 2.5e-5);
  CHECK(lr_at_step(0, cfg) == 5e-5 * (1.0 / 500.0));
  CHECK(lr_at_step(10'000, cfg) == 5e-5);

  TrainConfig no_warmup = cfg;
  no_warmup.warmup_steps = 0;
  CHECK(lr_at_step(0, no_warmup) == 5e-5);
}

TEST_CASE("the constant schedule never decreases and never exceeds the peak") {
  TrainConfig cfg;
  cfg.peak_lr = 3e-4;
  cfg.warmup_steps = 37;
  double prev = 0.0;
  for (std::int64_t step = 0; step < 200; ++step) {
    const double lr = lr_at_step(step, cfg);
    CHECK(lr >= prev);
    CHECK(lr <= cfg.peak_lr);
    prev = lr;
  }
}

TEST_CASE("the cosine schedule decays from the peak to zero") {
  TrainConfig cfg;
  cfg.peak_lr = 1e-3;
  cfg.warmup_steps = 10;
  cfg.schedule = LrSchedule::Cosine;
  cfg.total_steps = 110;
  CHECK(lr_at_step(10, cfg) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_at_step(60, cfg) == doctest::Approx(0.5e-3).epsilon(1e-9));
  CHECK(lr_at_step(110, cfg) == doctest::Approx(0.0).epsilon(1e-12));
  double prev = lr_at_step(10, cfg);
  for (std::int64_t step = 11; step <= 110; ++step) {
    const double lr = lr_at_step(step, cfg);
    CHECK(lr <= prev + 1e-15);
    prev = lr;
  }
}

TEST_CASE("training config files parse every key and reject unknown ones") {
  std::istringstream good(R"(# optimizer
epochs = 20
batch_size = 128

peak_lr = 5e-5
warmup_steps = 500
seed = 42
lambda_basic = 0.5
lambda_cl = 0.2
temperature = 0.1
combine_alpha = 0.8
encoders = toy-mlp:d=16:seed=1, toy-mlp:d=16:seed=2
hidden_dims = 512, 256
schedule = cosine
)");
  const TrainConfig cfg = parse_train_config(good);
  CHECK(cfg.epochs == 20);
  CHECK(cfg.batch_size == 128);
  CHECK(cfg.peak_lr == 5e-5);
  CHECK(cfg.warmup_steps == 500);
  CHECK(cfg.seed == 42);
  CHECK(cfg.loss_weights.lambda_basic == 0.5);
  CHECK(cfg.loss_weights.lambda_cl == 0.2);
  CHECK(cfg.loss_weights.temperature == 0.1);
  CHECK(cfg.combine_alpha == 0.8);
  CHECK(cfg.encoders == std::vector<std::string>{"toy-mlp:d=16:seed=1", "toy-mlp:d=16:seed=2"});
  CHECK(cfg.hidden_dims == std::vector<int>{512, 256});
  CHECK(cfg.schedule == LrSchedule::Cosine);

  std::istringstream unknown("learning_rate = 5e-5\n");
  CHECK_THROWS_AS(parse_train_config(unknown), ConfigError);
  std::istringstream bad_value("epochs = many\n");
  CHECK_THROWS_AS(parse_train_config(bad_value), ConfigError);
  std::istringstream no_equals("epochs 20\n");
  CHECK_THROWS_AS(parse_train_config(no_equals), ConfigError);

  TrainConfig base;
  apply_config_override(base, "peak_lr", "1e-3");
  CHECK(base.peak_lr == 1e-3);
  CHECK_THROWS_AS(apply_config_override(base, "nonsense", "1"), ConfigError);

  TrainConfig invalid;
  invalid.batch_size = 0;
  CHECK_THROWS_AS(invalid.validate(), ConfigError);
  invalid = TrainConfig{};
  invalid.epochs = -1;
  CHECK_THROWS_AS(invalid.validate(), ConfigError);
}

TEST_CASE("adam reproduces two hand-computed updates") {
  std::vector<double> p = {1.0, -2.0, 0.5};
  const std::vector<double> g1 = {0.1, -0.2, 0.3};
  const std::vector<double> g2 = {-0.05, 0.15, 0.25};
  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  AdamState state;
  state.init(p.size());
  adam_step(p, g1, state, lr, b1, b2, eps);
  adam_step(p, g2, state, lr, b1, b2, eps);

  std::vector<double> q = {1.0, -2.0, 0.5};
  std::vector<double> m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 2; ++t) {
    const auto& g = t == 1 ? g1 : g2;
    for (int i = 0; i < 3; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mhat = m[i] / (1 - std::pow(b1, t));
      const double vhat = v[i] / (1 - std::pow(b2, t));
      q[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  for (int i = 0; i < 3; ++i) CHECK(p[static_cast<std::size_t>(i)] ==
                                    doctest::Approx(q[static_cast<std::size_t>(i)]).epsilon(1e-12));
  CHECK(state.t == 2);
}

TEST_CASE("each epoch visits every record exactly once, reshuffled deterministically") {
  const int n = 23, dim = 4;
  MatD features(n, dim);
  std::vector<int> basic(n), compound(n);
  for (int i = 0; i < n; ++i) {
    features.row(i).setConstant(i);
    basic[static_cast<std::size_t>(i)] = i % 7;
    compound[static_cast<std::size_t>(i)] = i % 7;
  }
  FeatureBatchSource source(features, basic, compound);
  CHECK(source.size() == n);

  const auto collect = [&](std::uint64_t seed, int epoch) {
    source.start_epoch(seed, epoch);
    std::vector<int> seen;
    std::vector<Eigen::Index> batch_sizes;
    TrainBatch batch;
    while (source.next(5, batch)) {
      batch_sizes.push_back(batch.orig.rows());
      for (Eigen::Index r = 0; r < batch.orig.rows(); ++r)
        seen.push_back(static_cast<int>(batch.orig(r, 0)));
    }
    return std::pair{seen, batch_sizes};
  };

  auto [first, sizes] = collect(9, 0);
  CHECK(sizes == std::vector<Eigen::Index>{5, 5, 5, 5, 3}); // trailing partial batch
  auto sorted = first;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expected(n);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(sorted == expected);

  auto [repeat, sizes2] = collect(9, 0);
  CHECK(repeat == first);
  auto [other_epoch, sizes3] = collect(9, 1);
  CHECK(other_epoch != first);
  std::sort(other_epoch.begin(), other_epoch.end());
  CHECK(other_epoch == expected);
}

TEST_CASE("view rows stay paired with their originals through the shuffle") {
  const int n = 12, dim = 3;
  MatD features(n, dim), v1(n, dim), v2(n, dim);
  std::vector<int> basic(n, -1), compound(n);
  for (int i = 0; i < n; ++i) {
    features.row(i).setConstant(i);
    v1.row(i).setConstant(100 + i);
    v2.row(i).setConstant(200 + i);
    compound[static_cast<std::size_t>(i)] = i % 7;
  }
  FeatureBatchSource source(features, basic, compound, v1, v2);
  source.start_epoch(3, 0);
  TrainBatch batch;
  while (source.next(4, batch)) {
    for (Eigen::Index r = 0; r < batch.orig.rows(); ++r) {
      const int id = static_cast<int>(batch.orig(r, 0));
      CHECK(batch.view1(r, 0) == 100 + id);
      CHECK(batch.view2(r, 0) == 200 + id);
      CHECK(batch.compound_targets[static_cast<std::size_t>(r)] == id % 7);
    }
  }

  CHECK_THROWS_AS(FeatureBatchSource(features, std::vector<int>(5, 0), compound),
                  LengthMismatch);
  CHECK_THROWS_AS(FeatureBatchSource(features, basic, compound, v1, MatD()), ShapeMismatch);
}

TEST_CASE("training on separable clusters drives the loss down monotonically at first") {
  const auto fixture = make_cluster_features(20, 8, 0.1, 3.0, 5);
  FeatureBatchSource source(fixture.features, fixture.basic_targets, fixture.compound_targets);
  FusionModel model(feature_model_config(8), mix_seed(11, kModelInitStream));
  TrainConfig cfg = fast_train_config(5, 11);

  AdamState adam;
  adam.init(model.params().size());
  TrainState state;
  std::vector<double> totals;
  for (int epoch = 0; epoch < 5; ++epoch) {
    const EpochMetrics metrics = train_epoch(model, source, cfg, adam, state);
    totals.push_back(metrics.mean_total);
  }
  for (std::size_t i = 1; i < totals.size(); ++i) CHECK(totals[i] < totals[i - 1]);
  CHECK(state.epoch == 5);
  CHECK(state.step == 5 * ((140 + 15) / 16));
}

TEST_CASE("zero-epoch runs change nothing and write no checkpoints") {
  const auto fixture = make_cluster_features(4, 8, 0.1, 2.0, 6);
  FeatureBatchSource source(fixture.features, fixture.basic_targets, fixture.compound_targets);
  FusionModel model(feature_model_config(8), 1);
  const std::vector<double> before = model.params();
  TrainConfig cfg = fast_train_config(0, 1);
  TempDir dir("zero_epochs");

  std::ostringstream log;
  const TrainResult result = run_training(model, source, nullptr, cfg, dir.path(), &log);
  CHECK(model.params() == before);
  CHECK(result.history.empty());
  CHECK(result.state.epoch == 0);
  CHECK(result.best_checkpoint.empty());
  CHECK(log.str().empty());
  CHECK(std::filesystem::is_empty(dir.path()));
}

TEST_CASE("identically seeded runs produce bit-identical parameters and logs") {
  const auto fixture = make_cluster_features(10, 8, 0.2, 2.0, 7);
  const auto run = [&](const std::filesystem::path& out) {
    FeatureBatchSource source(fixture.features, fixture.basic_targets,
                              fixture.compound_targets);
    FusionConfig mc = feature_model_config(8);
    mc.dropout = 0.2; // exercise the dropout stream too
    FusionModel model(mc, mix_seed(21, kModelInitStream));
    TrainConfig cfg = fast_train_config(3, 21);
    EvalData val{fixture.features, fixture.compound_targets};
    std::ostringstream log;
    run_training(model, source, &val, cfg, out, &log);
    return std::pair{model.params(), log.str()};
  };
  TempDir a("det_a"), b("det_b");
  const auto [params_a, log_a] = run(a.path());
  const auto [params_b, log_b] = run(b.path());
  CHECK(params_a == params_b);
  CHECK(log_a == log_b);
  CHECK(!log_a.empty());
}

TEST_CASE("non-finite losses surface as NonFiniteLoss with a diagnostic") {
  const auto fixture = make_cluster_features(5, 8, 0.1, 2.0, 8);
  FeatureBatchSource source(fixture.features, fixture.basic_targets, fixture.compound_targets);
  FusionModel model(feature_model_config(8), 2);
  model.params()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg = fast_train_config(1, 2);
  AdamState adam;
  adam.init(model.params().size());
  TrainState state;
  CHECK_THROWS_AS(train_epoch(model, source, cfg, adam, state), NonFiniteLoss);
}

TEST_CASE("log lines are byte-stable") {
  EpochMetrics m;
  m.mean_basic = 0.25;
  m.mean_ce = 1.5;
  m.mean_cl = 3.0625;
  m.mean_total = 2.056250;
  CHECK(format_train_log_line(3, 42, 2.5e-5, m, 0.5) ==
        "3,42,2.50000000e-05,0.250000,1.500000,3.062500,2.056250,0.500000");
  CHECK(format_train_log_line(1, 7, 1.0, m, std::numeric_limits<double>::quiet_NaN()) ==
        "1,7,1.00000000e+00,0.250000,1.500000,3.062500,2.056250,-");
  CHECK(std::string(kTrainLogHeader) == "epoch,step,lr,L_basic,L_ce,L_CL,total,val_macro_f1");
}

TEST_CASE("checkpoints restore the exact model, trainer state, and optimizer moments") {
  const auto fixture = make_cluster_features(8, 8, 0.2, 2.0, 9);
  FeatureBatchSource source(fixture.features, fixture.basic_targets, fixture.compound_targets);
  FusionModel model(feature_model_config(8), 3);
  TrainConfig cfg = fast_train_config(2, 3);
  AdamState adam;
  adam.init(model.params().size());
  TrainState state;
  state.rng_seed = cfg.seed;
  train_epoch(model, source, cfg, adam, state);
  train_epoch(model, source, cfg, adam, state);
  state.best_val_f1 = 0.1 + 0.2; // deliberately not representable exactly
  state.best_epoch = 2;

  TempDir dir("ckpt");
  const auto path = dir / "model.cerc";
  save_checkpoint(model, state, &adam, path);

  const Checkpoint ck = load_checkpoint(path);
  const FusionModel restored = model_from_checkpoint(ck);
  CHECK(restored.params() == model.params());
  CHECK(restored.config().encoder_dims == model.config().encoder_dims);
  CHECK(restored.config().hidden_dims == model.config().hidden_dims);

  Rng probe_rng(99);
  const MatD probe = random_matrix(probe_rng, 3, 8);
  const ModelOutput a = model.forward(probe);
  const ModelOutput b = restored.forward(probe);
  CHECK((a.combined_probs - b.combined_probs).cwiseAbs().maxCoeff() <= 1e-9);

  const TrainState rs = state_from_checkpoint(ck);
  CHECK(rs.step == state.step);
  CHECK(rs.epoch == 2);
  CHECK(rs.best_val_f1 == state.best_val_f1); // %.17g round-trips doubles exactly
  CHECK(rs.best_epoch == 2);
  CHECK(rs.rng_seed == cfg.seed);

  REQUIRE(ck.has_adam);
  CHECK(ck.adam.t == adam.t);
  CHECK(ck.adam.m == adam.m);
  CHECK(ck.adam.v == adam.v);
  CHECK(encoders_from_checkpoint(ck) == cfg.encoders);
}

TEST_CASE("corrupt checkpoints are rejected") {
  TempDir dir("ckpt_bad");
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.cerc"), CheckpointFormatError);

  FusionModel model(feature_model_config(4, 5), 4);
  const auto path = dir / "model.cerc";
  save_checkpoint(model, TrainState{}, nullptr, path);
  std::string bytes = slurp(path);

  spit(path, bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointFormatError);
  spit(path, bytes + "junk");
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointFormatError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'Z';
  spit(path, bad_magic);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointFormatError);
}

TEST_CASE("resuming from a checkpoint reproduces an uninterrupted run bit for bit") {
  const auto fixture = make_cluster_features(12, 8, 0.2, 2.5, 10);
  const EvalData val{fixture.features, fixture.compound_targets};
  FusionConfig mc = feature_model_config(8);
  mc.dropout = 0.1;
  TrainConfig cfg = fast_train_config(4, 31);
  cfg.checkpoint_every = 1;

  TempDir straight_dir("straight"), half_dir("half"), resumed_dir("resumed");

  // one uninterrupted 4-epoch run
  FeatureBatchSource source_a(fixture.features, fixture.basic_targets,
                              fixture.compound_targets);
  FusionModel straight(mc, mix_seed(cfg.seed, kModelInitStream));
  std::ostringstream log_straight;
  run_training(straight, source_a, &val, cfg, straight_dir.path(), &log_straight);

  // the same run interrupted after two epochs
  FeatureBatchSource source_b(fixture.features, fixture.basic_targets,
                              fixture.compound_targets);
  FusionModel half(mc, mix_seed(cfg.seed, kModelInitStream));
  TrainConfig two = cfg;
  two.epochs = 2;
  std::ostringstream log_half;
  const TrainResult mid = run_training(half, source_b, &val, two, half_dir.path(), &log_half);
  REQUIRE(!mid.last_checkpoint.empty());

  const Checkpoint ck = load_checkpoint(mid.last_checkpoint);
  FusionModel resumed = model_from_checkpoint(ck);
  FeatureBatchSource source_c(fixture.features, fixture.basic_targets,
                              fixture.compound_targets);
  std::ostringstream log_resumed;
  run_training(resumed, source_c, &val, cfg, resumed_dir.path(), &log_resumed,
               state_from_checkpoint(ck), ck.adam);

  CHECK(resumed.params() == straight.params());
  CHECK(log_half.str() + log_resumed.str() == log_straight.str());
}

TEST_CASE("the best checkpoint tracks the maximum validation score") {
  const auto fixture = make_cluster_features(10, 8, 0.6, 1.5, 12);
  const EvalData val{fixture.features, fixture.compound_targets};
  FeatureBatchSource source(fixture.features, fixture.basic_targets, fixture.compound_targets);
  FusionModel model(feature_model_config(8), mix_seed(41, kModelInitStream));
  TrainConfig cfg = fast_train_config(6, 41);

  TempDir dir("best");
  std::ostringstream log;
  const TrainResult result = run_training(model, source, &val, cfg, dir.path(), &log);
  REQUIRE(!result.best_checkpoint.empty());

  // replay the log: the stored best must equal the max val column
  std::istringstream lines(log.str());
  std::string line;
  double best = -1.0;
  int best_epoch = -1;
  int epoch = 0;
  while (std::getline(lines, line)) {
    ++epoch;
    const auto pos = line.rfind(',');
    const double v = std::stod(line.substr(pos + 1));
    if (v > best) {
      best = v;
      best_epoch = epoch;
    }
  }
  CHECK(result.state.best_val_f1 == doctest::Approx(best).epsilon(1e-6));
  CHECK(result.state.best_epoch == best_epoch);

  const TrainState stored = state_from_checkpoint(load_checkpoint(result.best_checkpoint));
  CHECK(stored.best_epoch == best_epoch);
  CHECK(stored.epoch == best_epoch);

  // validation score of the best model reproduces the stored figure
  const FusionModel best_model = model_from_checkpoint(load_checkpoint(result.best_checkpoint));
  CHECK(validation_macro_f1(best_model, val, cfg.batch_size) ==
        doctest::Approx(stored.best_val_f1).epsilon(1e-9));
}
