#include "cer/commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "cer/augment.hpp"
#include "cer/checkpoint.hpp"
#include "cer/encoder.hpp"
#include "cer/ensemble.hpp"
#include "cer/errors.hpp"
#include "cer/feature_cache.hpp"
#include "cer/fusion.hpp"
#include "cer/image.hpp"
#include "cer/manifest.hpp"
#include "cer/metrics.hpp"
#include "cer/predictions.hpp"
#include "cer/trainer.hpp"

namespace cer {

namespace {

int classify(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const AllZeroWeights*>(&e))
    return kExitUsage;
  if (dynamic_cast<const NonFiniteLoss*>(&e) || dynamic_cast<const InvalidDistribution*>(&e))
    return kExitNumeric;
  return kExitData;
}

template <typename Fn>
int run_guarded(std::ostream& err, Fn&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return classify(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

std::filesystem::path resolve_image_path(const std::filesystem::path& manifest_path,
                                         const std::string& image_path) {
  const std::filesystem::path p(image_path);
  return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

std::vector<std::unique_ptr<Encoder>> build_encoders(const std::vector<std::string>& instances) {
  const EncoderRegistry registry = EncoderRegistry::with_builtins();
  std::vector<std::unique_ptr<Encoder>> encoders;
  encoders.reserve(instances.size());
  for (const auto& instance : instances) encoders.push_back(registry.build(instance));
  return encoders;
}

// Deterministic resize+normalize views at each encoder's input resolution,
// concatenated in encoder order. Chunked so large frame sets stay bounded.
MatD eval_features(const std::vector<Image>& images,
                   const std::vector<std::unique_ptr<Encoder>>& encoders) {
  int fused_dim = 0;
  for (const auto& e : encoders) fused_dim += e->spec().output_dim;
  MatD out(static_cast<Eigen::Index>(images.size()), fused_dim);

  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const std::size_t take = std::min(kChunk, images.size() - start);
    std::vector<FeatureBatch> parts;
    parts.reserve(encoders.size());
    for (const auto& e : encoders) {
      const int res = e->spec().input_resolution;
      const AugmentationConfig cfg = AugmentationConfig::training_default(res);
      std::vector<Image> views;
      views.reserve(take);
      for (std::size_t i = 0; i < take; ++i) views.push_back(eval_view(images[start + i], cfg));
      parts.push_back(e->encode(ImageBatch::from_images(views, res)));
    }
    const FeatureBatch fused = concat_features(parts);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(take)) =
        fused.values.cast<double>();
  }
  return out;
}

// Encodes already-augmented (normalized) view images.
MatD encode_prepared(const std::vector<Image>& prepared,
                     const std::vector<std::unique_ptr<Encoder>>& encoders) {
  std::vector<FeatureBatch> parts;
  parts.reserve(encoders.size());
  for (const auto& e : encoders)
    parts.push_back(e->encode(ImageBatch::from_images(prepared, e->spec().input_resolution)));
  return concat_features(parts).values.cast<double>();
}

// Image-backed training stream: fixed eval-view features for the supervised
// path, freshly augmented contrastive view pairs every epoch.
class ImageFeatureSource final : public BatchSource {
public:
  ImageFeatureSource(std::vector<Image> images, std::vector<int> basic_targets,
                     std::vector<int> compound_targets,
                     const std::vector<std::unique_ptr<Encoder>>* encoders, bool contrastive)
      : images_(std::move(images)), basic_(std::move(basic_targets)),
        compound_(std::move(compound_targets)), encoders_(encoders), contrastive_(contrastive) {
    orig_ = eval_features(images_, *encoders_);
    int aug_res = 1;
    for (const auto& e : *encoders_) aug_res = std::max(aug_res, e->spec().input_resolution);
    aug_cfg_ = AugmentationConfig::training_default(aug_res);
    order_.resize(images_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::int64_t>(i);
  }

  std::int64_t size() const override { return static_cast<std::int64_t>(images_.size()); }

  void start_epoch(std::uint64_t seed, int epoch) override {
    seed_ = seed;
    epoch_ = epoch;
    // identity first: the schedule must be a pure function of (seed, epoch)
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::int64_t>(i);
    Rng rng(mix_seed(seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order_);
    cursor_ = 0;
  }

  bool next(int batch_size, TrainBatch& out) override {
    const std::int64_t n = size();
    if (cursor_ >= n) return false;
    const std::int64_t take = std::min<std::int64_t>(batch_size, n - cursor_);

    out.orig.resize(take, orig_.cols());
    out.basic_targets.resize(static_cast<std::size_t>(take));
    out.compound_targets.resize(static_cast<std::size_t>(take));
    std::vector<Image> v1, v2;
    if (contrastive_) {
      v1.reserve(static_cast<std::size_t>(take));
      v2.reserve(static_cast<std::size_t>(take));
    }
    for (std::int64_t k = 0; k < take; ++k) {
      const std::int64_t src = order_[static_cast<std::size_t>(cursor_ + k)];
      out.orig.row(k) = orig_.row(src);
      out.basic_targets[static_cast<std::size_t>(k)] = basic_[static_cast<std::size_t>(src)];
      out.compound_targets[static_cast<std::size_t>(k)] = compound_[static_cast<std::size_t>(src)];
      if (contrastive_) {
        const std::uint64_t view_seed =
            mix_seed(mix_seed(seed_, kAugmentStream, static_cast<std::uint64_t>(epoch_)),
                     static_cast<std::uint64_t>(src));
        auto views = augment_pair(images_[static_cast<std::size_t>(src)], aug_cfg_, view_seed);
        v1.push_back(std::move(views.first));
        v2.push_back(std::move(views.second));
      }
    }
    if (contrastive_ && take >= 2) {
      out.view1 = encode_prepared(v1, *encoders_);
      out.view2 = encode_prepared(v2, *encoders_);
    } else {
      out.view1.resize(0, 0);
      out.view2.resize(0, 0);
    }
    cursor_ += take;
    return true;
  }

private:
  std::vector<Image> images_;
  std::vector<int> basic_, compound_;
  const std::vector<std::unique_ptr<Encoder>>* encoders_;
  bool contrastive_;
  MatD orig_;
  AugmentationConfig aug_cfg_;
  std::vector<std::int64_t> order_;
  std::int64_t cursor_ = 0;
  std::uint64_t seed_ = 0;
  int epoch_ = 0;
};

void targets_of(const ManifestRecord& rec, int& basic_t, int& compound_t) {
  basic_t = -1;
  compound_t = -1;
  if (!rec.label) return;
  if (rec.label->kind == LabelKind::Basic) {
    basic_t = rec.label->id;
  } else {
    compound_t = rec.label->id;
    basic_t = static_cast<int>(constituents(static_cast<Compound>(rec.label->id)).first);
  }
}

bool split_selected(Split s, const std::string& wanted) {
  if (wanted == "all") return true;
  return s == split_from_string(wanted);
}

MatD forward_probs(const FusionModel& model, const MatD& features) {
  MatD probs(features.rows(), kNumCompound);
  constexpr Eigen::Index kChunk = 256;
  for (Eigen::Index start = 0; start < features.rows(); start += kChunk) {
    const Eigen::Index take = std::min<Eigen::Index>(kChunk, features.rows() - start);
    probs.middleRows(start, take) =
        model.forward(MatD(features.middleRows(start, take))).combined_probs;
  }
  return probs;
}

struct EvalSet {
  std::vector<Image> images;
  std::vector<int> truth;
};

EvalSet load_eval_set(const std::filesystem::path& manifest_path, const std::string& split) {
  const auto records = load_manifest(manifest_path.string(), SchemaMap::canonical());
  EvalSet set;
  for (const auto& rec : records) {
    if (!split_selected(rec.split, split)) continue;
    if (!rec.label || rec.label->kind != LabelKind::Compound) continue;
    set.images.push_back(decode_image(resolve_image_path(manifest_path, rec.image_path).string()));
    set.truth.push_back(rec.label->id);
  }
  if (set.images.empty())
    throw ManifestParseError("no compound-labeled records in split '" + split + "' of " +
                             manifest_path.string());
  return set;
}

MatD checkpoint_probs(const std::filesystem::path& ck_path, const std::vector<Image>& images) {
  const Checkpoint ck = load_checkpoint(ck_path);
  const FusionModel model = model_from_checkpoint(ck);
  const auto encoders = build_encoders(encoders_from_checkpoint(ck));
  return forward_probs(model, eval_features(images, encoders));
}

} // namespace

int cmd_prepare_data(const PrepareDataArgs& args, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    if (args.manifests.empty()) throw ConfigError("prepare-data: at least one manifest required");
    if (!args.schemas.empty() && args.schemas.size() != 1 &&
        args.schemas.size() != args.manifests.size())
      throw ConfigError("prepare-data: give zero schemas, one shared schema, or one per manifest");

    const auto out_dir = args.out_path.parent_path().lexically_normal();
    std::vector<ManifestRecord> unified;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < args.manifests.size(); ++i) {
      SchemaMap schema = SchemaMap::canonical();
      if (!args.schemas.empty()) {
        const auto& schema_path = args.schemas.size() == 1 ? args.schemas[0] : args.schemas[i];
        schema = SchemaMap::load(schema_path.string(), schema_path.stem().string());
      }
      const auto in_dir = args.manifests[i].parent_path().lexically_normal();
      for (auto& rec : load_manifest(args.manifests[i].string(), schema)) {
        std::filesystem::path p(rec.image_path);
        if (!p.is_absolute())
          rec.image_path = (in_dir / p).lexically_normal().lexically_proximate(out_dir).generic_string();
        if (!seen.insert(rec.image_path).second)
          throw ManifestParseError("duplicate image path '" + rec.image_path + "'");
        unified.push_back(std::move(rec));
      }
    }

    if (args.val_fraction > 0.0) split_manifest(unified, args.val_fraction, args.seed);
    if (!args.out_path.parent_path().empty())
      std::filesystem::create_directories(args.out_path.parent_path());
    write_manifest(unified, args.out_path.string());

    std::map<Split, std::size_t> counts;
    for (const auto& rec : unified) counts[rec.split] += 1;
    out << "records " << unified.size() << '\n';
    for (const Split s : {Split::Train, Split::Val, Split::Test, Split::Unlabeled, Split::Unassigned})
      out << to_string(s) << ' ' << counts[s] << '\n';
  });
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    TrainConfig cfg = load_train_config(args.config_path);
    for (const auto& [key, value] : args.overrides) apply_config_override(cfg, key, value);
    cfg.validate();
    if (cfg.encoders.empty())
      throw ConfigError("train: config must list at least one encoder instance");

    const auto records = load_manifest(args.manifest_path.string(), SchemaMap::canonical());
    std::vector<Image> train_images, val_images;
    std::vector<int> train_basic, train_compound, val_truth;
    std::size_t skipped_unlabeled = 0;
    for (const auto& rec : records) {
      if (rec.split == Split::Train) {
        if (!rec.label) {
          ++skipped_unlabeled;
          continue;
        }
        int b, c;
        targets_of(rec, b, c);
        train_images.push_back(
            decode_image(resolve_image_path(args.manifest_path, rec.image_path).string()));
        train_basic.push_back(b);
        train_compound.push_back(c);
      } else if (rec.split == Split::Val && rec.label &&
                 rec.label->kind == LabelKind::Compound) {
        val_images.push_back(
            decode_image(resolve_image_path(args.manifest_path, rec.image_path).string()));
        val_truth.push_back(rec.label->id);
      }
    }
    if (train_images.empty())
      throw ManifestParseError("manifest has no labeled train-split records");
    if (skipped_unlabeled > 0)
      err << "warning: skipped " << skipped_unlabeled << " unlabeled train records\n";

    const auto encoders = build_encoders(cfg.encoders);
    FusionConfig fusion;
    for (const auto& e : encoders) {
      fusion.encoder_names.push_back(e->spec().name);
      fusion.encoder_dims.push_back(e->spec().output_dim);
    }
    fusion.hidden_dims = cfg.hidden_dims;
    fusion.combine_alpha = cfg.combine_alpha;

    ImageFeatureSource source(std::move(train_images), std::move(train_basic),
                              std::move(train_compound), &encoders,
                              cfg.loss_weights.lambda_cl != 0.0);

    EvalData val;
    const bool has_val = !val_images.empty();
    if (has_val) {
      val.features = eval_features(val_images, encoders);
      val.compound_targets = val_truth;
    }

    FusionModel model(fusion, mix_seed(cfg.seed, kModelInitStream));
    TrainState state;
    AdamState adam;
    if (args.resume) {
      const Checkpoint ck = load_checkpoint(*args.resume);
      model = model_from_checkpoint(ck);
      state = state_from_checkpoint(ck);
      if (ck.has_adam) adam = ck.adam;
    }

    std::ostringstream log;
    const TrainResult result = run_training(model, source, has_val ? &val : nullptr, cfg,
                                            args.out_dir, &log, state, adam);

    std::ofstream log_file(args.out_dir / "train_log.csv", std::ios::binary);
    if (!log_file) throw ConfigError("train: cannot write log under " + args.out_dir.string());
    log_file << kTrainLogHeader << '\n' << log.str();

    out << kTrainLogHeader << '\n' << log.str();
    char summary[128];
    if (result.state.best_epoch >= 0)
      std::snprintf(summary, sizeof summary, "best_val_macro_f1 %.6f (epoch %d)\n",
                    result.state.best_val_f1, result.state.best_epoch);
    else
      std::snprintf(summary, sizeof summary, "best_val_macro_f1 -\n");
    out << summary;
  });
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const Checkpoint ck = load_checkpoint(args.checkpoint);
    const FusionModel model = model_from_checkpoint(ck);
    const auto encoders = build_encoders(encoders_from_checkpoint(ck));

    const EvalSet set = load_eval_set(args.manifest_path, args.split);
    const MatD probs = forward_probs(model, eval_features(set.images, encoders));
    const auto preds = predict_labels(probs);
    const EvalReport report = EvalReport::from_confusion(confusion(set.truth, preds));

    out << render_report(report, args.checkpoint.stem().string());

    if (args.tsv_out) {
      std::ofstream tsv(*args.tsv_out, std::ios::binary);
      if (!tsv) throw ConfigError("eval: cannot write " + args.tsv_out->string());
      tsv << report_tsv(report);
    }
    if (args.probs_out) write_feature_cache(probs.cast<float>(), args.probs_out->string());
  });
}

int cmd_ensemble_eval(const EnsembleEvalArgs& args, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    if (args.members.empty()) throw ConfigError("ensemble-eval: at least one member required");
    const EvalSet set = load_eval_set(args.manifest_path, args.split);

    std::vector<MatD> member_probs;
    std::vector<std::string> names;
    for (const auto& member : args.members) {
      if (member.extension() == ".cerf") {
        const MatF cached = read_feature_cache(member.string());
        if (cached.cols() != kNumCompound ||
            cached.rows() != static_cast<Eigen::Index>(set.truth.size()))
          throw ShapeMismatch("ensemble-eval: " + member.string() + " is " +
                              std::to_string(cached.rows()) + "x" + std::to_string(cached.cols()) +
                              ", evaluation set needs " + std::to_string(set.truth.size()) + "x7");
        member_probs.push_back(cached.cast<double>());
      } else {
        member_probs.push_back(checkpoint_probs(member, set.images));
      }
      names.push_back(member.stem().string());
    }

    const MatD fused = fuse_probs(member_probs, args.weights);

    std::vector<EvalReport> reports;
    for (const auto& probs : member_probs)
      reports.push_back(EvalReport::from_confusion(confusion(set.truth, predict_labels(probs))));
    reports.push_back(EvalReport::from_confusion(confusion(set.truth, predict_labels(fused))));
    names.push_back("ensemble");

    out << render_report(reports, names);
  });
}

int cmd_predict(const PredictArgs& args, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const Checkpoint ck = load_checkpoint(args.checkpoint);
    const FusionModel model = model_from_checkpoint(ck);
    const auto encoders = build_encoders(encoders_from_checkpoint(ck));

    std::vector<std::string> item_ids;
    std::vector<std::filesystem::path> item_paths;
    for (const auto& input : args.inputs) {
      if (std::filesystem::is_directory(input)) {
        std::vector<std::filesystem::path> frames;
        for (const auto& entry : std::filesystem::directory_iterator(input)) {
          if (!entry.is_regular_file()) continue;
          const auto ext = entry.path().extension().string();
          if (ext == ".ppm" || ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp")
            frames.push_back(entry.path());
        }
        std::sort(frames.begin(), frames.end());
        for (auto& frame : frames) {
          item_ids.push_back(frame.generic_string());
          item_paths.push_back(std::move(frame));
        }
      } else if (input.extension() == ".tsv") {
        for (const auto& rec : load_manifest(input.string(), SchemaMap::canonical())) {
          item_ids.push_back(rec.image_path);
          item_paths.push_back(resolve_image_path(input, rec.image_path));
        }
      } else {
        item_ids.push_back(input.generic_string());
        item_paths.push_back(input);
      }
    }

    std::vector<PredictionRecord> records(item_ids.size());
    std::vector<Image> decoded;
    std::vector<std::size_t> decoded_at;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < item_paths.size(); ++i) {
      try {
        decoded.push_back(decode_image(item_paths[i].string()));
        decoded_at.push_back(i);
      } catch (const DecodeError& e) {
        err << "warning: " << e.what() << '\n';
        records[i] = error_prediction(item_ids[i]);
        ++failures;
      }
    }

    if (!decoded.empty()) {
      const MatD probs = forward_probs(model, eval_features(decoded, encoders));
      for (std::size_t k = 0; k < decoded_at.size(); ++k) {
        std::array<double, kNumCompound> row{};
        for (int j = 0; j < kNumCompound; ++j)
          row[static_cast<std::size_t>(j)] = probs(static_cast<Eigen::Index>(k), j);
        records[decoded_at[k]] = make_prediction(item_ids[decoded_at[k]], row);
      }
    }

    if (!args.out_path.parent_path().empty())
      std::filesystem::create_directories(args.out_path.parent_path());
    std::ofstream csv(args.out_path, std::ios::binary);
    if (!csv) throw ConfigError("predict: cannot write " + args.out_path.string());
    write_predictions(records, csv);

    out << "predictions " << records.size() << '\n' << "decode_errors " << failures << '\n';
  });
}

int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  return run_guarded(err, [&] {
    const auto manifest = write_synthetic_dataset(args.out_dir, args.params);
    out << "manifest " << manifest.generic_string() << '\n'
        << "train " << args.params.train_per_class * kNumCompound << '\n'
        << "val " << args.params.val_per_class * kNumCompound << '\n';
  });
}

} // namespace cer
