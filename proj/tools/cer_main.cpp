// Command-line front end: thin argument parsing over cer::cmd_*.
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "cer/commands.hpp"

namespace {

std::optional<std::string> env_seed() {
  const char* v = std::getenv("CER_SEED");
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

// True when the training config file itself sets `seed`.
bool config_sets_seed(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto eq = line.find('=', start);
    if (eq == std::string::npos) continue;
    auto key = line.substr(start, eq - start);
    const auto end = key.find_last_not_of(" \t");
    key = key.substr(0, end == std::string::npos ? 0 : end + 1);
    if (key == "seed") return true;
  }
  return false;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"compound facial expression recognition toolkit"};
  app.require_subcommand(1);

  cer::PrepareDataArgs prep;
  std::string prep_seed;
  auto* prepare = app.add_subcommand("prepare-data", "merge manifests into one unified file");
  prepare->add_option("--manifest", prep.manifests, "input manifest (repeatable)")->required();
  prepare->add_option("--schema", prep.schemas,
                      "label schema file: none, one shared, or one per manifest");
  prepare->add_option("--out", prep.out_path, "unified manifest path")->required();
  prepare->add_option("--val-fraction", prep.val_fraction,
                      "fraction of unassigned records sent to the val split");
  prepare->add_option("--seed", prep_seed, "split shuffle seed");

  cer::TrainArgs train;
  // flag values arrive as strings so the config parser validates them uniformly
  std::vector<std::pair<std::string, std::string>> train_flags;
  auto* train_cmd = app.add_subcommand("train", "run the optimization loop");
  train_cmd->add_option("--config", train.config_path, "key = value training config")->required();
  train_cmd->add_option("--manifest", train.manifest_path, "unified manifest")->required();
  train_cmd->add_option("--out", train.out_dir, "output directory (checkpoints, log)")->required();
  std::filesystem::path resume_path;
  auto* resume_opt = train_cmd->add_option("--resume", resume_path, "checkpoint to continue from");
  for (const char* key : {"epochs", "batch_size", "peak_lr", "warmup_steps", "seed",
                          "lambda_basic", "lambda_cl", "temperature", "combine_alpha", "encoders",
                          "hidden_dims", "schedule"}) {
    std::string flag = "--";
    for (const char* p = key; *p; ++p) flag += *p == '_' ? '-' : *p;
    train_cmd
        ->add_option_function<std::string>(
            flag,
            [&train_flags, key](const std::string& value) { train_flags.emplace_back(key, value); },
            std::string("override config key ") + key)
        ->type_name("TEXT");
  }

  cer::EvalArgs eval;
  std::filesystem::path eval_tsv, eval_probs;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a manifest split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "trained .cerc checkpoint")->required();
  eval_cmd->add_option("--manifest", eval.manifest_path, "unified manifest")->required();
  eval_cmd->add_option("--split", eval.split, "train|val|test|all (default val)");
  auto* tsv_opt = eval_cmd->add_option("--tsv", eval_tsv, "also write the machine-readable report");
  auto* probs_opt =
      eval_cmd->add_option("--probs-out", eval_probs, "dump per-sample probabilities (CERF, D=7)");

  cer::EnsembleEvalArgs ens;
  auto* ens_cmd = app.add_subcommand("ensemble-eval", "late-fusion comparison of several members");
  ens_cmd->add_option("--member", ens.members, ".cerc checkpoint or .cerf probability dump")
      ->required();
  ens_cmd->add_option("--weight", ens.weights, "member weight (repeatable, default uniform)");
  ens_cmd->add_option("--manifest", ens.manifest_path, "unified manifest")->required();
  ens_cmd->add_option("--split", ens.split, "train|val|test|all (default val)");

  cer::PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "zero-shot per-frame prediction file");
  pred_cmd->add_option("--checkpoint", pred.checkpoint, "trained .cerc checkpoint")->required();
  pred_cmd->add_option("--input", pred.inputs, "frame directory, image file, or manifest")
      ->required();
  pred_cmd->add_option("--out", pred.out_path, "prediction csv path")->required();

  cer::SynthArgs synth;
  std::string synth_seed;
  auto* synth_cmd = app.add_subcommand("synth", "write the synthetic toy dataset");
  synth_cmd->add_option("--out", synth.out_dir, "dataset directory")->required();
  synth_cmd->add_option("--train-per-class", synth.params.train_per_class, "train frames per class");
  synth_cmd->add_option("--val-per-class", synth.params.val_per_class, "val frames per class");
  synth_cmd->add_option("--resolution", synth.params.resolution, "frame edge length");
  synth_cmd->add_option("--noise", synth.params.noise, "pixel noise stdev");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cer::kExitUsage;
  }

  const auto fallback = env_seed();
  try {
    if (prepare->parsed()) {
      const std::string seed = !prep_seed.empty() ? prep_seed : fallback.value_or("0");
      prep.seed = std::stoull(seed);
      return cer::cmd_prepare_data(prep, std::cout, std::cerr);
    }
    if (train_cmd->parsed()) {
      if (*resume_opt) train.resume = resume_path;
      train.overrides = train_flags;
      const bool seed_given = std::any_of(train_flags.begin(), train_flags.end(),
                                          [](const auto& kv) { return kv.first == "seed"; });
      if (!seed_given && fallback && !config_sets_seed(train.config_path.string()))
        train.overrides.emplace_back("seed", *fallback);
      return cer::cmd_train(train, std::cout, std::cerr);
    }
    if (eval_cmd->parsed()) {
      if (*tsv_opt) eval.tsv_out = eval_tsv;
      if (*probs_opt) eval.probs_out = eval_probs;
      return cer::cmd_eval(eval, std::cout, std::cerr);
    }
    if (ens_cmd->parsed()) return cer::cmd_ensemble_eval(ens, std::cout, std::cerr);
    if (pred_cmd->parsed()) return cer::cmd_predict(pred, std::cout, std::cerr);
    if (synth_cmd->parsed()) {
      const std::string seed = !synth_seed.empty() ? synth_seed : fallback.value_or("7");
      synth.params.seed = std::stoull(seed);
      return cer::cmd_synth(synth, std::cout, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cer::kExitUsage;
  }
  return cer::kExitUsage;
}
