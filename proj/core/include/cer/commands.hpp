#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cer/synthetic.hpp"

namespace cer {

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

struct PrepareDataArgs {
  std::vector<std::filesystem::path> manifests;
  /// Zero entries = canonical ids everywhere; one = shared; else one per manifest.
  std::vector<std::filesystem::path> schemas;
  std::filesystem::path out_path;
  double val_fraction = 0.0;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::filesystem::path config_path;
  std::filesystem::path manifest_path;
  std::filesystem::path out_dir;
  std::vector<std::pair<std::string, std::string>> overrides; ///< flag-level key=value
  std::optional<std::filesystem::path> resume;
};

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest_path;
  std::string split = "val"; ///< train|val|test|all
  std::optional<std::filesystem::path> tsv_out;
  std::optional<std::filesystem::path> probs_out; ///< CERF dump (D=7) for ensembling
};

struct EnsembleEvalArgs {
  std::vector<std::filesystem::path> members; ///< .cerc checkpoints or .cerf prob dumps
  std::vector<double> weights;                ///< empty = uniform
  std::filesystem::path manifest_path;
  std::string split = "val";
};

struct PredictArgs {
  std::filesystem::path checkpoint;
  std::vector<std::filesystem::path> inputs; ///< frame dirs, image files, or manifests
  std::filesystem::path out_path;
};

struct SynthArgs {
  std::filesystem::path out_dir;
  SyntheticDatasetParams params;
};

// Each command writes human output to `out`, diagnostics to `err`, and
// returns one of the kExit* codes. The CLI binary is a thin wrapper; tests
// drive these directly for in-process determinism checks.
int cmd_prepare_data(const PrepareDataArgs& args, std::ostream& out, std::ostream& err);
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_ensemble_eval(const EnsembleEvalArgs& args, std::ostream& out, std::ostream& err);
int cmd_predict(const PredictArgs& args, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthArgs& args, std::ostream& out, std::ostream& err);

} // namespace cer
