#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cer/fusion.hpp"
#include "cer/trainer.hpp"

namespace cer {

// Checkpoint container, little-endian throughout:
//   "CERC"  u32 version=1
//   u32 meta_count, then per entry: u32 key_len, key, u32 val_len, val (UTF-8)
//   u32 tensor_count, then per tensor:
//     u32 name_len, name, "CERD", u32 version=1, u32 rows, u32 cols,
//     rows*cols float64, row-major
//   u8 has_adam; if 1: u64 t, u64 n, n float64 (m), n float64 (v)
inline constexpr char kCheckpointMagic[4] = {'C', 'E', 'R', 'C'};
inline constexpr char kTensorMagic[4] = {'C', 'E', 'R', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, MatD>> tensors;
  bool has_adam = false;
  AdamState adam;

  const std::string& require(const std::string& key) const;
};

void save_checkpoint(const FusionModel& model, const TrainState& state, const AdamState* adam,
                     const std::filesystem::path& path,
                     const std::map<std::string, std::string>& extra_meta = {});

/// Throws CheckpointFormatError on a missing file, bad magic/version, or a
/// truncated/overlong payload.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model from the stored config block and tensor list; tensor
/// names/shapes must match what the config implies.
FusionModel model_from_checkpoint(const Checkpoint& ck);
TrainState state_from_checkpoint(const Checkpoint& ck);
/// Encoder instance strings recorded at save time (config.encoders meta key).
std::vector<std::string> encoders_from_checkpoint(const Checkpoint& ck);

} // namespace cer
