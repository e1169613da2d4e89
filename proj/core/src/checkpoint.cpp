#include "cer/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "cer/errors.hpp"

namespace cer {

static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);

namespace {

std::string fmt_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

struct Reader {
  std::ifstream in;
  std::string where;

  void read(void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw CheckpointFormatError("truncated checkpoint (" + where + ")");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    read(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    read(&v, sizeof v);
    return v;
  }
  std::string str() {
    std::string s(u32(), '\0');
    read(s.data(), s.size());
    return s;
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

} // namespace

const std::string& Checkpoint::require(const std::string& key) const {
  const auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointFormatError("checkpoint missing meta key '" + key + "'");
  return it->second;
}

void save_checkpoint(const FusionModel& model, const TrainState& state, const AdamState* adam,
                     const std::filesystem::path& path,
                     const std::map<std::string, std::string>& extra_meta) {
  std::map<std::string, std::string> meta = extra_meta;
  const FusionConfig& cfg = model.config();
  std::string names, dims, hidden;
  for (std::size_t i = 0; i < cfg.encoder_names.size(); ++i) {
    if (i) names += ',', dims += ',';
    names += cfg.encoder_names[i];
    dims += std::to_string(cfg.encoder_dims[i]);
  }
  for (std::size_t i = 0; i < cfg.hidden_dims.size(); ++i) {
    if (i) hidden += ',';
    hidden += std::to_string(cfg.hidden_dims[i]);
  }
  meta["config.encoders"] = names;
  meta["config.encoder_dims"] = dims;
  meta["config.hidden_dims"] = hidden;
  meta["config.combine_alpha"] = fmt_real(cfg.combine_alpha);
  meta["config.dropout"] = fmt_real(cfg.dropout);
  meta["state.step"] = std::to_string(state.step);
  meta["state.epoch"] = std::to_string(state.epoch);
  meta["state.best_val_f1"] = fmt_real(state.best_val_f1);
  meta["state.best_epoch"] = std::to_string(state.best_epoch);
  meta["state.rng_seed"] = std::to_string(state.rng_seed);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointFormatError("cannot open checkpoint for writing: " + path.string());
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  for (const auto& [k, v] : meta) {
    put_str(out, k);
    put_str(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(model.tensors().size()));
  for (const auto& ref : model.tensors()) {
    put_str(out, ref.name);
    out.write(kTensorMagic, 4);
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(ref.rows));
    put_u32(out, static_cast<std::uint32_t>(ref.cols));
    out.write(reinterpret_cast<const char*>(model.params().data() + ref.offset),
              static_cast<std::streamsize>(sizeof(double) * ref.rows * ref.cols));
  }
  const char has_adam = adam && !adam->m.empty() ? 1 : 0;
  out.write(&has_adam, 1);
  if (has_adam) {
    put_u64(out, static_cast<std::uint64_t>(adam->t));
    put_u64(out, adam->m.size());
    out.write(reinterpret_cast<const char*>(adam->m.data()),
              static_cast<std::streamsize>(sizeof(double) * adam->m.size()));
    out.write(reinterpret_cast<const char*>(adam->v.data()),
              static_cast<std::streamsize>(sizeof(double) * adam->v.size()));
  }
  if (!out) throw CheckpointFormatError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r{std::ifstream(path, std::ios::binary), "header"};
  if (!r.in) throw CheckpointFormatError("cannot open checkpoint: " + path.string());

  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw CheckpointFormatError("bad checkpoint magic in " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointFormatError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  r.where = "meta";
  const std::uint32_t meta_count = r.u32();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string key = r.str();
    ck.meta[key] = r.str();
  }

  r.where = "tensors";
  const std::uint32_t tensor_count = r.u32();
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    std::string name = r.str();
    char tmagic[4];
    r.read(tmagic, 4);
    if (std::memcmp(tmagic, kTensorMagic, 4) != 0)
      throw CheckpointFormatError("bad tensor magic for '" + name + "'");
    if (r.u32() != 1) throw CheckpointFormatError("unsupported tensor version for '" + name + "'");
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    MatD m(rows, cols);
    r.read(m.data(), sizeof(double) * rows * cols);
    ck.tensors.emplace_back(std::move(name), std::move(m));
  }

  r.where = "optimizer";
  char has_adam;
  r.read(&has_adam, 1);
  if (has_adam == 1) {
    ck.has_adam = true;
    ck.adam.t = static_cast<std::int64_t>(r.u64());
    const std::uint64_t n = r.u64();
    ck.adam.m.resize(n);
    ck.adam.v.resize(n);
    r.read(ck.adam.m.data(), sizeof(double) * n);
    r.read(ck.adam.v.data(), sizeof(double) * n);
  } else if (has_adam != 0) {
    throw CheckpointFormatError("bad optimizer flag in " + path.string());
  }

  if (r.in.peek() != std::ifstream::traits_type::eof())
    throw CheckpointFormatError("trailing bytes after checkpoint payload in " + path.string());
  return ck;
}

FusionModel model_from_checkpoint(const Checkpoint& ck) {
  FusionConfig cfg;
  cfg.encoder_names = split_list(ck.require("config.encoders"));
  for (const auto& d : split_list(ck.require("config.encoder_dims")))
    cfg.encoder_dims.push_back(std::stoi(d));
  cfg.hidden_dims.clear();
  for (const auto& d : split_list(ck.require("config.hidden_dims")))
    cfg.hidden_dims.push_back(std::stoi(d));
  cfg.combine_alpha = std::stod(ck.require("config.combine_alpha"));
  cfg.dropout = std::stod(ck.require("config.dropout"));

  FusionModel model(cfg, 0);
  if (ck.tensors.size() != model.tensors().size())
    throw CheckpointFormatError("checkpoint tensor count does not match its config block");
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    const auto& [name, values] = ck.tensors[i];
    const auto& ref = model.tensors()[i];
    if (name != ref.name || values.rows() != ref.rows || values.cols() != ref.cols)
      throw CheckpointFormatError("checkpoint tensor '" + name +
                                  "' does not match the model layout");
    model.tensor(ref) = values;
  }
  return model;
}

TrainState state_from_checkpoint(const Checkpoint& ck) {
  TrainState s;
  s.step = std::stoll(ck.require("state.step"));
  s.epoch = std::stoi(ck.require("state.epoch"));
  s.best_val_f1 = std::stod(ck.require("state.best_val_f1"));
  s.best_epoch = std::stoi(ck.require("state.best_epoch"));
  s.rng_seed = std::stoull(ck.require("state.rng_seed"));
  return s;
}

std::vector<std::string> encoders_from_checkpoint(const Checkpoint& ck) {
  return split_list(ck.require("config.encoders"));
}

} // namespace cer
