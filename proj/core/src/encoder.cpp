#include "cer/encoder.hpp"

#include <cmath>

#include "cer/errors.hpp"
#include "cer/rng.hpp"

namespace cer {

namespace {

MatF flatten_batch(const ImageBatch& batch) {
  const Eigen::Index dim = static_cast<Eigen::Index>(3) * batch.height * batch.width;
  return Eigen::Map<const MatF>(batch.data.data(), batch.batch, dim);
}

MatF seeded_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(rows));
  MatF m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = static_cast<float>(rng.uniform(-limit, limit));
  return m;
}

int parse_int_option(const EncoderRegistry::Options& opts, const std::string& key, int fallback) {
  const auto it = opts.find(key);
  if (it == opts.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ConfigError("encoder option " + key + "=" + it->second + " is not an integer");
  }
}

} // namespace

FeatureBatch Encoder::encode(const ImageBatch& batch) const {
  if (batch.batch < 1) throw ShapeMismatch("empty batch");
  if (batch.height != spec_.input_resolution || batch.width != spec_.input_resolution)
    throw ShapeMismatch("encoder '" + spec_.name + "' expects " +
                        std::to_string(spec_.input_resolution) + "x" +
                        std::to_string(spec_.input_resolution) + " input, got " +
                        std::to_string(batch.height) + "x" + std::to_string(batch.width));
  MatF values = encode_impl(batch);
  if (values.cols() != spec_.output_dim)
    throw DimensionMismatch("encoder '" + spec_.name + "' produced width " +
                            std::to_string(values.cols()) + ", spec declares " +
                            std::to_string(spec_.output_dim));
  return {std::move(values), spec_.name};
}

ToyMlpEncoder::ToyMlpEncoder(int output_dim, int hidden_dim, int resolution, std::uint64_t seed,
                             std::string instance_name)
    : Encoder({instance_name.empty() ? "toy-mlp" : std::move(instance_name), output_dim, "", false,
               resolution}) {
  const Eigen::Index in_dim = static_cast<Eigen::Index>(3) * resolution * resolution;
  Rng rng(seed);
  w1_ = seeded_uniform(in_dim, hidden_dim, rng);
  b1_ = MatF::Zero(1, hidden_dim);
  w2_ = seeded_uniform(hidden_dim, output_dim, rng);
  b2_ = MatF::Zero(1, output_dim);
}

ToyMlpEncoder::ToyMlpEncoder(MatF w1, MatF b1, MatF w2, MatF b2, int resolution,
                             std::string instance_name)
    : Encoder({instance_name.empty() ? "toy-mlp" : std::move(instance_name),
               static_cast<int>(w2.cols()), "", false, resolution}),
      w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)) {
  if (w1_.cols() != w2_.rows() || b1_.cols() != w1_.cols() || b2_.cols() != w2_.cols() ||
      w1_.rows() != static_cast<Eigen::Index>(3) * resolution * resolution)
    throw DimensionMismatch("toy-mlp weight shapes are inconsistent");
}

MatF ToyMlpEncoder::encode_impl(const ImageBatch& batch) const {
  const MatF x = flatten_batch(batch);
  MatF h = (x * w1_).rowwise() + b1_.row(0);
  h = h.array().tanh();
  MatF out = (h * w2_).rowwise() + b2_.row(0);
  return out;
}

MatF PendingWeightsEncoder::encode_impl(const ImageBatch&) const {
  throw WeightsNotLoaded("encoder '" + spec_.name +
                         "' has no usable weights; supply a backend via "
                         "EncoderRegistry::register_encoder or precompute a feature cache");
}

void EncoderRegistry::register_encoder(EncoderSpec spec, Builder builder) {
  if (entries_.count(spec.name))
    throw DuplicateEncoder("encoder already registered: " + spec.name);
  const std::string name = spec.name;
  entries_.emplace(name, Entry{std::move(spec), std::move(builder)});
}

bool EncoderRegistry::contains(const std::string& name) const { return entries_.count(name) > 0; }

const EncoderSpec& EncoderRegistry::spec(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("no such encoder: " + name);
  return it->second.spec;
}

std::vector<std::string> EncoderRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, entry] : entries_) out.push_back(name);
  return out;
}

std::pair<std::string, EncoderRegistry::Options> parse_encoder_instance(const std::string& s) {
  EncoderRegistry::Options opts;
  std::size_t pos = s.find(':');
  const std::string base = s.substr(0, pos);
  while (pos != std::string::npos) {
    const std::size_t next = s.find(':', pos + 1);
    const std::string token =
        s.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
    const std::size_t eq = token.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("bad encoder option '" + token + "' in '" + s + "' (expected key=value)");
    opts[token.substr(0, eq)] = token.substr(eq + 1);
    pos = next;
  }
  return {base, std::move(opts)};
}

std::unique_ptr<Encoder> EncoderRegistry::build(const std::string& instance) const {
  auto [base, opts] = parse_encoder_instance(instance);
  const auto it = entries_.find(base);
  if (it == entries_.end()) throw ConfigError("no such encoder: " + base);
  EncoderSpec spec = it->second.spec;
  spec.name = instance;
  return it->second.builder(spec, opts);
}

EncoderRegistry EncoderRegistry::with_builtins() {
  EncoderRegistry registry;

  auto pending = [](const EncoderSpec& spec, const Options& opts) -> std::unique_ptr<Encoder> {
    EncoderSpec s = spec;
    if (const auto it = opts.find("weights"); it != opts.end()) s.weights_source = it->second;
    return std::make_unique<PendingWeightsEncoder>(std::move(s));
  };

  registry.register_encoder({"posterv2", 768, "", false, 224}, pending);
  registry.register_encoder({"resnet50", 2048, "", false, 224}, pending);
  registry.register_encoder({"resnet18", 512, "", false, 224}, pending);
  registry.register_encoder(
      {"toy-mlp", 16, "", false, 224},
      [](const EncoderSpec& spec, const Options& opts) -> std::unique_ptr<Encoder> {
        const int dim = parse_int_option(opts, "d", spec.output_dim);
        const int hidden = parse_int_option(opts, "h", 32);
        const int res = parse_int_option(opts, "res", spec.input_resolution);
        const int seed = parse_int_option(opts, "seed", 1);
        return std::make_unique<ToyMlpEncoder>(dim, hidden, res,
                                               static_cast<std::uint64_t>(seed), spec.name);
      });
  return registry;
}

} // namespace cer
