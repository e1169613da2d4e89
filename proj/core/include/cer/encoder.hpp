#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cer/image.hpp"
#include "cer/matrix.hpp"

namespace cer {

struct EncoderSpec {
  std::string name;          ///< instance name, e.g. "toy-mlp:d=24:seed=101"
  int output_dim = 0;        ///< embedding width D
  std::string weights_source; ///< optional path/URI for injected weights
  bool trainable = false;
  int input_resolution = 224;
};

/// B x D embeddings tagged with the producing encoder's instance name.
struct FeatureBatch {
  MatF values;
  std::string encoder_name;
};

class Encoder {
public:
  explicit Encoder(EncoderSpec spec) : spec_(std::move(spec)) {}
  virtual ~Encoder() = default;

  const EncoderSpec& spec() const { return spec_; }

  /// Throws ShapeMismatch when the batch resolution differs from the spec and
  /// WeightsNotLoaded when the encoder has no usable weights.
  FeatureBatch encode(const ImageBatch& batch) const;

protected:
  virtual MatF encode_impl(const ImageBatch& batch) const = 0;
  EncoderSpec spec_;
};

/// Self-contained stand-in for the pretrained backbones: a seeded two-layer
/// dense map (tanh in between) over flattened pixels.
class ToyMlpEncoder final : public Encoder {
public:
  ToyMlpEncoder(int output_dim, int hidden_dim, int resolution, std::uint64_t seed,
                std::string instance_name = {});

  /// Explicit weights, mainly for tests. w1 is (3*res*res) x hidden,
  /// w2 is hidden x output_dim; biases are row vectors.
  ToyMlpEncoder(MatF w1, MatF b1, MatF w2, MatF b2, int resolution,
                std::string instance_name = {});

private:
  MatF encode_impl(const ImageBatch& batch) const override;
  MatF w1_, b1_, w2_, b2_;
};

/// Placeholder for backbones whose weights the user must plug in (PosterV2,
/// ResNet). Knows its declared dimension; encode always throws
/// WeightsNotLoaded until a real backend is registered in its place.
class PendingWeightsEncoder final : public Encoder {
public:
  using Encoder::Encoder;

private:
  MatF encode_impl(const ImageBatch& batch) const override;
};

/// Named encoder constructors with their declared specs. Built-ins:
/// "posterv2" (768-d), "resnet50" (2048-d), "resnet18" (512-d), all pending
/// user weights, and "toy-mlp" (configurable, self-contained).
class EncoderRegistry {
public:
  using Options = std::map<std::string, std::string>;
  using Builder =
      std::function<std::unique_ptr<Encoder>(const EncoderSpec&, const Options&)>;

  /// Throws DuplicateEncoder when the name is taken.
  void register_encoder(EncoderSpec spec, Builder builder);

  bool contains(const std::string& name) const;
  const EncoderSpec& spec(const std::string& name) const;
  std::vector<std::string> names() const;

  /// Builds from an instance string: `name[:key=value]*`, e.g.
  /// "toy-mlp:d=24:h=48:res=16:seed=101". The instance string becomes the
  /// encoder's spec().name.
  std::unique_ptr<Encoder> build(const std::string& instance) const;

  /// Registry with the built-in entries registered.
  static EncoderRegistry with_builtins();

private:
  struct Entry {
    EncoderSpec spec;
    Builder builder;
  };
  std::map<std::string, Entry> entries_;
};

/// Splits "name:k=v:k=v" into the base name and option map.
std::pair<std::string, EncoderRegistry::Options> parse_encoder_instance(const std::string& s);

} // namespace cer
