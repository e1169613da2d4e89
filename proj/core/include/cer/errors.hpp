#pragma once

#include <stdexcept>
#include <string>

namespace cer {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class UnknownLabel : public Error { public: using Error::Error; };
class InvalidDistribution : public Error { public: using Error::Error; };
class LabelOutOfRange : public Error { public: using Error::Error; };
class LengthMismatch : public Error { public: using Error::Error; };

class ManifestParseError : public Error { public: using Error::Error; };
class UnknownSourceId : public Error { public: using Error::Error; };
class DecodeError : public Error { public: using Error::Error; };

class DuplicateEncoder : public Error { public: using Error::Error; };
class WeightsNotLoaded : public Error { public: using Error::Error; };
class ShapeMismatch : public Error { public: using Error::Error; };
class CacheFormatError : public Error { public: using Error::Error; };

class BatchSizeMismatch : public Error { public: using Error::Error; };
class EncoderOrderMismatch : public Error { public: using Error::Error; };
class DimensionMismatch : public Error { public: using Error::Error; };
class BatchTooSmall : public Error { public: using Error::Error; };

class CheckpointFormatError : public Error { public: using Error::Error; };
class NonFiniteLoss : public Error { public: using Error::Error; };
class AllZeroWeights : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };

} // namespace cer
