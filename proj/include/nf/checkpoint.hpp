#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nf/bijector.hpp"
#include "nf/tensor.hpp"

namespace nf {

inline constexpr int kCheckpointFormatVersion = 1;

/// Pixel grid recorded for image models so samples can be written back out
/// as images. Zero extents mean the model is tabular.
struct ImageShape {
  Index width = 0;
  Index height = 0;
  bool valid() const { return width > 0 && height > 0; }
};

/// Full training state: model topology with parameters inline, optimizer
/// moments keyed by canonical parameter name, the step counter, and the
/// batch-stream RNG position. A run resumed from a checkpoint continues
/// bit-identically to an uninterrupted one (same config and data assumed).
struct Checkpoint {
  int formatVersion = kCheckpointFormatVersion;
  Index step = 0;
  Index dim = 0;
  ImageShape image;
  nlohmann::ordered_json topology;
  std::vector<std::pair<std::string, Tensor>> adamM;
  std::vector<std::pair<std::string, Tensor>> adamV;
  std::uint64_t rngSeed = 0;
  std::uint64_t rngCounter = 0;

  nlohmann::ordered_json toJson() const;
  static Checkpoint fromJson(const nlohmann::ordered_json& j);

  /// Writes as indented JSON. Loading a file and saving it again is
  /// byte-identical.
  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  /// Rebuilds the serialized chain, parameters included.
  Chain instantiateChain() const;
};

}  // namespace nf
