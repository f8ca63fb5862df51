#pragma once

#include <cstdint>
#include <string>

#include "nf/bijector.hpp"
#include "nf/tensor.hpp"

namespace nf {

/// Rows of points sharing one dimensionality, all finite, plus a free-text
/// note about where they came from.
struct Dataset {
  Index dim = 0;
  Tensor points;  // rows x dim
  std::string source;
};

/// The synthetic 2-d benchmark map in normalizing orientation: forward
/// sends data to latent space (un-shear, un-rotate, un-stretch), so
/// inverseBatch on normal draws generates the crescent-shaped cloud.
/// Stages, in generation order: stretch by diag(10, 1), rotate by 75
/// degrees, then the nonlinear shear y1 = x1 * (1 + x2 / 40).
Chain crescentChain();

/// count seeded N(0, I) draws pushed through crescentChain's generation
/// direction. Bit-identical for identical (count, seed).
Dataset genCrescentDataset(Index count, std::uint64_t seed);

/// CSV with header "x1,...,xd" and 17-significant-digit values, so a
/// write/load round trip reproduces every double exactly. Parse errors cite
/// the 1-based line number.
Dataset loadCsv(const std::string& path);
void writeCsv(const Dataset& ds, const std::string& path);

}  // namespace nf
