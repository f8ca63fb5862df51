#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nf/tensor.hpp"

namespace nf {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  Index width = 0;
  Index height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(Index w, Index h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<size_t>(w * h), fill) {}

  Index size() const { return width * height; }
  std::uint8_t at(Index r, Index c) const {
    return pixels[static_cast<size_t>(r * width + c)];
  }
  std::uint8_t& at(Index r, Index c) {
    return pixels[static_cast<size_t>(r * width + c)];
  }
  bool operator==(const GrayImage& o) const {
    return width == o.width && height == o.height && pixels == o.pixels;
  }
};

/// Binary P5 portable graymap, maxval 255 only. save writes one '\n' after
/// each header token; load also accepts other whitespace and '#' comments.
GrayImage loadPgm(const std::string& path);
void savePgm(const GrayImage& img, const std::string& path);

/// Adds seeded N(0, sigma^2) to every pixel, rounds to nearest, clamps to
/// [0, 255].
GrayImage augmentNoise(const GrayImage& img, double sigma, std::uint64_t seed);

/// Bilinear resample with half-pixel-centered sampling, rounded and
/// clamped. Resizing to the same extents is the identity.
GrayImage resizeBilinear(const GrayImage& img, Index newW, Index newH);

/// Pixels to continuous values: x = (pixel + u) / 256 with seeded
/// u ~ U[0, 1), then the logit squash with eps 0.05 (the same bijector the
/// image flow stacks first, so its log-det enters the model density).
/// Returns one squashed vector of length width * height.
Tensor dequantize(const GrayImage& img, std::uint64_t seed);

/// Batch variant: one row per image, noise drawn image-major from a single
/// stream. All images must share extents.
Tensor dequantizeBatch(const std::vector<GrayImage>& imgs, std::uint64_t seed);

/// Inverse of dequantize: un-squash, scale by 256, floor, clamp. Recovers
/// the exact source pixels for any dequantization seed.
GrayImage quantize(const Tensor& y, Index width, Index height);

/// Batch variant of quantize; one image per row.
std::vector<GrayImage> quantizeBatch(const Tensor& y, Index width,
                                     Index height);

/// Procedural horizontally-symmetric line compositions: a deck line plus
/// one of four families (pier Vs, arc, fan lines, vertical hangers).
/// Deterministic per seed; size must lie in [8, 32].
std::vector<GrayImage> genGlyphDataset(Index count, Index size,
                                       std::uint64_t seed);

}  // namespace nf
