#include "nf/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

#include "nf/bijector.hpp"
#include "nf/rng.hpp"

namespace nf {

namespace {

void checkImage(const GrayImage& img, const char* who) {
  if (img.width < 1 || img.height < 1) {
    throw ShapeError(std::string(who) + ": image extents must be positive");
  }
  if (static_cast<Index>(img.pixels.size()) != img.size()) {
    throw ShapeError(std::string(who) +
                     ": pixel count does not match extents");
  }
}

std::uint8_t clampPixel(long v) {
  return static_cast<std::uint8_t>(std::clamp<long>(v, 0, 255));
}

void setPixel(GrayImage& img, Index r, Index c) {
  if (r < 0 || c < 0 || r >= img.height || c >= img.width) return;
  img.at(r, c) = 255;
}

void drawLine(GrayImage& img, Index r0, Index c0, Index r1, Index c1) {
  const Index steps = std::max(std::abs(r1 - r0), std::abs(c1 - c0)) + 1;
  for (Index t = 0; t < steps; ++t) {
    const double f =
        steps == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
    setPixel(img, static_cast<Index>(std::llround(r0 + f * (r1 - r0))),
             static_cast<Index>(std::llround(c0 + f * (c1 - c0))));
  }
}

// Max-merges each row with its mirror so the result is exactly symmetric
// about the vertical center line.
void mirrorFold(GrayImage& img) {
  for (Index r = 0; r < img.height; ++r) {
    for (Index c = 0; c < img.width / 2; ++c) {
      const std::uint8_t v =
          std::max(img.at(r, c), img.at(r, img.width - 1 - c));
      img.at(r, c) = v;
      img.at(r, img.width - 1 - c) = v;
    }
  }
}

}  // namespace

GrayImage loadPgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("pgm: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  size_t pos = 0;
  auto skipSpace = [&] {
    while (pos < buf.size()) {
      if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
        ++pos;
      } else if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto readToken = [&]() -> std::string {
    skipSpace();
    const size_t start = pos;
    while (pos < buf.size() &&
           !std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    }
    return buf.substr(start, pos - start);
  };

  const std::string magic = readToken();
  if (magic != "P5") {
    throw DataError("pgm: unsupported format '" + magic + "' in " + path +
                    " (binary P5 only)");
  }
  auto readHeaderInt = [&](const char* what) -> long {
    const std::string tok = readToken();
    if (tok.empty()) throw DataError("pgm: truncated header in " + path);
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0' || v < 0) {
      throw DataError(std::string("pgm: bad ") + what + " in " + path);
    }
    return v;
  };
  const long w = readHeaderInt("width");
  const long h = readHeaderInt("height");
  const long maxval = readHeaderInt("maxval");
  if (w < 1 || h < 1) throw DataError("pgm: bad extents in " + path);
  if (maxval != 255) {
    throw DataError("pgm: unsupported maxval " + std::to_string(maxval) +
                    " in " + path + " (255 only)");
  }
  if (pos >= buf.size() ||
      !std::isspace(static_cast<unsigned char>(buf[pos]))) {
    throw DataError("pgm: missing pixel data separator in " + path);
  }
  ++pos;
  const size_t need = static_cast<size_t>(w) * static_cast<size_t>(h);
  if (buf.size() - pos < need) {
    throw DataError("pgm: truncated pixel data in " + path);
  }
  GrayImage img(static_cast<Index>(w), static_cast<Index>(h));
  std::memcpy(img.pixels.data(), buf.data() + pos, need);
  return img;
}

void savePgm(const GrayImage& img, const std::string& path) {
  checkImage(img, "pgm");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("pgm: cannot open " + path + " for writing");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw DataError("pgm: write to " + path + " failed");
}

GrayImage augmentNoise(const GrayImage& img, double sigma, std::uint64_t seed) {
  checkImage(img, "augment");
  if (!(sigma >= 0) || !std::isfinite(sigma)) {
    throw DomainError("augment: sigma must be non-negative and finite");
  }
  CounterRng rng(seed);
  GrayImage out = img;
  for (size_t i = 0; i < out.pixels.size(); ++i) {
    const double v =
        static_cast<double>(img.pixels[i]) + sigma * rng.nextNormal();
    out.pixels[i] = clampPixel(std::lround(v));
  }
  return out;
}

GrayImage resizeBilinear(const GrayImage& img, Index newW, Index newH) {
  checkImage(img, "resize");
  if (newW < 1 || newH < 1) {
    throw ShapeError("resize: target extents must be positive");
  }
  GrayImage out(newW, newH);
  const double sx = static_cast<double>(img.width) / static_cast<double>(newW);
  const double sy =
      static_cast<double>(img.height) / static_cast<double>(newH);
  for (Index r = 0; r < newH; ++r) {
    double srcY = (static_cast<double>(r) + 0.5) * sy - 0.5;
    srcY = std::clamp(srcY, 0.0, static_cast<double>(img.height - 1));
    const Index y0 = static_cast<Index>(srcY);
    const Index y1 = std::min(y0 + 1, img.height - 1);
    const double fy = srcY - static_cast<double>(y0);
    for (Index c = 0; c < newW; ++c) {
      double srcX = (static_cast<double>(c) + 0.5) * sx - 0.5;
      srcX = std::clamp(srcX, 0.0, static_cast<double>(img.width - 1));
      const Index x0 = static_cast<Index>(srcX);
      const Index x1 = std::min(x0 + 1, img.width - 1);
      const double fx = srcX - static_cast<double>(x0);
      const double top = (1.0 - fx) * img.at(y0, x0) + fx * img.at(y0, x1);
      const double bottom = (1.0 - fx) * img.at(y1, x0) + fx * img.at(y1, x1);
      const double v = (1.0 - fy) * top + fy * bottom;
      out.at(r, c) = clampPixel(std::lround(v));
    }
  }
  return out;
}

Tensor dequantizeBatch(const std::vector<GrayImage>& imgs,
                       std::uint64_t seed) {
  if (imgs.empty()) throw ShapeError("dequantize: no images");
  checkImage(imgs[0], "dequantize");
  const Index w = imgs[0].width;
  const Index h = imgs[0].height;
  const Index n = w * h;
  for (const GrayImage& img : imgs) {
    checkImage(img, "dequantize");
    if (img.width != w || img.height != h) {
      throw ShapeError("dequantize: images must share extents");
    }
  }
  CounterRng rng(seed);
  Tensor x = Tensor::zeros({static_cast<Index>(imgs.size()), n});
  for (size_t i = 0; i < imgs.size(); ++i) {
    for (Index j = 0; j < n; ++j) {
      x.at(static_cast<Index>(i), j) =
          (static_cast<double>(imgs[i].pixels[static_cast<size_t>(j)]) +
           rng.nextUniform()) /
          256.0;
    }
  }
  LogitSquash squash(n);
  return squash.forwardBatch(x).y;
}

Tensor dequantize(const GrayImage& img, std::uint64_t seed) {
  Tensor rows = dequantizeBatch({img}, seed);
  return Tensor::fromFlat({rows.cols()}, rows.data());
}

std::vector<GrayImage> quantizeBatch(const Tensor& y, Index width,
                                     Index height) {
  if (width < 1 || height < 1) {
    throw ShapeError("quantize: image extents must be positive");
  }
  const Index n = width * height;
  if (y.rank() != 2 || y.cols() != n) {
    throw ShapeError("quantize: expected rows x " + std::to_string(n) +
                     ", got " + shapeString(y));
  }
  LogitSquash squash(n);
  const Tensor x = squash.inverseBatch(y).y;
  std::vector<GrayImage> out;
  out.reserve(static_cast<size_t>(y.rows()));
  for (Index r = 0; r < y.rows(); ++r) {
    GrayImage img(width, height);
    for (Index j = 0; j < n; ++j) {
      img.pixels[static_cast<size_t>(j)] =
          clampPixel(static_cast<long>(std::floor(x.at(r, j) * 256.0)));
    }
    out.push_back(std::move(img));
  }
  return out;
}

GrayImage quantize(const Tensor& y, Index width, Index height) {
  if (y.rank() != 1) {
    throw ShapeError("quantize: expected a rank-1 tensor, got " +
                     shapeString(y));
  }
  return quantizeBatch(Tensor::fromFlat({1, y.size()}, y.data()), width,
                       height)[0];
}

std::vector<GrayImage> genGlyphDataset(Index count, Index size,
                                       std::uint64_t seed) {
  if (count < 1) throw DomainError("glyphs: count must be positive");
  if (size < 8 || size > 32) {
    throw DomainError("glyphs: size must lie in [8, 32]");
  }
  CounterRng rng(seed);
  std::vector<GrayImage> out;
  out.reserve(static_cast<size_t>(count));
  for (Index i = 0; i < count; ++i) {
    GrayImage img(size, size);
    const Index deck =
        size / 3 + static_cast<Index>(rng.nextBelow(
                       static_cast<std::uint64_t>(size / 3)));
    for (Index c = 0; c < size; ++c) setPixel(img, deck, c);
    const Index maxUp = std::max<Index>(1, deck - 1);

    switch (rng.nextBelow(4)) {
      case 0: {  // pier Vs from the deck down to the base
        const Index spread = 1 + static_cast<Index>(rng.nextBelow(2));
        const Index piers = 1 + static_cast<Index>(rng.nextBelow(2));
        for (Index k = 0; k < piers; ++k) {
          const Index c =
              1 + spread +
              static_cast<Index>(rng.nextBelow(static_cast<std::uint64_t>(
                  std::max<Index>(1, size / 2 - spread - 1))));
          drawLine(img, deck, c, size - 1, c - spread);
          drawLine(img, deck, c, size - 1, c + spread);
        }
        break;
      }
      case 1: {  // arc spanning the deck
        const Index h = 1 + static_cast<Index>(rng.nextBelow(
                                static_cast<std::uint64_t>(maxUp)));
        for (Index c = 0; c < size; ++c) {
          const double t =
              static_cast<double>(c) / static_cast<double>(size - 1);
          const Index r =
              deck - static_cast<Index>(std::llround(4.0 * h * t * (1.0 - t)));
          setPixel(img, r, c);
        }
        break;
      }
      case 2: {  // fan lines from a center tower to deck anchors
        const Index h = 1 + static_cast<Index>(rng.nextBelow(
                                static_cast<std::uint64_t>(maxUp)));
        const Index top = std::max<Index>(deck - h, 0);
        const Index mid = size / 2;
        const Index lines = 2 + static_cast<Index>(rng.nextBelow(2));
        for (Index k = 0; k < lines; ++k) {
          const Index anchor =
              1 + k * std::max<Index>(1, mid - 2) / lines;
          drawLine(img, top, mid, deck, anchor);
        }
        drawLine(img, top, mid, deck, mid);
        break;
      }
      default: {  // top chord with vertical hangers
        const Index h = 1 + static_cast<Index>(rng.nextBelow(
                                static_cast<std::uint64_t>(maxUp)));
        const Index chord = std::max<Index>(deck - h, 0);
        for (Index c = 0; c < size; ++c) setPixel(img, chord, c);
        const Index gap = 2 + static_cast<Index>(rng.nextBelow(2));
        for (Index c = 1; c < size; c += gap) drawLine(img, chord, c, deck, c);
        break;
      }
    }
    mirrorFold(img);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace nf
