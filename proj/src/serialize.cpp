#include "nf/serialize.hpp"

#include <cstring>

#include "nf/common.hpp"

namespace nf {
namespace {

const char* kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decodeChar(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

}  // namespace

std::string base64Encode(const std::uint8_t* data, size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= len; i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  const size_t rem = len - i;
  if (rem == 1) {
    const std::uint32_t v = data[i] << 16;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back('=');
    out.push_back('=');
  } else if (rem == 2) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::vector<std::uint8_t> base64Decode(const std::string& text) {
  if (text.size() % 4 != 0) throw DataError("base64: length not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) throw DataError("base64: bad padding");
        vals[k] = 0;
        ++pad;
      } else {
        if (pad > 0) throw DataError("base64: data after padding");
        vals[k] = decodeChar(c);
        if (vals[k] < 0) throw DataError("base64: invalid character");
      }
    }
    const std::uint32_t v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) |
                            vals[3];
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

nlohmann::ordered_json tensorToJson(const Tensor& t) {
  static_assert(sizeof(double) == 8);
  nlohmann::ordered_json j;
  j["shape"] = t.shape();
  std::vector<std::uint8_t> bytes(static_cast<size_t>(t.size()) * 8);
  // Little-endian on every supported target; memcpy preserves exact bits.
  std::memcpy(bytes.data(), t.data().data(), bytes.size());
  j["data"] = base64Encode(bytes.data(), bytes.size());
  return j;
}

Tensor tensorFromJson(const nlohmann::ordered_json& j) {
  if (!j.contains("shape") || !j.contains("data"))
    throw DataError("tensor json: missing shape or data");
  std::vector<Index> shape = j.at("shape").get<std::vector<Index>>();
  std::vector<std::uint8_t> bytes = base64Decode(j.at("data").get<std::string>());
  if (bytes.size() % 8 != 0) throw DataError("tensor json: truncated data");
  Eigen::ArrayXd data(static_cast<Index>(bytes.size() / 8));
  std::memcpy(data.data(), bytes.data(), bytes.size());
  return Tensor::fromFlat(std::move(shape), std::move(data));
}

}  // namespace nf
