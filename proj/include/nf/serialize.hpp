#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "nf/tensor.hpp"

namespace nf {

/// RFC 4648 base64 (with padding, no line wrapping).
std::string base64Encode(const std::uint8_t* data, size_t len);
std::vector<std::uint8_t> base64Decode(const std::string& text);

/// Tensors serialize as {"shape": [...], "data": "<base64>"} where data is
/// the flat row-major array of little-endian 64-bit floats. Storing floats
/// as bytes keeps save/load byte-identical and lossless.
nlohmann::ordered_json tensorToJson(const Tensor& t);
Tensor tensorFromJson(const nlohmann::ordered_json& j);

}  // namespace nf
