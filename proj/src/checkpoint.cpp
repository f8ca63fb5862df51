#include "nf/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <utility>

#include "nf/serialize.hpp"

namespace nf {

namespace {

nlohmann::ordered_json slotsToJson(
    const std::vector<std::pair<std::string, Tensor>>& slots) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [name, value] : slots) out[name] = tensorToJson(value);
  return out;
}

std::vector<std::pair<std::string, Tensor>> slotsFromJson(
    const nlohmann::ordered_json& j, const char* label) {
  if (!j.is_object()) {
    throw DataError(std::string("checkpoint: optimizer.") + label +
                    " must be an object");
  }
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(j.size());
  for (const auto& item : j.items()) {
    out.emplace_back(item.key(), tensorFromJson(item.value()));
  }
  return out;
}

}  // namespace

nlohmann::ordered_json Checkpoint::toJson() const {
  nlohmann::ordered_json j;
  j["format_version"] = formatVersion;
  j["step"] = step;
  j["dim"] = dim;
  if (image.valid()) {
    j["image"] = {{"width", image.width}, {"height", image.height}};
  }
  j["topology"] = topology;
  j["optimizer"] = {{"m", slotsToJson(adamM)}, {"v", slotsToJson(adamV)}};
  j["rng"] = {{"seed", rngSeed}, {"counter", rngCounter}};
  return j;
}

Checkpoint Checkpoint::fromJson(const nlohmann::ordered_json& j) {
  Checkpoint ck;
  try {
    ck.formatVersion = j.at("format_version").get<int>();
    if (ck.formatVersion != kCheckpointFormatVersion) {
      throw DataError("checkpoint: format version " +
                      std::to_string(ck.formatVersion) +
                      " is not supported; this build reads version " +
                      std::to_string(kCheckpointFormatVersion));
    }
    ck.step = j.at("step").get<Index>();
    ck.dim = j.at("dim").get<Index>();
    if (j.contains("image")) {
      ck.image.width = j.at("image").at("width").get<Index>();
      ck.image.height = j.at("image").at("height").get<Index>();
      if (!ck.image.valid()) {
        throw DataError("checkpoint: image extents must be positive");
      }
    }
    ck.topology = j.at("topology");
    ck.adamM = slotsFromJson(j.at("optimizer").at("m"), "m");
    ck.adamV = slotsFromJson(j.at("optimizer").at("v"), "v");
    ck.rngSeed = j.at("rng").at("seed").get<std::uint64_t>();
    ck.rngCounter = j.at("rng").at("counter").get<std::uint64_t>();
  } catch (const nlohmann::ordered_json::exception& e) {
    throw DataError(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  if (ck.step < 0) throw DataError("checkpoint: negative step");
  if (ck.dim <= 0) throw DataError("checkpoint: dim must be positive");
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot open " + path + " for writing");
  out << toJson().dump(2) << '\n';
  if (!out) throw DataError("checkpoint: write to " + path + " failed");
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(buf.str());
  } catch (const nlohmann::ordered_json::exception& e) {
    throw DataError("checkpoint: " + path + " is not valid JSON: " + e.what());
  }
  return fromJson(j);
}

Chain Checkpoint::instantiateChain() const {
  auto b = bijectorFromJson(topology);
  auto* chain = dynamic_cast<Chain*>(b.get());
  if (!chain) throw DataError("checkpoint: topology is not a chain");
  if (chain->dim() != 0 && chain->dim() != dim) {
    throw DataError("checkpoint: topology dim disagrees with recorded dim");
  }
  return std::move(*chain);
}

}  // namespace nf
