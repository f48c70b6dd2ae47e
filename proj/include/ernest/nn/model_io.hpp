#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ernest/errors.hpp"
#include "ernest/io_util.hpp"
#include "ernest/nn/network.hpp"

namespace ernest::nn {

inline constexpr std::string_view kModelMagic = "ERNM";
inline constexpr std::uint16_t kModelVersion = 1;

// Layout: magic, u16 version, u32 manifest length, manifest JSON
// (input extent + layer specs), then per parametric layer one blob of
// u32 byte count, f32 little-endian weights-then-bias, u32 crc32.
inline std::string serialize_network(const Network& net) {
  ByteWriter w;
  w.str(kModelMagic);
  w.u16(kModelVersion);
  nlohmann::json manifest;
  manifest["input"] = {{"channels", net.input_extent().channels},
                       {"length", net.input_extent().length}};
  manifest["layers"] = specs_to_json(net.specs());
  const std::string text = manifest.dump();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.str(text);
  for (const auto& layer : net.layers()) {
    if (layer.w.empty() && layer.b.empty()) continue;
    std::vector<float> payload;
    payload.reserve(layer.w.size() + layer.b.size());
    for (double v : layer.w) payload.push_back(static_cast<float>(v));
    for (double v : layer.b) payload.push_back(static_cast<float>(v));
    const std::size_t len = payload.size() * sizeof(float);
    w.u32(static_cast<std::uint32_t>(len));
    w.f32_array(payload.data(), payload.size());
    w.u32(crc32(payload.data(), len));
  }
  return w.take();
}

inline Network deserialize_network(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != kModelMagic) {
    throw CacheError("model payload has wrong magic");
  }
  if (r.u16() != kModelVersion) {
    throw CacheError("model payload has unsupported version");
  }
  const std::string_view manifest_bytes = r.bytes(r.u32());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw CacheError(std::string("model manifest is not valid JSON: ") + e.what());
  }
  Network net;
  try {
    Extent input{manifest.at("input").at("channels").get<std::size_t>(),
                 manifest.at("input").at("length").get<std::size_t>()};
    net = Network(input, specs_from_json(manifest.at("layers")));
  } catch (const nlohmann::json::exception& e) {
    throw CacheError(std::string("model manifest is malformed: ") + e.what());
  }
  for (auto& layer : net.layers_mut()) {
    const std::size_t count = layer.w.size() + layer.b.size();
    if (count == 0) continue;
    const std::uint32_t len = r.u32();
    if (len != count * sizeof(float)) {
      throw CacheError("model parameter block size mismatch");
    }
    const std::string_view raw = r.bytes(len);
    if (r.u32() != crc32(raw.data(), raw.size())) {
      throw CacheError("model parameter block failed checksum");
    }
    std::vector<float> values(count);
    ByteReader pr(raw);
    pr.f32_array(values.data(), count);
    for (std::size_t k = 0; k < layer.w.size(); ++k) {
      layer.w[k] = static_cast<double>(values[k]);
    }
    for (std::size_t k = 0; k < layer.b.size(); ++k) {
      layer.b[k] = static_cast<double>(values[layer.w.size() + k]);
    }
  }
  if (!r.exhausted()) {
    throw CacheError("model payload has trailing bytes");
  }
  net.bump_param_version();
  return net;
}

inline void save_network(const Network& net, const std::filesystem::path& path) {
  write_file(path, serialize_network(net));
}

inline Network load_network(const std::filesystem::path& path) {
  return deserialize_network(read_file(path));
}

}  // namespace ernest::nn
