#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ernest/data/dataset.hpp"
#include "ernest/errors.hpp"
#include "ernest/io_util.hpp"

namespace ernest::data {

inline constexpr std::string_view kDatasetMagic = "ERNS";
inline constexpr std::uint16_t kDatasetVersion = 1;

// Layout: magic, u16 version, u32 metadata length, metadata JSON
// (registry, J, per-trial subject/label/index/stimulus), then per trial
// C x J little-endian f32 samples, then u32 crc32 over all sample bytes.
inline std::string serialize_dataset(const Dataset& ds) {
  ByteWriter w;
  w.str(kDatasetMagic);
  w.u16(kDatasetVersion);
  nlohmann::json meta;
  meta["channels"] = ds.channel_names;
  meta["samples_per_channel"] = ds.samples_per_channel;
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : ds.trials) {
    trials.push_back({{"subject", t.subject_id},
                      {"label", t.class_label},
                      {"trial", t.trial_index},
                      {"stimulus", stimulus_name(t.stimulus)}});
  }
  meta["trials"] = std::move(trials);
  const std::string text = meta.dump();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.str(text);
  std::uint32_t crc = 0;
  for (const auto& t : ds.trials) {
    w.f32_array(t.samples.data(), t.samples.size());
    crc = crc32(t.samples.data(), t.samples.size() * sizeof(float), crc);
  }
  w.u32(crc);
  return w.take();
}

inline Dataset deserialize_dataset(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != kDatasetMagic) {
    throw CacheError("dataset cache has wrong magic");
  }
  if (r.u16() != kDatasetVersion) {
    throw CacheError("dataset cache has unsupported version");
  }
  const std::string_view meta_bytes = r.bytes(r.u32());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_bytes);
  } catch (const nlohmann::json::exception& e) {
    throw CacheError(std::string("dataset metadata is not valid JSON: ") +
                     e.what());
  }
  Dataset ds;
  try {
    ds.channel_names = meta.at("channels").get<std::vector<std::string>>();
    ds.samples_per_channel = meta.at("samples_per_channel").get<std::size_t>();
    const std::size_t per_trial =
        ds.channel_names.size() * ds.samples_per_channel;
    std::uint32_t crc = 0;
    for (const auto& jt : meta.at("trials")) {
      RawTrial t;
      t.subject_id = jt.at("subject").get<std::string>();
      t.class_label = jt.at("label").get<std::size_t>();
      t.trial_index = jt.at("trial").get<std::size_t>();
      t.stimulus = stimulus_from_name(jt.at("stimulus").get<std::string>());
      t.channel_names = ds.channel_names;
      t.samples.resize(per_trial);
      r.f32_array(t.samples.data(), per_trial);
      crc = crc32(t.samples.data(), per_trial * sizeof(float), crc);
      ds.trials.push_back(std::move(t));
    }
    if (r.u32() != crc) {
      throw CacheError("dataset samples failed checksum");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CacheError(std::string("dataset metadata is malformed: ") + e.what());
  }
  if (!r.exhausted()) {
    throw CacheError("dataset cache has trailing bytes");
  }
  if (ds.trials.empty()) {
    throw EmptyDatasetError("dataset cache holds no trials");
  }
  return ds;
}

inline void write_dataset_cache(const Dataset& ds,
                                const std::filesystem::path& path) {
  write_file(path, serialize_dataset(ds));
}

inline Dataset read_dataset_cache(const std::filesystem::path& path) {
  return deserialize_dataset(read_file(path));
}

}  // namespace ernest::data
