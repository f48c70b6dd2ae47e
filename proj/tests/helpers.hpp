#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ernest/features/embedder.hpp"
#include "ernest/io_util.hpp"
#include "ernest/nn/network.hpp"
#include "ernest/nn/tensor.hpp"
#include "ernest/rng.hpp"

namespace testutil {

// Fresh scratch directory per caller; wiped on construction, not after,
// so failures leave evidence behind.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir =
      std::filesystem::temp_directory_path() / ("ernest_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline ernest::nn::Tensor tensor2(
    const std::vector<std::vector<double>>& rows) {
  ernest::nn::Tensor t =
      ernest::nn::Tensor::zeros({rows.size(), rows.at(0).size()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      t.at(r, c) = rows[r].at(c);
    }
  }
  return t;
}

inline ernest::nn::Tensor random_tensor(std::vector<std::size_t> shape,
                                        ernest::RngStream& rng,
                                        double scale = 1.0) {
  ernest::nn::Tensor t = ernest::nn::Tensor::zeros(std::move(shape));
  for (auto& v : t.values) v = scale * rng.normal();
  return t;
}

// One trial file in the public EEG export layout. `voltages` is
// channel-major; data lines are emitted per channel with a '#' banner
// between blocks, matching the real export.
inline std::string make_trial_text(const std::string& subject_file,
                                   const std::string& condition,
                                   std::size_t trial_number,
                                   const std::vector<std::string>& channels,
                                   const std::vector<std::vector<double>>& voltages) {
  std::string out = "# " + subject_file + "\n";
  out += "# 120 trials, 64 chans, 416 samples 368 post_stim samples\n";
  out += "# 3.906000 msecs uA 489 " + condition + " , trial " +
         std::to_string(trial_number) + "\n";
  for (std::size_t c = 0; c < channels.size(); ++c) {
    out += "# " + channels[c] + " chan " + std::to_string(c) + "\n";
    for (std::size_t j = 0; j < voltages[c].size(); ++j) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%zu %s %zu %.3f\n", trial_number,
                    channels[c].c_str(), j, voltages[c][j]);
      out += buf;
    }
  }
  return out;
}

inline std::vector<std::vector<double>> ramp_voltages(std::size_t channels,
                                                      std::size_t samples,
                                                      double base = 0.0) {
  std::vector<std::vector<double>> v(channels, std::vector<double>(samples));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t j = 0; j < samples; ++j) {
      v[c][j] = base + static_cast<double>(c * 100 + j);
    }
  }
  return v;
}

inline void write_trial_file(const std::filesystem::path& path,
                             const std::string& text) {
  ernest::write_file(path, text);
}

// Untrained single-dense embedders; deterministic in the seed.
inline std::vector<ernest::features::ChannelEmbedder> random_embedders(
    const std::vector<std::string>& names, std::size_t samples,
    std::size_t embedding_dim, std::uint64_t seed) {
  std::vector<ernest::features::ChannelEmbedder> out;
  for (std::size_t c = 0; c < names.size(); ++c) {
    ernest::features::ChannelEmbedder e;
    e.channel_index = c;
    e.channel_name = names[c];
    e.net = ernest::nn::Network(ernest::nn::Extent{1, samples},
                                {ernest::nn::DenseSpec{embedding_dim}});
    ernest::RngStream rng(seed, ernest::RngRole::Embedder, c);
    e.net.init_params(rng);
    e.encoder_len = 1;
    e.embedding_dim = embedding_dim;
    e.holdout_accuracy = 0.5;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace testutil
