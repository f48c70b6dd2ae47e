#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ernest/data/dataset.hpp"
#include "ernest/errors.hpp"
#include "ernest/io_util.hpp"
#include "ernest/nn/model_io.hpp"
#include "ernest/nn/network.hpp"
#include "ernest/nn/train.hpp"
#include "ernest/parallel.hpp"
#include "ernest/rng.hpp"
#include "ernest/selection/ranking.hpp"

namespace ernest::features {

// One trained per-channel model. The encoder is the first `encoder_len`
// layers of `net` (ending at the embedding layer); the remaining layers
// form the classification head used only for holdout accuracy.
struct ChannelEmbedder {
  std::size_t channel_index = 0;
  std::string channel_name;
  nn::Network net;
  std::size_t encoder_len = 0;
  std::size_t embedding_dim = 0;
  bool normalize_input = true;
  double holdout_accuracy = 0.0;

  nn::Network encoder() const { return net.split(encoder_len); }
};

struct EmbedderConfig {
  std::vector<nn::LayerSpec> arch;
  std::size_t encoder_len = 0;
  std::size_t embedding_dim = 4;  // M
  nn::TrainOptions train;
  double holdout_fraction = 0.15;
  bool normalize_input = true;
};

// Conv1D(8,k7,s2) -> ReLU -> MaxPool1D(4) -> Conv1D(20,k5,s2) -> ReLU ->
// GAP -> Dense(M) | ReLU -> Dense(2) -> Softmax; encoder ends at Dense(M).
inline EmbedderConfig default_embedder_config(std::size_t embedding_dim = 4) {
  EmbedderConfig cfg;
  cfg.arch = {nn::Conv1DSpec{8, 7, 2},  nn::ReLUSpec{},
              nn::MaxPool1DSpec{4},     nn::Conv1DSpec{20, 5, 2},
              nn::ReLUSpec{},           nn::GlobalAveragePoolSpec{},
              nn::DenseSpec{embedding_dim}, nn::ReLUSpec{},
              nn::DenseSpec{2},         nn::SoftmaxSpec{}};
  cfg.encoder_len = 7;
  cfg.embedding_dim = embedding_dim;
  cfg.train.epochs = 200;
  cfg.train.batch_size = 1000;
  return cfg;
}

struct TrialVectorMatrix {
  nn::Tensor values;  // N x (C*M), channel-block columns
  std::vector<std::size_t> row_labels;
  std::vector<std::string> row_subjects;
  std::vector<std::size_t> channel_order;
  std::size_t embedding_dim = 0;
};

namespace detail {

// Per-signal z-score with population sigma; constant signals pass through
// mean-centered.
inline void normalize_signal(double* values, std::size_t n) {
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += values[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = values[i] - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
  for (std::size_t i = 0; i < n; ++i) values[i] = (values[i] - mean) / sd;
}

// Batch of one channel's signals across the given trials.
inline nn::Tensor channel_batch(const data::Dataset& ds,
                                const std::vector<std::size_t>& trial_rows,
                                std::size_t channel, bool normalize) {
  const std::size_t j = ds.samples_per_channel;
  nn::Tensor x = nn::Tensor::zeros({trial_rows.size(), j});
  for (std::size_t r = 0; r < trial_rows.size(); ++r) {
    const float* src = ds.trials[trial_rows[r]].channel(channel);
    double* dst = x.row(r);
    for (std::size_t i = 0; i < j; ++i) dst[i] = static_cast<double>(src[i]);
    if (normalize) normalize_signal(dst, j);
  }
  return x;
}

}  // namespace detail

// Subject-disjoint holdout: per class, round(fraction * subjects) clamped
// to [1, count-1], drawn from the sorted subject list. Deterministic in
// (dataset, fraction, master_seed), so later stages can recover the same
// set the embedder stage held out.
inline std::set<std::string> pick_holdout_subjects(const data::Dataset& ds,
                                                   double fraction,
                                                   std::uint64_t master_seed) {
  const auto labels = ds.subject_labels();
  std::vector<std::string> by_class[2];
  for (const auto& [id, label] : labels) by_class[label].push_back(id);
  if (by_class[0].empty() || by_class[1].empty()) {
    throw LabelError("training data must contain both classes");
  }
  RngStream rng(master_seed, RngRole::Split, 1);
  std::set<std::string> holdout;
  for (const auto& ids : by_class) {
    if (ids.size() < 2) {
      throw SplitError("holdout needs at least two subjects per class");
    }
    const std::size_t want = static_cast<std::size_t>(
        std::lround(fraction * static_cast<double>(ids.size())));
    const std::size_t k = std::clamp<std::size_t>(want, 1, ids.size() - 1);
    for (const std::size_t i : rng.sample_without_replacement(ids.size(), k)) {
      holdout.insert(ids[i]);
    }
  }
  return holdout;
}

// Trains one supervised classifier per registry channel on fit-subject
// signals (channel c seeded from (master_seed, embedder, c)); the shared
// subject-disjoint holdout provides each embedder's accuracy.
inline std::vector<ChannelEmbedder> train_channel_embedders(
    const data::Dataset& train, const EmbedderConfig& cfg,
    std::uint64_t master_seed, std::size_t jobs = 1) {
  if (train.trials.empty()) {
    throw EmptyDatasetError("embedder training set is empty");
  }
  const std::set<std::string> holdout =
      pick_holdout_subjects(train, cfg.holdout_fraction, master_seed);
  std::vector<std::size_t> fit_rows, holdout_rows;
  for (std::size_t i = 0; i < train.trials.size(); ++i) {
    (holdout.count(train.trials[i].subject_id) ? holdout_rows : fit_rows)
        .push_back(i);
  }
  std::vector<std::size_t> fit_labels, holdout_labels;
  for (const std::size_t i : fit_rows) {
    fit_labels.push_back(train.trials[i].class_label);
  }
  for (const std::size_t i : holdout_rows) {
    holdout_labels.push_back(train.trials[i].class_label);
  }

  const nn::Extent input{1, train.samples_per_channel};
  {
    nn::Network probe(input, cfg.arch);
    if (cfg.encoder_len == 0 || cfg.encoder_len > probe.size()) {
      throw ConfigError("encoder length outside the architecture");
    }
    if (probe.split(cfg.encoder_len).output_extent().flat() !=
        cfg.embedding_dim) {
      throw ConfigError("encoder output width does not match embedding_dim");
    }
  }

  const std::size_t c_count = train.channel_count();
  std::vector<ChannelEmbedder> embedders(c_count);
  parallel_for(c_count, jobs, [&](std::size_t c) {
    RngStream rng(master_seed, RngRole::Embedder, c);
    nn::Network net(input, cfg.arch);
    net.init_params(rng);
    const nn::Tensor fit_x =
        detail::channel_batch(train, fit_rows, c, cfg.normalize_input);
    try {
      nn::train_classifier(net, fit_x, fit_labels, cfg.train, rng);
    } catch (const TrainingDivergedError& e) {
      throw TrainingDivergedError(c, std::string(e.what()) + " (channel " +
                                         std::to_string(c) + ")");
    }
    const nn::Tensor holdout_x =
        detail::channel_batch(train, holdout_rows, c, cfg.normalize_input);
    const auto pred = nn::predict_classes(net, holdout_x);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
      correct += pred[r] == holdout_labels[r];
    }
    ChannelEmbedder& e = embedders[c];
    e.channel_index = c;
    e.channel_name = train.channel_names[c];
    e.net = std::move(net);
    e.encoder_len = cfg.encoder_len;
    e.embedding_dim = cfg.embedding_dim;
    e.normalize_input = cfg.normalize_input;
    e.holdout_accuracy =
        static_cast<double>(correct) / static_cast<double>(pred.size());
  });
  return embedders;
}

namespace detail {

inline void check_registry(const std::vector<ChannelEmbedder>& embedders,
                           const std::vector<std::string>& channel_names) {
  if (embedders.size() != channel_names.size()) {
    throw SchemaError("embedder count does not match the channel registry");
  }
  for (std::size_t c = 0; c < embedders.size(); ++c) {
    if (embedders[c].channel_name != channel_names[c]) {
      throw SchemaError("embedder " + std::to_string(c) + " is for channel " +
                        embedders[c].channel_name + ", registry has " +
                        channel_names[c]);
    }
  }
}

}  // namespace detail

// Concatenated encoder outputs for one trial over `channel_subset`, in
// subset order.
inline std::vector<double> embed_trial(
    const std::vector<ChannelEmbedder>& embedders, const data::RawTrial& trial,
    const std::vector<std::size_t>& channel_subset) {
  detail::check_registry(embedders, trial.channel_names);
  const std::size_t j = trial.samples_per_channel();
  std::vector<double> out;
  for (const std::size_t c : channel_subset) {
    if (c >= embedders.size()) {
      throw SchemaError("channel index " + std::to_string(c) +
                        " outside the registry");
    }
    const ChannelEmbedder& e = embedders[c];
    nn::Tensor x = nn::Tensor::zeros({1, j});
    const float* src = trial.channel(c);
    for (std::size_t i = 0; i < j; ++i) {
      x.values[i] = static_cast<double>(src[i]);
    }
    if (e.normalize_input) detail::normalize_signal(x.values.data(), j);
    const nn::Tensor emb = e.net.forward(x, nullptr, e.encoder_len);
    out.insert(out.end(), emb.values.begin(), emb.values.end());
  }
  return out;
}

// Embeds every trial over all channels: row i, block c holds encoder_c of
// trial i's channel c. Channels run in parallel; each writes its own
// column block, so the result is independent of `jobs`.
inline TrialVectorMatrix build_trial_matrix(
    const std::vector<ChannelEmbedder>& embedders, const data::Dataset& ds,
    std::size_t jobs = 1) {
  if (ds.trials.empty()) {
    throw EmptyDatasetError("no trials to embed");
  }
  detail::check_registry(embedders, ds.channel_names);
  const std::size_t n = ds.trials.size();
  const std::size_t c_count = embedders.size();
  const std::size_t m = embedders.empty() ? 0 : embedders[0].embedding_dim;
  TrialVectorMatrix t;
  t.values = nn::Tensor::zeros({n, c_count * m});
  t.embedding_dim = m;
  for (std::size_t i = 0; i < n; ++i) {
    t.row_labels.push_back(ds.trials[i].class_label);
    t.row_subjects.push_back(ds.trials[i].subject_id);
  }
  std::vector<std::size_t> all_rows(n);
  for (std::size_t i = 0; i < n; ++i) all_rows[i] = i;
  parallel_for(c_count, jobs, [&](std::size_t c) {
    const ChannelEmbedder& e = embedders[c];
    if (e.embedding_dim != m) {
      throw SchemaError("embedders disagree on embedding width");
    }
    const nn::Tensor x =
        detail::channel_batch(ds, all_rows, c, e.normalize_input);
    const nn::Tensor emb = e.net.forward(x, nullptr, e.encoder_len);
    for (std::size_t r = 0; r < n; ++r) {
      std::copy(emb.row(r), emb.row(r) + m, t.values.row(r) + c * m);
    }
  });
  t.channel_order.resize(c_count);
  for (std::size_t c = 0; c < c_count; ++c) t.channel_order[c] = c;
  return t;
}

// Ablation ranking: holdout accuracy descending, channel index tie-break.
inline selection::ChannelRanking channel_accuracy_ranking(
    const std::vector<ChannelEmbedder>& embedders) {
  std::vector<double> scores;
  scores.reserve(embedders.size());
  for (const auto& e : embedders) scores.push_back(e.holdout_accuracy);
  return selection::make_ranking(scores, "holdout_accuracy");
}

// CSV: rank,channel_index,channel_name,holdout_accuracy
inline std::string accuracy_ranking_to_csv(
    const selection::ChannelRanking& ranking,
    const std::vector<ChannelEmbedder>& embedders) {
  std::string out = "rank,channel_index,channel_name,holdout_accuracy\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& e = ranking.entries[i];
    out += std::to_string(i) + "," + std::to_string(e.channel_index) + "," +
           embedders.at(e.channel_index).channel_name + "," +
           format_double(e.score) + "\n";
  }
  return out;
}

// CSV: subject,label,ch<idx>_<m>...
inline std::string trial_matrix_to_csv(const TrialVectorMatrix& t) {
  std::string out = "subject,label";
  for (const std::size_t c : t.channel_order) {
    for (std::size_t m = 0; m < t.embedding_dim; ++m) {
      out += ",ch" + std::to_string(c) + "_" + std::to_string(m);
    }
  }
  out += "\n";
  for (std::size_t r = 0; r < t.values.rows(); ++r) {
    out += t.row_subjects[r] + "," + std::to_string(t.row_labels[r]);
    const double* row = t.values.row(r);
    for (std::size_t i = 0; i < t.values.cols(); ++i) {
      out += "," + format_double(row[i]);
    }
    out += "\n";
  }
  return out;
}

inline TrialVectorMatrix trial_matrix_from_csv(std::string_view csv) {
  TrialVectorMatrix t;
  std::vector<std::vector<double>> rows;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < csv.size()) {
    std::size_t end = csv.find('\n', pos);
    if (end == std::string_view::npos) end = csv.size();
    const std::string_view line = csv.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const auto fields = split_line(line, ',');
    if (!header_seen) {
      if (fields.size() < 3 || fields[0] != "subject" || fields[1] != "label") {
        throw CacheError("unrecognized trial matrix CSV header");
      }
      std::size_t prev_channel = 0;
      for (std::size_t i = 2; i < fields.size(); ++i) {
        const std::string& name = fields[i];
        const std::size_t sep = name.rfind('_');
        if (name.size() < 4 || name.compare(0, 2, "ch") != 0 ||
            sep == std::string::npos) {
          throw CacheError("unrecognized trial matrix column '" + name + "'");
        }
        const auto channel = static_cast<std::size_t>(
            parse_double(std::string_view(name).substr(2, sep - 2)));
        if (t.channel_order.empty() || channel != prev_channel) {
          t.channel_order.push_back(channel);
          prev_channel = channel;
        }
      }
      if (t.channel_order.empty()) {
        throw CacheError("trial matrix CSV has no feature columns");
      }
      t.embedding_dim = (fields.size() - 2) / t.channel_order.size();
      header_seen = true;
      continue;
    }
    if (fields.size() < 3) throw CacheError("short trial matrix CSV row");
    t.row_subjects.push_back(fields[0]);
    t.row_labels.push_back(static_cast<std::size_t>(parse_double(fields[1])));
    std::vector<double> row;
    row.reserve(fields.size() - 2);
    for (std::size_t i = 2; i < fields.size(); ++i) {
      row.push_back(parse_double(fields[i]));
    }
    rows.push_back(std::move(row));
  }
  if (!header_seen || rows.empty()) {
    throw CacheError("empty trial matrix CSV");
  }
  const std::size_t width = t.channel_order.size() * t.embedding_dim;
  t.values = nn::Tensor::zeros({rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw CacheError("trial matrix CSV row width mismatch");
    }
    std::copy(rows[r].begin(), rows[r].end(), t.values.row(r));
  }
  return t;
}

// Bundle: one model file per channel plus a JSON manifest.
inline void save_embedder_bundle(const std::vector<ChannelEmbedder>& embedders,
                                 const std::filesystem::path& dir) {
  nlohmann::json manifest;
  manifest["embedding_dim"] =
      embedders.empty() ? 0 : embedders[0].embedding_dim;
  manifest["encoder_len"] = embedders.empty() ? 0 : embedders[0].encoder_len;
  manifest["normalize_input"] =
      embedders.empty() ? true : embedders[0].normalize_input;
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& e : embedders) {
    channels.push_back({{"index", e.channel_index},
                        {"name", e.channel_name},
                        {"holdout_accuracy", e.holdout_accuracy}});
    nn::save_network(e.net,
                     dir / ("channel_" + std::to_string(e.channel_index) +
                            ".ernm"));
  }
  manifest["channels"] = std::move(channels);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline std::vector<ChannelEmbedder> load_embedder_bundle(
    const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw CacheError(std::string("embedder manifest is not valid JSON: ") +
                     e.what());
  }
  std::vector<ChannelEmbedder> embedders;
  try {
    const std::size_t m = manifest.at("embedding_dim").get<std::size_t>();
    const std::size_t encoder_len =
        manifest.at("encoder_len").get<std::size_t>();
    const bool normalize = manifest.at("normalize_input").get<bool>();
    for (const auto& jc : manifest.at("channels")) {
      ChannelEmbedder e;
      e.channel_index = jc.at("index").get<std::size_t>();
      e.channel_name = jc.at("name").get<std::string>();
      e.holdout_accuracy = jc.at("holdout_accuracy").get<double>();
      e.embedding_dim = m;
      e.encoder_len = encoder_len;
      e.normalize_input = normalize;
      e.net = nn::load_network(
          dir / ("channel_" + std::to_string(e.channel_index) + ".ernm"));
      if (e.encoder_len > e.net.size() ||
          e.net.split(e.encoder_len).output_extent().flat() != m) {
        throw CacheError("embedder bundle model does not match its manifest");
      }
      embedders.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CacheError(std::string("embedder manifest is malformed: ") +
                     e.what());
  }
  if (embedders.empty()) {
    throw CacheError("embedder bundle holds no channels");
  }
  for (std::size_t c = 0; c < embedders.size(); ++c) {
    if (embedders[c].channel_index != c) {
      throw CacheError("embedder bundle channels are not contiguous");
    }
  }
  return embedders;
}

}  // namespace ernest::features
