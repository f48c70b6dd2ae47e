#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ernest/data/dataset.hpp"
#include "ernest/data/synthetic.hpp"
#include "ernest/errors.hpp"
#include "ernest/eval/classifiers.hpp"
#include "ernest/eval/evaluate.hpp"
#include "ernest/features/embedder.hpp"
#include "ernest/selection/dsaee.hpp"

namespace ernest::pipeline {

// Seeds left null in the file resolve to master_seed; the resolved echo
// written next to the outputs always carries the concrete values.
struct DatasetSpec {
  std::string source = "synthetic";  // "synthetic" | "uci" | "cache"
  std::string path;                  // uci root or cache file
  std::vector<std::string> blacklist = {"X", "Y", "nd"};
  std::optional<std::string> condition;
  data::SyntheticConfig synthetic;
  std::optional<std::uint64_t> synthetic_seed;
};

struct SplitSpec {
  std::size_t n_test_subjects = 8;
  std::optional<std::uint64_t> seed;
};

struct PipelineConfig {
  DatasetSpec dataset;
  SplitSpec split;
  features::EmbedderConfig embedder = features::default_embedder_config(4);
  selection::DsaeeConfig dsaee = selection::default_dsaee_config();
  std::vector<std::size_t> k_list = {5, 16};
  std::vector<eval::ClassifierKind> classifiers = {
      eval::ClassifierKind::LinearSVM, eval::ClassifierKind::LogisticRegression};
  std::size_t folds = 10;
  double regularization = 1.0;
  eval::FoldMode fold_mode = eval::FoldMode::StratifiedRows;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  std::size_t jobs = 1;
};

inline PipelineConfig default_pipeline_config() {
  PipelineConfig cfg;
  cfg.dataset.synthetic.informative_channels = {2, 7, 11};
  cfg.dataset.synthetic.coupled_pairs = {{5, 12}};
  return cfg;
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       const std::set<std::string>& allowed) {
  if (!j.is_object()) {
    throw ConfigError("config section '" + where + "' must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key '" + where + "." + key + "'");
    }
  }
}

inline std::optional<std::uint64_t> opt_seed(const nlohmann::json& j,
                                             const std::string& key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::uint64_t>();
}

inline nlohmann::json seed_json(const std::optional<std::uint64_t>& seed) {
  if (!seed) return nullptr;
  return *seed;
}

inline nlohmann::json train_to_json(const nn::TrainOptions& train) {
  return {{"epochs", train.epochs},
          {"batch_size", train.batch_size},
          {"learning_rate", train.adam.lr}};
}

inline void train_from_json(const nlohmann::json& j, nn::TrainOptions& train) {
  if (j.contains("epochs")) train.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("batch_size")) {
    train.batch_size = j.at("batch_size").get<std::size_t>();
  }
  if (j.contains("learning_rate")) {
    train.adam.lr = j.at("learning_rate").get<double>();
  }
}

}  // namespace detail

inline nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  nlohmann::json ds;
  ds["source"] = cfg.dataset.source;
  ds["path"] = cfg.dataset.path;
  ds["blacklist"] = cfg.dataset.blacklist;
  ds["condition"] =
      cfg.dataset.condition ? nlohmann::json(*cfg.dataset.condition) : nullptr;
  const auto& sy = cfg.dataset.synthetic;
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [a, b] : sy.coupled_pairs) {
    pairs.push_back(nlohmann::json::array({a, b}));
  }
  ds["synthetic"] = {{"n_subjects", sy.n_subjects},
                     {"trials_per_subject", sy.trials_per_subject},
                     {"channels", sy.channels},
                     {"samples_per_channel", sy.samples_per_channel},
                     {"informative_channels", sy.informative_channels},
                     {"coupled_pairs", pairs},
                     {"effect_size", sy.effect_size},
                     {"noise_sigma", sy.noise_sigma},
                     {"seed", detail::seed_json(cfg.dataset.synthetic_seed)}};
  j["dataset"] = std::move(ds);

  j["split"] = {{"n_test_subjects", cfg.split.n_test_subjects},
                {"seed", detail::seed_json(cfg.split.seed)}};

  nlohmann::json emb = detail::train_to_json(cfg.embedder.train);
  emb["embedding_dim"] = cfg.embedder.embedding_dim;
  emb["holdout_fraction"] = cfg.embedder.holdout_fraction;
  emb["normalize_input"] = cfg.embedder.normalize_input;
  emb["arch"] = {{"encoder_len", cfg.embedder.encoder_len},
                 {"layers", nn::specs_to_json(cfg.embedder.arch)}};
  j["embedder"] = std::move(emb);

  nlohmann::json dsae = detail::train_to_json(cfg.dsaee.train);
  dsae["components"] = cfg.dsaee.components;
  dsae["test_per_class"] = cfg.dsaee.test_per_class;
  dsae["hidden_widths"] = cfg.dsaee.hidden_widths;
  dsae["sparse_hidden"] = cfg.dsaee.sparse_hidden;
  dsae["lambda"] = cfg.dsaee.lambda;
  dsae["normal_class"] = cfg.dsaee.normal_class;
  j["dsaee"] = std::move(dsae);

  std::vector<std::string> kinds;
  for (const auto kind : cfg.classifiers) {
    kinds.push_back(eval::classifier_name(kind));
  }
  j["evaluation"] = {{"k_list", cfg.k_list},
                     {"classifiers", kinds},
                     {"folds", cfg.folds},
                     {"regularization", cfg.regularization},
                     {"fold_mode", eval::fold_mode_name(cfg.fold_mode)}};

  j["master_seed"] = cfg.master_seed;
  j["output_dir"] = cfg.output_dir;
  j["jobs"] = cfg.jobs;
  return j;
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg = default_pipeline_config();
  try {
    detail::check_keys(j, "", {"dataset", "split", "embedder", "dsaee",
                               "evaluation", "master_seed", "output_dir",
                               "jobs"});
    if (j.contains("master_seed")) {
      cfg.master_seed = j.at("master_seed").get<std::uint64_t>();
    }
    if (j.contains("output_dir")) {
      cfg.output_dir = j.at("output_dir").get<std::string>();
    }
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<std::size_t>();

    if (j.contains("dataset")) {
      const auto& ds = j.at("dataset");
      detail::check_keys(ds, "dataset",
                         {"source", "path", "blacklist", "condition",
                          "synthetic"});
      if (ds.contains("source")) {
        cfg.dataset.source = ds.at("source").get<std::string>();
      }
      if (ds.contains("path")) {
        cfg.dataset.path = ds.at("path").get<std::string>();
      }
      if (ds.contains("blacklist")) {
        cfg.dataset.blacklist =
            ds.at("blacklist").get<std::vector<std::string>>();
      }
      if (ds.contains("condition") && !ds.at("condition").is_null()) {
        cfg.dataset.condition = ds.at("condition").get<std::string>();
      }
      if (ds.contains("synthetic")) {
        const auto& sy = ds.at("synthetic");
        detail::check_keys(sy, "dataset.synthetic",
                           {"n_subjects", "trials_per_subject", "channels",
                            "samples_per_channel", "informative_channels",
                            "coupled_pairs", "effect_size", "noise_sigma",
                            "seed"});
        auto& out = cfg.dataset.synthetic;
        if (sy.contains("n_subjects")) {
          out.n_subjects = sy.at("n_subjects").get<std::size_t>();
        }
        if (sy.contains("trials_per_subject")) {
          out.trials_per_subject = sy.at("trials_per_subject").get<std::size_t>();
        }
        if (sy.contains("channels")) {
          out.channels = sy.at("channels").get<std::size_t>();
        }
        if (sy.contains("samples_per_channel")) {
          out.samples_per_channel =
              sy.at("samples_per_channel").get<std::size_t>();
        }
        if (sy.contains("informative_channels")) {
          out.informative_channels =
              sy.at("informative_channels").get<std::vector<std::size_t>>();
        }
        if (sy.contains("coupled_pairs")) {
          out.coupled_pairs.clear();
          for (const auto& pair : sy.at("coupled_pairs")) {
            if (!pair.is_array() || pair.size() != 2) {
              throw ConfigError("coupled_pairs entries must be [a, b] pairs");
            }
            out.coupled_pairs.emplace_back(pair[0].get<std::size_t>(),
                                           pair[1].get<std::size_t>());
          }
        }
        if (sy.contains("effect_size")) {
          out.effect_size = sy.at("effect_size").get<double>();
        }
        if (sy.contains("noise_sigma")) {
          out.noise_sigma = sy.at("noise_sigma").get<double>();
        }
        cfg.dataset.synthetic_seed = detail::opt_seed(sy, "seed");
      }
    }

    if (j.contains("split")) {
      const auto& sp = j.at("split");
      detail::check_keys(sp, "split", {"n_test_subjects", "seed"});
      if (sp.contains("n_test_subjects")) {
        cfg.split.n_test_subjects = sp.at("n_test_subjects").get<std::size_t>();
      }
      cfg.split.seed = detail::opt_seed(sp, "seed");
    }

    if (j.contains("embedder")) {
      const auto& emb = j.at("embedder");
      detail::check_keys(emb, "embedder",
                         {"embedding_dim", "epochs", "batch_size",
                          "learning_rate", "holdout_fraction",
                          "normalize_input", "arch"});
      std::size_t m = cfg.embedder.embedding_dim;
      if (emb.contains("embedding_dim")) {
        m = emb.at("embedding_dim").get<std::size_t>();
      }
      cfg.embedder = features::default_embedder_config(m);
      detail::train_from_json(emb, cfg.embedder.train);
      if (emb.contains("holdout_fraction")) {
        cfg.embedder.holdout_fraction =
            emb.at("holdout_fraction").get<double>();
      }
      if (emb.contains("normalize_input")) {
        cfg.embedder.normalize_input = emb.at("normalize_input").get<bool>();
      }
      if (emb.contains("arch")) {
        const auto& arch = emb.at("arch");
        detail::check_keys(arch, "embedder.arch", {"encoder_len", "layers"});
        cfg.embedder.arch = nn::specs_from_json(arch.at("layers"));
        cfg.embedder.encoder_len = arch.at("encoder_len").get<std::size_t>();
      }
    }

    if (j.contains("dsaee")) {
      const auto& dsae = j.at("dsaee");
      detail::check_keys(dsae, "dsaee",
                         {"components", "test_per_class", "hidden_widths",
                          "sparse_hidden", "lambda", "normal_class", "epochs",
                          "batch_size", "learning_rate"});
      detail::train_from_json(dsae, cfg.dsaee.train);
      if (dsae.contains("components")) {
        cfg.dsaee.components = dsae.at("components").get<std::size_t>();
      }
      if (dsae.contains("test_per_class")) {
        cfg.dsaee.test_per_class = dsae.at("test_per_class").get<std::size_t>();
      }
      if (dsae.contains("hidden_widths")) {
        cfg.dsaee.hidden_widths =
            dsae.at("hidden_widths").get<std::vector<std::size_t>>();
      }
      if (dsae.contains("sparse_hidden")) {
        cfg.dsaee.sparse_hidden = dsae.at("sparse_hidden").get<std::size_t>();
      }
      if (dsae.contains("lambda")) {
        cfg.dsaee.lambda = dsae.at("lambda").get<double>();
      }
      if (dsae.contains("normal_class")) {
        cfg.dsaee.normal_class = dsae.at("normal_class").get<std::size_t>();
      }
    }

    if (j.contains("evaluation")) {
      const auto& ev = j.at("evaluation");
      detail::check_keys(ev, "evaluation",
                         {"k_list", "classifiers", "folds", "regularization",
                          "fold_mode"});
      if (ev.contains("k_list")) {
        cfg.k_list = ev.at("k_list").get<std::vector<std::size_t>>();
      }
      if (ev.contains("classifiers")) {
        cfg.classifiers.clear();
        for (const auto& name : ev.at("classifiers")) {
          cfg.classifiers.push_back(
              eval::classifier_from_name(name.get<std::string>()));
        }
      }
      if (ev.contains("folds")) cfg.folds = ev.at("folds").get<std::size_t>();
      if (ev.contains("regularization")) {
        cfg.regularization = ev.at("regularization").get<double>();
      }
      if (ev.contains("fold_mode")) {
        cfg.fold_mode =
            eval::fold_mode_from_name(ev.at("fold_mode").get<std::string>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

// Fills null seeds from master_seed so the echoed config pins everything.
inline PipelineConfig resolve_pipeline_config(const PipelineConfig& cfg) {
  PipelineConfig out = cfg;
  if (!out.dataset.synthetic_seed) out.dataset.synthetic_seed = out.master_seed;
  if (!out.split.seed) out.split.seed = out.master_seed;
  out.dataset.synthetic.seed = *out.dataset.synthetic_seed;
  return out;
}

inline void validate_pipeline_config(const PipelineConfig& cfg) {
  if (cfg.dataset.source != "synthetic" && cfg.dataset.source != "uci" &&
      cfg.dataset.source != "cache") {
    throw ConfigError("dataset source must be synthetic, uci or cache");
  }
  if (cfg.dataset.source != "synthetic" && cfg.dataset.path.empty()) {
    throw ConfigError("dataset source '" + cfg.dataset.source +
                      "' needs a path");
  }
  if (cfg.dataset.condition) data::stimulus_from_name(*cfg.dataset.condition);
  if (cfg.dataset.source == "synthetic") {
    data::validate_synthetic_config(cfg.dataset.synthetic);
  }
  if (cfg.k_list.empty()) throw ConfigError("k_list must not be empty");
  for (const std::size_t k : cfg.k_list) {
    if (k == 0) throw ConfigError("k_list entries must be positive");
  }
  if (cfg.dataset.source == "synthetic") {
    for (const std::size_t k : cfg.k_list) {
      if (k > cfg.dataset.synthetic.channels) {
        throw ConfigError("selection size " + std::to_string(k) +
                          " exceeds channel count " +
                          std::to_string(cfg.dataset.synthetic.channels));
      }
    }
  }
  if (cfg.classifiers.empty()) {
    throw ConfigError("at least one classifier kind is required");
  }
  if (cfg.folds < 2) throw ConfigError("folds must be at least 2");
  if (!(cfg.regularization > 0.0)) {
    throw ConfigError("regularization must be positive");
  }
  if (cfg.embedder.embedding_dim == 0) {
    throw ConfigError("embedding_dim must be positive");
  }
  if (cfg.dsaee.components == 0) {
    throw ConfigError("ensemble needs at least one component");
  }
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

}  // namespace ernest::pipeline
