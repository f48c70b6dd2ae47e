#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ernest/data/cache.hpp"
#include "ernest/data/dataset.hpp"
#include "ernest/data/synthetic.hpp"
#include "ernest/errors.hpp"
#include "ernest/eval/evaluate.hpp"
#include "ernest/features/embedder.hpp"
#include "ernest/io_util.hpp"
#include "ernest/pipeline/config.hpp"
#include "ernest/selection/dsaee.hpp"
#include "ernest/selection/ranking.hpp"

namespace ernest::pipeline {

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t hash_outputs(const std::filesystem::path& root,
                                  const std::vector<std::string>& outputs) {
  std::uint64_t h = fnv1a64("", 0);
  for (const auto& rel : outputs) {
    h = fnv1a64(rel, h);
    const std::string bytes = read_file(root / rel);
    h = fnv1a64(bytes.data(), bytes.size(), h);
  }
  return h;
}

}  // namespace detail

struct StageStatus {
  std::string name;
  bool reused = false;
  double seconds = 0.0;
};

// Drives one checkpointed stage at a time. A stage reruns only when its
// key (config subtree plus the upstream chain) or its on-disk outputs
// changed; artifacts are always consumed from disk afterwards so resumed
// and uninterrupted runs stay bitwise identical.
class StageLedger {
 public:
  StageLedger(std::filesystem::path out_dir, std::ostream* log)
      : out_(std::move(out_dir)), log_(log) {}

  StageStatus run(const std::string& name, const nlohmann::json& subtree,
                  const std::vector<std::string>& outputs,
                  const std::function<void()>& execute) {
    const std::uint64_t key =
        fnv1a64(name + "\n" + subtree.dump() + "\n" + detail::hex64(prev_key_) +
                detail::hex64(prev_hash_));
    const std::filesystem::path manifest_path =
        out_ / "stages" / (name + ".json");
    StageStatus status;
    status.name = name;
    const auto start = std::chrono::steady_clock::now();
    try {
      status.reused = can_reuse(manifest_path, key, outputs);
      if (!status.reused) {
        execute();
        const std::uint64_t h = detail::hash_outputs(out_, outputs);
        const nlohmann::json manifest = {{"key", detail::hex64(key)},
                                         {"output_hash", detail::hex64(h)},
                                         {"outputs", outputs}};
        write_file(manifest_path, manifest.dump(2) + "\n");
        prev_hash_ = h;
      } else {
        prev_hash_ = detail::hash_outputs(out_, outputs);
      }
    } catch (const Error& e) {
      throw Error(e.category(),
                  "stage " + name + ": " + std::string(e.what()));
    }
    prev_key_ = key;
    status.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (log_) {
      char timing[32];
      std::snprintf(timing, sizeof(timing), "%.1fs", status.seconds);
      *log_ << "[" << name << "] " << (status.reused ? "reused" : "done")
            << " (" << timing << ")\n";
    }
    return status;
  }

 private:
  bool can_reuse(const std::filesystem::path& manifest_path, std::uint64_t key,
                 const std::vector<std::string>& outputs) const {
    if (!std::filesystem::exists(manifest_path)) return false;
    try {
      const auto manifest = nlohmann::json::parse(read_file(manifest_path));
      if (manifest.at("key") != detail::hex64(key)) return false;
      if (manifest.at("outputs") != nlohmann::json(outputs)) return false;
      for (const auto& rel : outputs) {
        if (!std::filesystem::exists(out_ / rel)) return false;
      }
      return manifest.at("output_hash") ==
             detail::hex64(detail::hash_outputs(out_, outputs));
    } catch (const std::exception&) {
      return false;  // damaged manifest or artifact: recompute
    }
  }

  std::filesystem::path out_;
  std::ostream* log_;
  std::uint64_t prev_key_ = 0;
  std::uint64_t prev_hash_ = 0;
};

struct PipelineOutcome {
  PipelineConfig config;  // resolved
  std::filesystem::path output_dir;
  std::vector<StageStatus> stages;
  nlohmann::json dataset_summary;
  nlohmann::json eval;
  selection::ChannelRanking delta_ranking;
  selection::ChannelRanking accuracy_ranking;
};

inline nlohmann::json dataset_summary_json(const data::Dataset& ds,
                                           const std::vector<std::size_t>* gt) {
  std::size_t class_counts[2] = {0, 0};
  for (const auto& trial : ds.trials) ++class_counts[trial.class_label];
  nlohmann::json j = {{"subjects", ds.subject_ids().size()},
                      {"trials", ds.trials.size()},
                      {"channels", ds.channel_count()},
                      {"samples_per_channel", ds.samples_per_channel},
                      {"channel_names", ds.channel_names},
                      {"trials_class0", class_counts[0]},
                      {"trials_class1", class_counts[1]}};
  if (gt) j["ground_truth_channels"] = *gt;
  return j;
}

// split -> embedders -> selection -> evaluation, checkpointed per stage.
// `ablation` adds the per-channel-accuracy arm next to the ensemble arm.
inline PipelineOutcome run_pipeline(const PipelineConfig& raw, bool ablation,
                                    std::ostream* log = nullptr) {
  const PipelineConfig cfg = resolve_pipeline_config(raw);
  validate_pipeline_config(cfg);
  const std::filesystem::path out = cfg.output_dir;
  std::filesystem::create_directories(out / "stages");
  const nlohmann::json cfg_json = pipeline_config_to_json(cfg);
  write_file(out / "config.resolved.json", cfg_json.dump(2) + "\n");

  PipelineOutcome outcome;
  outcome.config = cfg;
  outcome.output_dir = out;
  StageLedger ledger(out, log);

  outcome.stages.push_back(ledger.run(
      "dataset", cfg_json.at("dataset"),
      {"dataset.erns", "dataset_summary.json"}, [&] {
        data::Dataset ds;
        const std::vector<std::size_t>* gt = nullptr;
        std::vector<std::size_t> ground_truth;
        if (cfg.dataset.source == "synthetic") {
          auto synth = data::generate_synthetic(cfg.dataset.synthetic);
          ds = std::move(synth.dataset);
          ground_truth = std::move(synth.ground_truth);
          gt = &ground_truth;
        } else if (cfg.dataset.source == "uci") {
          std::optional<data::Stimulus> condition;
          if (cfg.dataset.condition) {
            condition = data::stimulus_from_name(*cfg.dataset.condition);
          }
          ds = data::load_dataset(cfg.dataset.path, cfg.dataset.blacklist,
                                  condition ? &*condition : nullptr);
        } else {
          ds = data::read_dataset_cache(cfg.dataset.path);
        }
        data::write_dataset_cache(ds, out / "dataset.erns");
        write_file(out / "dataset_summary.json",
                   dataset_summary_json(ds, gt).dump(2) + "\n");
      }));
  const data::Dataset ds = data::read_dataset_cache(out / "dataset.erns");
  outcome.dataset_summary =
      nlohmann::json::parse(read_file(out / "dataset_summary.json"));
  for (const std::size_t k : cfg.k_list) {
    if (k > ds.channel_count()) {
      throw ConfigError("selection size " + std::to_string(k) +
                        " exceeds channel count " +
                        std::to_string(ds.channel_count()));
    }
  }

  outcome.stages.push_back(
      ledger.run("split", cfg_json.at("split"), {"split.json"}, [&] {
        const data::SubjectSplit split = data::split_subjects(
            ds, cfg.split.n_test_subjects, *cfg.split.seed);
        const nlohmann::json j = {{"train_subjects", split.train_subject_ids},
                                  {"test_subjects", split.test_subject_ids}};
        write_file(out / "split.json", j.dump(2) + "\n");
      }));
  const auto split_json = nlohmann::json::parse(read_file(out / "split.json"));
  const data::Dataset train = data::subset_by_subjects(
      ds, split_json.at("train_subjects").get<std::vector<std::string>>());
  const data::Dataset test = data::subset_by_subjects(
      ds, split_json.at("test_subjects").get<std::vector<std::string>>());

  std::vector<std::string> embedder_outputs = {"embedders/manifest.json"};
  for (std::size_t c = 0; c < ds.channel_count(); ++c) {
    embedder_outputs.push_back("embedders/channel_" + std::to_string(c) +
                               ".ernm");
  }
  embedder_outputs.push_back("trial_matrix.csv");
  embedder_outputs.push_back("accuracy_ranking.csv");
  nlohmann::json embedder_subtree = cfg_json.at("embedder");
  embedder_subtree["master_seed"] = cfg.master_seed;
  outcome.stages.push_back(
      ledger.run("embedders", embedder_subtree, embedder_outputs, [&] {
        const auto trained = features::train_channel_embedders(
            train, cfg.embedder, cfg.master_seed, cfg.jobs);
        features::save_embedder_bundle(trained, out / "embedders");
        // models round-trip through 32-bit storage, so downstream work
        // uses the reloaded copy to stay identical under resume
        const auto reloaded = features::load_embedder_bundle(out / "embedders");
        // the selection matrix covers only embedder-holdout subjects:
        // rows the embedders fit would carry memorized label structure
        // into every channel's reconstruction errors
        const auto hold = features::pick_holdout_subjects(
            train, cfg.embedder.holdout_fraction, cfg.master_seed);
        const auto t = features::build_trial_matrix(
            reloaded,
            data::subset_by_subjects(
                train, std::vector<std::string>(hold.begin(), hold.end())),
            cfg.jobs);
        write_file(out / "trial_matrix.csv", features::trial_matrix_to_csv(t));
        write_file(out / "accuracy_ranking.csv",
                   features::accuracy_ranking_to_csv(
                       features::channel_accuracy_ranking(reloaded), reloaded));
      }));
  const auto embedders = features::load_embedder_bundle(out / "embedders");
  const auto trial_matrix =
      features::trial_matrix_from_csv(read_file(out / "trial_matrix.csv"));
  outcome.accuracy_ranking =
      selection::ranking_from_csv(read_file(out / "accuracy_ranking.csv"));

  nlohmann::json selection_subtree = cfg_json.at("dsaee");
  selection_subtree["master_seed"] = cfg.master_seed;
  outcome.stages.push_back(ledger.run(
      "selection", selection_subtree, {"re_matrix.csv", "delta_ranking.csv"},
      [&] {
        const auto re = selection::dsaee_run(trial_matrix, cfg.dsaee,
                                             cfg.master_seed, cfg.jobs);
        const auto pairs = selection::channel_re_by_class(re);
        const auto ranking = selection::delta_re(pairs);
        write_file(out / "re_matrix.csv", selection::re_matrix_to_csv(re));
        write_file(out / "delta_ranking.csv",
                   selection::delta_ranking_to_csv(ranking, ds.channel_names,
                                                   pairs));
      }));
  outcome.delta_ranking =
      selection::ranking_from_csv(read_file(out / "delta_ranking.csv"));

  nlohmann::json eval_subtree = cfg_json.at("evaluation");
  eval_subtree["master_seed"] = cfg.master_seed;
  eval_subtree["ablation"] = ablation;
  outcome.stages.push_back(
      ledger.run("evaluate", eval_subtree, {"eval.json", "eval.csv"}, [&] {
        eval::EvalReport report;
        report.k_order = cfg.k_list;
        report.folds = cfg.folds;
        report.seed = cfg.master_seed;
        report.fold_mode = eval::fold_mode_name(cfg.fold_mode);
        std::vector<const selection::ChannelRanking*> arms = {
            &outcome.delta_ranking};
        if (ablation) arms.push_back(&outcome.accuracy_ranking);
        bool folds_recorded = false;
        for (const auto* ranking : arms) {
          for (const std::size_t k : cfg.k_list) {
            const auto selected = selection::select_top_k(*ranking, k);
            const auto a =
                eval::reduce_new_trials(embedders, selected, test, cfg.jobs);
            if (!folds_recorded) {
              const auto fold_of_row =
                  eval::make_folds(a.labels, a.subjects, cfg.folds,
                                   cfg.master_seed, cfg.fold_mode);
              report.fold_subjects.assign(cfg.folds, {});
              for (std::size_t r = 0; r < fold_of_row.size(); ++r) {
                report.fold_subjects[fold_of_row[r]].push_back(a.subjects[r]);
              }
              for (auto& ids : report.fold_subjects) {
                std::sort(ids.begin(), ids.end());
                ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
              }
              folds_recorded = true;
            }
            for (const auto kind : cfg.classifiers) {
              report.cells[ranking->metric][eval::classifier_name(kind)][k] =
                  eval::cross_validate(a.values, a.labels, a.subjects, kind,
                                       cfg.folds, cfg.master_seed,
                                       cfg.regularization, cfg.fold_mode);
            }
          }
        }
        write_file(out / "eval.json",
                   eval::eval_report_to_json(report).dump(2) + "\n");
        write_file(out / "eval.csv", eval::eval_report_to_csv(report));
      }));
  outcome.eval = nlohmann::json::parse(read_file(out / "eval.json"));
  return outcome;
}

}  // namespace ernest::pipeline
