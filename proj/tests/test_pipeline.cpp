#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "ernest/data/cache.hpp"
#include "ernest/data/synthetic.hpp"
#include "ernest/errors.hpp"
#include "ernest/nn/layers.hpp"
#include "ernest/pipeline/config.hpp"
#include "ernest/pipeline/pipeline.hpp"

#include "helpers.hpp"

using ernest::ConfigError;
using ernest::read_file;
using ernest::data::generate_synthetic;
using ernest::data::SyntheticConfig;
using ernest::data::write_dataset_cache;
using ernest::eval::ClassifierKind;
using ernest::eval::FoldMode;
using ernest::features::default_embedder_config;
using ernest::pipeline::default_pipeline_config;
using ernest::pipeline::load_pipeline_config;
using ernest::pipeline::pipeline_config_from_json;
using ernest::pipeline::pipeline_config_to_json;
using ernest::pipeline::PipelineConfig;
using ernest::pipeline::resolve_pipeline_config;
using ernest::pipeline::run_pipeline;
using ernest::pipeline::validate_pipeline_config;
using nlohmann::json;

namespace {

// Small enough to train in well under a second per stage.
PipelineConfig tiny_config(const std::filesystem::path& out_dir) {
  PipelineConfig cfg = default_pipeline_config();
  cfg.dataset.synthetic.n_subjects = 8;
  cfg.dataset.synthetic.trials_per_subject = 4;
  cfg.dataset.synthetic.channels = 3;
  cfg.dataset.synthetic.samples_per_channel = 16;
  cfg.dataset.synthetic.informative_channels = {0};
  cfg.dataset.synthetic.coupled_pairs = {};
  cfg.dataset.synthetic.effect_size = 2.5;
  cfg.split.n_test_subjects = 2;
  cfg.embedder = default_embedder_config(4);
  cfg.embedder.arch = {ernest::nn::DenseSpec{4}, ernest::nn::ReLUSpec{},
                       ernest::nn::DenseSpec{2}, ernest::nn::SoftmaxSpec{}};
  cfg.embedder.encoder_len = 2;
  cfg.embedder.train.epochs = 5;
  cfg.embedder.train.batch_size = 64;
  cfg.embedder.train.adam.lr = 0.01;
  cfg.dsaee.components = 2;
  cfg.dsaee.test_per_class = 1;
  cfg.dsaee.hidden_widths = {4};
  cfg.dsaee.sparse_hidden = 0;
  cfg.dsaee.train.epochs = 5;
  cfg.dsaee.train.batch_size = 64;
  cfg.k_list = {1, 3};
  cfg.folds = 2;
  cfg.master_seed = 11;
  cfg.output_dir = out_dir.string();
  return cfg;
}

bool stage_reused(const ernest::pipeline::PipelineOutcome& outcome,
                  const std::string& name) {
  for (const auto& stage : outcome.stages) {
    if (stage.name == name) return stage.reused;
  }
  FAIL("no stage named " + name);
  return false;
}

}  // namespace

TEST_CASE("pipeline config survives a json round trip") {
  PipelineConfig cfg = default_pipeline_config();
  cfg.dataset.source = "uci";
  cfg.dataset.path = "/data/eeg";
  cfg.dataset.blacklist = {"X"};
  cfg.dataset.condition = "S2_nomatch";
  cfg.dataset.synthetic.channels = 9;
  cfg.dataset.synthetic.informative_channels = {1, 2};
  cfg.dataset.synthetic.coupled_pairs = {{3, 4}};
  cfg.dataset.synthetic.effect_size = 1.5;
  cfg.dataset.synthetic.noise_sigma = 2.0;
  cfg.dataset.synthetic_seed = 7;
  cfg.split.n_test_subjects = 6;
  cfg.split.seed = 41;
  cfg.embedder = default_embedder_config(3);
  cfg.embedder.train.epochs = 12;
  cfg.embedder.train.batch_size = 77;
  cfg.embedder.train.adam.lr = 0.005;
  cfg.embedder.holdout_fraction = 0.2;
  cfg.embedder.normalize_input = false;
  cfg.dsaee.components = 4;
  cfg.dsaee.test_per_class = 2;
  cfg.dsaee.hidden_widths = {6, 3, 6};
  cfg.dsaee.sparse_hidden = 1;
  cfg.dsaee.lambda = 1e-3;
  cfg.dsaee.normal_class = 1;
  cfg.dsaee.train.epochs = 9;
  cfg.dsaee.train.batch_size = 33;
  cfg.dsaee.train.adam.lr = 0.002;
  cfg.k_list = {3, 9};
  cfg.classifiers = {ClassifierKind::LogisticRegression};
  cfg.folds = 5;
  cfg.regularization = 0.5;
  cfg.fold_mode = FoldMode::SubjectGrouped;
  cfg.master_seed = 99;
  cfg.output_dir = "runs/x";
  cfg.jobs = 3;

  const json j = pipeline_config_to_json(cfg);
  const PipelineConfig back = pipeline_config_from_json(j);
  CHECK(pipeline_config_to_json(back) == j);
  CHECK(back.dataset.condition.value() == "S2_nomatch");
  CHECK(back.fold_mode == FoldMode::SubjectGrouped);
  REQUIRE(back.classifiers.size() == 1);
  CHECK(back.classifiers[0] == ClassifierKind::LogisticRegression);
  CHECK(back.embedder.embedding_dim == 3);
  CHECK(back.embedder.train.batch_size == 77);
  CHECK(back.dsaee.normal_class == 1);
  CHECK(back.dataset.synthetic_seed.value() == 7);
  CHECK(back.split.seed.value() == 41);

  SECTION("an empty document means the defaults") {
    const PipelineConfig defaults = pipeline_config_from_json(json::object());
    CHECK(pipeline_config_to_json(defaults) ==
          pipeline_config_to_json(default_pipeline_config()));
    CHECK_FALSE(defaults.split.seed.has_value());
  }

  SECTION("null seeds resolve to the master seed") {
    PipelineConfig unresolved = default_pipeline_config();
    unresolved.master_seed = 123;
    const PipelineConfig resolved = resolve_pipeline_config(unresolved);
    CHECK(resolved.dataset.synthetic_seed.value() == 123);
    CHECK(resolved.split.seed.value() == 123);
    CHECK(resolved.dataset.synthetic.seed == 123);
    // explicit seeds win
    unresolved.dataset.synthetic_seed = 9;
    CHECK(resolve_pipeline_config(unresolved).dataset.synthetic.seed == 9);
  }

  SECTION("loading from disk matches the in-memory parse") {
    const auto dir = testutil::temp_dir("pipeline_config");
    const auto path = dir / "config.json";
    ernest::write_file(path, j.dump(2));
    const PipelineConfig loaded = load_pipeline_config(path);
    CHECK(pipeline_config_to_json(loaded) == j);
    ernest::write_file(path, "not json {");
    CHECK_THROWS_AS(load_pipeline_config(path), ConfigError);
  }
}

TEST_CASE("unknown config keys are rejected with their full path") {
  const auto expect_key_error = [](const json& doc, const std::string& needle) {
    try {
      pipeline_config_from_json(doc);
      FAIL("expected a config error mentioning " + needle);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_key_error(json{{"bogus", 1}}, "bogus");
  expect_key_error(json{{"dataset", {{"sorce", "uci"}}}}, "dataset.sorce");
  expect_key_error(json{{"evaluation", {{"kfold", 3}}}}, "evaluation.kfold");
  expect_key_error(json{{"dataset", {{"synthetic", {{"channel", 2}}}}}},
                   "dataset.synthetic.channel");
  expect_key_error(json{{"dsaee", {{"width", 8}}}}, "dsaee.width");

  CHECK_THROWS_AS(pipeline_config_from_json(
                      json{{"dataset",
                            {{"synthetic",
                              {{"coupled_pairs", json::array({json::array(
                                   {1, 2, 3})})}}}}}}),
                  ConfigError);
  // wrong value types surface as config errors, not raw json exceptions
  CHECK_THROWS_AS(pipeline_config_from_json(json{{"master_seed", "twelve"}}),
                  ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_json(json{{"evaluation",
                                                  {{"fold_mode", "loocv"}}}}),
                  ConfigError);
}

TEST_CASE("config validation rejects impossible requests before any work") {
  const PipelineConfig base = tiny_config("out");
  CHECK_NOTHROW(validate_pipeline_config(base));

  const auto rejects = [&](const auto& mutate) {
    PipelineConfig bad = base;
    mutate(bad);
    CHECK_THROWS_AS(validate_pipeline_config(bad), ConfigError);
  };
  rejects([](PipelineConfig& c) { c.dataset.source = "csv"; });
  rejects([](PipelineConfig& c) { c.dataset.source = "uci"; });  // no path
  rejects([](PipelineConfig& c) { c.dataset.condition = "bogus"; });
  rejects([](PipelineConfig& c) { c.k_list = {}; });
  rejects([](PipelineConfig& c) { c.k_list = {0}; });
  rejects([](PipelineConfig& c) { c.k_list = {4}; });  // only 3 channels
  rejects([](PipelineConfig& c) { c.folds = 1; });
  rejects([](PipelineConfig& c) { c.regularization = 0.0; });
  rejects([](PipelineConfig& c) { c.classifiers = {}; });
  rejects([](PipelineConfig& c) { c.embedder.embedding_dim = 0; });
  rejects([](PipelineConfig& c) { c.dsaee.components = 0; });
  rejects([](PipelineConfig& c) { c.output_dir = ""; });
  rejects([](PipelineConfig& c) { c.dataset.synthetic.noise_sigma = 0.0; });

  SECTION("an oversized selection fails before anything is written") {
    const auto dir = testutil::temp_dir("pipeline_invalid");
    PipelineConfig bad = tiny_config(dir);
    bad.k_list = {4};
    CHECK_THROWS_AS(run_pipeline(bad, true), ConfigError);
    CHECK_FALSE(std::filesystem::exists(dir / "config.resolved.json"));
  }
}

TEST_CASE("tiny end to end run writes every artifact and resumes bitwise") {
  const auto dir = testutil::temp_dir("pipeline_e2e");
  const PipelineConfig cfg = tiny_config(dir);

  const auto first = run_pipeline(cfg, true);
  REQUIRE(first.stages.size() == 5);
  const std::vector<std::string> expected_order = {
      "dataset", "split", "embedders", "selection", "evaluate"};
  for (std::size_t i = 0; i < expected_order.size(); ++i) {
    CHECK(first.stages[i].name == expected_order[i]);
    CHECK_FALSE(first.stages[i].reused);
  }
  for (const char* rel :
       {"config.resolved.json", "dataset.erns", "dataset_summary.json",
        "split.json", "embedders/manifest.json", "embedders/channel_0.ernm",
        "embedders/channel_2.ernm", "trial_matrix.csv", "accuracy_ranking.csv",
        "re_matrix.csv", "delta_ranking.csv", "eval.json", "eval.csv",
        "stages/dataset.json", "stages/evaluate.json"}) {
    INFO(rel);
    CHECK(std::filesystem::exists(dir / rel));
  }

  const json resolved = json::parse(read_file(dir / "config.resolved.json"));
  CHECK(resolved.at("dataset").at("synthetic").at("seed") == 11);
  CHECK(resolved.at("split").at("seed") == 11);
  CHECK(first.dataset_summary.at("trials") == 32);
  CHECK(first.dataset_summary.at("channels") == 3);
  CHECK(first.dataset_summary.at("ground_truth_channels") ==
        json(std::vector<std::size_t>{0}));
  CHECK(first.delta_ranking.metric == "delta_re");
  CHECK(first.delta_ranking.entries.size() == 3);
  CHECK(first.accuracy_ranking.metric == "holdout_accuracy");
  CHECK(first.eval.at("folds") == 2);
  CHECK(first.eval.at("arms").contains("delta_re"));
  CHECK(first.eval.at("arms").contains("holdout_accuracy"));
  CHECK(first.eval.at("arms").at("delta_re").at("LR").contains("1"));
  CHECK(first.eval.at("arms").at("delta_re").at("LR").contains("3"));

  const std::string eval_bytes = read_file(dir / "eval.json");
  const std::string ranking_bytes = read_file(dir / "delta_ranking.csv");

  // identical config: every stage is reused and nothing changes on disk
  const auto second = run_pipeline(cfg, true);
  for (const auto& stage : second.stages) {
    INFO(stage.name);
    CHECK(stage.reused);
  }
  CHECK(read_file(dir / "eval.json") == eval_bytes);
  CHECK(read_file(dir / "delta_ranking.csv") == ranking_bytes);

  // worker count is not part of any stage key
  PipelineConfig more_jobs = cfg;
  more_jobs.jobs = 4;
  const auto third = run_pipeline(more_jobs, true);
  for (const auto& stage : third.stages) {
    INFO(stage.name);
    CHECK(stage.reused);
  }
  CHECK(read_file(dir / "eval.json") == eval_bytes);

  // wiping late artifacts resumes from the embedders without retraining
  // them, and the recomputed tail is byte-identical
  std::filesystem::remove(dir / "re_matrix.csv");
  std::filesystem::remove(dir / "stages" / "selection.json");
  std::filesystem::remove(dir / "eval.json");
  const auto resumed = run_pipeline(cfg, true);
  CHECK(stage_reused(resumed, "dataset"));
  CHECK(stage_reused(resumed, "split"));
  CHECK(stage_reused(resumed, "embedders"));
  CHECK_FALSE(stage_reused(resumed, "selection"));
  CHECK_FALSE(stage_reused(resumed, "evaluate"));
  CHECK(read_file(dir / "eval.json") == eval_bytes);
  CHECK(read_file(dir / "delta_ranking.csv") == ranking_bytes);

  // touching only the ensemble settings recomputes selection onwards
  PipelineConfig wider = cfg;
  wider.dsaee.components = 3;
  const auto fourth = run_pipeline(wider, true);
  CHECK(stage_reused(fourth, "dataset"));
  CHECK(stage_reused(fourth, "split"));
  CHECK(stage_reused(fourth, "embedders"));
  CHECK_FALSE(stage_reused(fourth, "selection"));
  CHECK_FALSE(stage_reused(fourth, "evaluate"));
  CHECK(fourth.eval.at("arms").contains("delta_re"));
}

TEST_CASE("cache sourced pipeline runs without ground truth or ablation") {
  const auto dir = testutil::temp_dir("pipeline_cache");
  SyntheticConfig synth;
  synth.n_subjects = 6;
  synth.trials_per_subject = 4;
  synth.channels = 2;
  synth.samples_per_channel = 16;
  synth.informative_channels = {1};
  synth.effect_size = 2.5;
  synth.seed = 3;
  const auto source = generate_synthetic(synth);
  const auto cache_path = dir / "input.erns";
  write_dataset_cache(source.dataset, cache_path);

  PipelineConfig cfg = tiny_config(dir / "out");
  cfg.dataset.source = "cache";
  cfg.dataset.path = cache_path.string();
  cfg.k_list = {2};
  cfg.master_seed = 5;

  const auto outcome = run_pipeline(cfg, false);
  REQUIRE(outcome.stages.size() == 5);
  for (const auto& stage : outcome.stages) CHECK_FALSE(stage.reused);
  CHECK_FALSE(outcome.dataset_summary.contains("ground_truth_channels"));
  CHECK(outcome.dataset_summary.at("channels") == 2);
  CHECK(outcome.eval.at("arms").contains("delta_re"));
  CHECK_FALSE(outcome.eval.at("arms").contains("holdout_accuracy"));
  CHECK(std::filesystem::exists(dir / "out" / "accuracy_ranking.csv"));

  SECTION("a selection wider than the cached channel count fails") {
    PipelineConfig bad = cfg;
    bad.k_list = {3};
    bad.output_dir = (dir / "bad").string();
    CHECK_THROWS_AS(run_pipeline(bad, false), ConfigError);
  }
}
