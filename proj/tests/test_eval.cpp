#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "ernest/data/dataset.hpp"
#include "ernest/data/synthetic.hpp"
#include "ernest/errors.hpp"
#include "ernest/eval/evaluate.hpp"
#include "ernest/selection/ranking.hpp"

#include "helpers.hpp"

using ernest::ConfigError;
using ernest::EmptyDatasetError;
using ernest::SchemaError;
using ernest::ShapeError;
using ernest::SplitError;
using ernest::data::generate_synthetic;
using ernest::data::split_by_subject;
using ernest::data::SyntheticConfig;
using ernest::eval::ClassifierKind;
using ernest::eval::cross_validate;
using ernest::eval::eval_report_to_csv;
using ernest::eval::eval_report_to_json;
using ernest::eval::ExperimentConfig;
using ernest::eval::fold_mode_from_name;
using ernest::eval::fold_mode_name;
using ernest::eval::FoldMode;
using ernest::eval::make_folds;
using ernest::eval::reduce_new_trials;
using ernest::eval::reduced_matrix_to_csv;
using ernest::eval::ReducedTrialMatrix;
using ernest::eval::run_experiment;
using ernest::features::build_trial_matrix;
using ernest::nn::Tensor;
using ernest::selection::select_top_k;

namespace {

ernest::data::Dataset tiny_dataset(std::size_t subjects, std::size_t trials,
                                   std::size_t channels, std::size_t samples,
                                   std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_subjects = subjects;
  cfg.trials_per_subject = trials;
  cfg.channels = channels;
  cfg.samples_per_channel = samples;
  cfg.seed = seed;
  return generate_synthetic(cfg).dataset;
}

}  // namespace

TEST_CASE("stratified folds partition rows and balance classes") {
  std::vector<std::size_t> labels;
  std::vector<std::string> subjects;
  for (std::size_t i = 0; i < 40; ++i) {
    labels.push_back(i % 2);
    subjects.push_back("s" + std::to_string(i % 5));
  }

  const auto folds =
      make_folds(labels, subjects, 4, 17, FoldMode::StratifiedRows);
  REQUIRE(folds.size() == 40);
  std::size_t per_fold[4] = {0, 0, 0, 0};
  std::size_t per_fold_class1[4] = {0, 0, 0, 0};
  for (std::size_t r = 0; r < folds.size(); ++r) {
    REQUIRE(folds[r] < 4);
    ++per_fold[folds[r]];
    per_fold_class1[folds[r]] += labels[r];
  }
  for (std::size_t f = 0; f < 4; ++f) {
    REQUIRE(per_fold[f] == 10);
    REQUIRE(per_fold_class1[f] == 5);
  }

  REQUIRE(make_folds(labels, subjects, 4, 17, FoldMode::StratifiedRows) ==
          folds);
  REQUIRE(make_folds(labels, subjects, 4, 18, FoldMode::StratifiedRows) !=
          folds);
}

TEST_CASE("subject-grouped folds keep each subject together") {
  std::vector<std::size_t> labels;
  std::vector<std::string> subjects;
  for (std::size_t s = 0; s < 8; ++s) {
    for (std::size_t t = 0; t < 3; ++t) {
      labels.push_back(s % 2);
      subjects.push_back("sub" + std::to_string(s));
    }
  }

  const auto folds =
      make_folds(labels, subjects, 2, 4, FoldMode::SubjectGrouped);
  std::map<std::string, std::set<std::size_t>> seen;
  for (std::size_t r = 0; r < folds.size(); ++r) {
    seen[subjects[r]].insert(folds[r]);
  }
  std::size_t fold0_subjects = 0;
  for (const auto& [id, fold_set] : seen) {
    REQUIRE(fold_set.size() == 1);
    fold0_subjects += fold_set.count(0);
  }
  REQUIRE(fold0_subjects == 4);  // two subjects per class per fold
}

TEST_CASE("fold construction validates its inputs") {
  const std::vector<std::size_t> labels = {0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<std::string> subjects = {"a", "a", "b", "b",
                                             "c", "c", "d", "d"};
  REQUIRE_THROWS_AS(make_folds(labels, subjects, 1, 0, FoldMode::StratifiedRows),
                    ConfigError);
  REQUIRE_THROWS_AS(make_folds(labels, subjects, 5, 0, FoldMode::StratifiedRows),
                    ConfigError);
  REQUIRE_THROWS_AS(
      make_folds(labels, subjects, 3, 0, FoldMode::SubjectGrouped),
      ConfigError);
  REQUIRE_THROWS_AS(make_folds(labels, {"a"}, 2, 0, FoldMode::StratifiedRows),
                    ShapeError);

  REQUIRE(fold_mode_name(FoldMode::StratifiedRows) == "stratified_rows");
  REQUIRE(fold_mode_from_name("subject_grouped") == FoldMode::SubjectGrouped);
  REQUIRE_THROWS_AS(fold_mode_from_name("loocv"), ConfigError);
}

TEST_CASE("duplicated rows cross-validate with zero variance") {
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  std::vector<std::string> subjects;
  for (std::size_t i = 0; i < 10; ++i) {
    rows.push_back({0.0, 1.0});
    labels.push_back(0);
    rows.push_back({1.0, 0.0});
    labels.push_back(1);
    subjects.push_back("s0");
    subjects.push_back("s1");
  }
  const Tensor x = testutil::tensor2(rows);

  const auto cell = cross_validate(x, labels, subjects,
                                   ClassifierKind::LogisticRegression, 5, 3);
  REQUIRE(cell.fold_auroc.size() == 5);
  REQUIRE(cell.auroc.mean == 1.0);
  REQUIRE(cell.auroc.std == 0.0);
  REQUIRE(cell.acc.mean == 1.0);
  REQUIRE(cell.acc.std == 0.0);

  const auto again = cross_validate(x, labels, subjects,
                                    ClassifierKind::LogisticRegression, 5, 3);
  REQUIRE(again.fold_auroc == cell.fold_auroc);
}

TEST_CASE("reduced matrices follow the selection order") {
  const auto ds = tiny_dataset(4, 3, 4, 32, 41);
  const auto embedders = testutil::random_embedders(ds.channel_names, 32, 3, 2);
  const auto full = build_trial_matrix(embedders, ds);

  const ReducedTrialMatrix a = reduce_new_trials(embedders, {2, 0}, ds);
  REQUIRE(a.selected_channels == std::vector<std::size_t>{2, 0});
  REQUIRE(a.embedding_dim == 3);
  REQUIRE(a.values.rows() == ds.trials.size());
  REQUIRE(a.values.cols() == 6);
  for (std::size_t r = 0; r < a.values.rows(); ++r) {
    REQUIRE(a.labels[r] == ds.trials[r].class_label);
    REQUIRE(a.subjects[r] == ds.trials[r].subject_id);
    for (std::size_t m = 0; m < 3; ++m) {
      REQUIRE(a.values.at(r, m) == full.values.at(r, 2 * 3 + m));
      REQUIRE(a.values.at(r, 3 + m) == full.values.at(r, 0 * 3 + m));
    }
  }

  const std::string csv = reduced_matrix_to_csv(a);
  REQUIRE(csv.rfind("subject,label,ch2_0,ch2_1,ch2_2,ch0_0", 0) == 0);

  REQUIRE_THROWS_AS(reduce_new_trials(embedders, {}, ds), ConfigError);
  REQUIRE_THROWS_AS(reduce_new_trials(embedders, {9}, ds), SchemaError);
  auto wrong = embedders;
  wrong[0].channel_name = "other";
  REQUIRE_THROWS_AS(reduce_new_trials(wrong, {0}, ds), SchemaError);
  ernest::data::Dataset empty = ds;
  empty.trials.clear();
  REQUIRE_THROWS_AS(reduce_new_trials(embedders, {0}, empty),
                    EmptyDatasetError);
}

TEST_CASE("a full experiment reports both arms and matches at K = C") {
  SyntheticConfig data_cfg;
  data_cfg.n_subjects = 12;
  data_cfg.trials_per_subject = 8;
  data_cfg.channels = 4;
  data_cfg.samples_per_channel = 64;
  data_cfg.informative_channels = {1};
  data_cfg.effect_size = 2.5;
  data_cfg.seed = 29;
  const auto ds = generate_synthetic(data_cfg).dataset;
  const auto [train_ds, test_ds] = split_by_subject(ds, 4, 29);

  ExperimentConfig cfg;
  cfg.embedder = ernest::features::default_embedder_config(4);
  cfg.embedder.train.epochs = 30;
  cfg.embedder.train.batch_size = 256;
  cfg.embedder.train.adam.lr = 3e-3;
  cfg.dsaee.components = 3;
  cfg.dsaee.test_per_class = 2;
  cfg.dsaee.hidden_widths = {6};
  cfg.dsaee.sparse_hidden = 0;
  cfg.dsaee.train.epochs = 40;
  cfg.folds = 4;
  cfg.master_seed = 29;

  const auto result = run_experiment(train_ds, test_ds, {2, 4}, cfg);
  REQUIRE(result.report.cells.count("delta_re") == 1);
  REQUIRE(result.report.cells.count("holdout_accuracy") == 1);
  REQUIRE(result.report.k_order == std::vector<std::size_t>{2, 4});

  // With every channel selected the arms see the same feature set, so the
  // metrics agree up to column order effects in the optimizer.
  const auto delta_all = select_top_k(result.delta_ranking, 4);
  const auto acc_all = select_top_k(result.accuracy_ranking, 4);
  REQUIRE(std::set<std::size_t>(delta_all.begin(), delta_all.end()) ==
          std::set<std::size_t>(acc_all.begin(), acc_all.end()));
  for (const char* kind : {"SVM", "LR"}) {
    const auto& d = result.report.cells.at("delta_re").at(kind).at(4);
    const auto& h = result.report.cells.at("holdout_accuracy").at(kind).at(4);
    REQUIRE(d.auroc.mean == Catch::Approx(h.auroc.mean).margin(1e-6));
    REQUIRE(d.acc.mean == Catch::Approx(h.acc.mean).margin(1e-6));
  }

  SECTION("fold subjects cover the test group exactly") {
    REQUIRE(result.report.fold_subjects.size() == cfg.folds);
    std::vector<std::string> flat;
    for (const auto& ids : result.report.fold_subjects) {
      flat.insert(flat.end(), ids.begin(), ids.end());
    }
    std::sort(flat.begin(), flat.end());
    flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
    auto expected = test_ds.subject_ids();
    std::sort(expected.begin(), expected.end());
    REQUIRE(flat == expected);
  }

  SECTION("the report serializes to JSON and CSV") {
    const auto j = eval_report_to_json(result.report);
    REQUIRE(j.at("folds").get<std::size_t>() == 4);
    REQUIRE(j.at("fold_mode").get<std::string>() == "stratified_rows");
    REQUIRE(j.at("arms").contains("delta_re"));
    REQUIRE(j.at("arms").at("delta_re").at("LR").contains("4"));
    REQUIRE(j.at("arms").at("delta_re").at("LR").at("4").at("fold_auroc")
                .size() == 4);

    const std::string csv = eval_report_to_csv(result.report);
    REQUIRE(csv.rfind("arm,metric,K,SVM_mean,SVM_std,RF_mean,RF_std,"
                      "LR_mean,LR_std\n",
                      0) == 0);
    const std::size_t lines = std::count(csv.begin(), csv.end(), '\n');
    REQUIRE(lines == 1 + 2 * 2 * 2);  // arms x metrics x K values
    REQUIRE(csv.find(",,,") != std::string::npos);  // reserved RF columns
  }

  SECTION("experiment preconditions are enforced") {
    REQUIRE_THROWS_AS(run_experiment(train_ds, test_ds, {}, cfg),
                      ConfigError);
    REQUIRE_THROWS_AS(run_experiment(train_ds, test_ds, {5}, cfg),
                      ConfigError);
    REQUIRE_THROWS_AS(run_experiment(train_ds, train_ds, {2}, cfg),
                      SplitError);
    auto renamed = test_ds;
    renamed.channel_names[0] = "zz";
    REQUIRE_THROWS_AS(run_experiment(train_ds, renamed, {2}, cfg),
                      SchemaError);
  }
}
