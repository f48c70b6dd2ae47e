#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ernest/data/dataset.hpp"
#include "ernest/errors.hpp"
#include "ernest/eval/classifiers.hpp"
#include "ernest/eval/metrics.hpp"
#include "ernest/features/embedder.hpp"
#include "ernest/io_util.hpp"
#include "ernest/parallel.hpp"
#include "ernest/rng.hpp"
#include "ernest/selection/dsaee.hpp"

namespace ernest::eval {

struct ReducedTrialMatrix {
  nn::Tensor values;  // P x (K*M), blocks follow selected_channels order
  std::vector<std::size_t> labels;
  std::vector<std::string> subjects;
  std::vector<std::size_t> selected_channels;
  std::size_t embedding_dim = 0;
};

// Embeds `ds` over the selected channels only, in selection order.
inline ReducedTrialMatrix reduce_new_trials(
    const std::vector<features::ChannelEmbedder>& embedders,
    const std::vector<std::size_t>& selection, const data::Dataset& ds,
    std::size_t jobs = 1) {
  if (ds.trials.empty()) throw EmptyDatasetError("no trials to reduce");
  if (selection.empty()) throw ConfigError("channel selection is empty");
  features::detail::check_registry(embedders, ds.channel_names);
  for (const std::size_t c : selection) {
    if (c >= embedders.size()) {
      throw SchemaError("selected channel " + std::to_string(c) +
                        " outside the registry");
    }
  }
  const std::size_t n = ds.trials.size();
  const std::size_t m = embedders[0].embedding_dim;
  ReducedTrialMatrix a;
  a.values = nn::Tensor::zeros({n, selection.size() * m});
  a.selected_channels = selection;
  a.embedding_dim = m;
  for (const auto& trial : ds.trials) {
    a.labels.push_back(trial.class_label);
    a.subjects.push_back(trial.subject_id);
  }
  std::vector<std::size_t> all_rows(n);
  for (std::size_t i = 0; i < n; ++i) all_rows[i] = i;
  parallel_for(selection.size(), jobs, [&](std::size_t slot) {
    const features::ChannelEmbedder& e = embedders[selection[slot]];
    const nn::Tensor x = features::detail::channel_batch(
        ds, all_rows, selection[slot], e.normalize_input);
    const nn::Tensor emb = e.net.forward(x, nullptr, e.encoder_len);
    for (std::size_t r = 0; r < n; ++r) {
      std::copy(emb.row(r), emb.row(r) + m, a.values.row(r) + slot * m);
    }
  });
  return a;
}

// CSV: subject,label,ch<c>_<m>... with blocks in selection order.
inline std::string reduced_matrix_to_csv(const ReducedTrialMatrix& a) {
  std::string out = "subject,label";
  for (const std::size_t c : a.selected_channels) {
    for (std::size_t m = 0; m < a.embedding_dim; ++m) {
      out += ",ch" + std::to_string(c) + "_" + std::to_string(m);
    }
  }
  out += "\n";
  for (std::size_t r = 0; r < a.values.rows(); ++r) {
    out += a.subjects[r] + "," + std::to_string(a.labels[r]);
    const double* row = a.values.row(r);
    for (std::size_t i = 0; i < a.values.cols(); ++i) {
      out += "," + format_double(row[i]);
    }
    out += "\n";
  }
  return out;
}

enum class FoldMode {
  StratifiedRows,
  SubjectGrouped,
};

inline std::string fold_mode_name(FoldMode mode) {
  return mode == FoldMode::StratifiedRows ? "stratified_rows"
                                          : "subject_grouped";
}

inline FoldMode fold_mode_from_name(const std::string& name) {
  if (name == "stratified_rows") return FoldMode::StratifiedRows;
  if (name == "subject_grouped") return FoldMode::SubjectGrouped;
  throw ConfigError("unknown fold mode '" + name + "'");
}

// Deterministic fold assignment: per class, rows (or subjects) are
// shuffled and dealt round-robin, so folds stay class-balanced.
inline std::vector<std::size_t> make_folds(
    const std::vector<std::size_t>& labels,
    const std::vector<std::string>& subjects, std::size_t folds,
    std::uint64_t seed, FoldMode mode) {
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (labels.size() != subjects.size()) {
    throw ShapeError("label and subject counts differ");
  }
  RngStream rng(seed, RngRole::Split, 2);
  std::vector<std::size_t> fold_of_row(labels.size(), 0);
  if (mode == FoldMode::StratifiedRows) {
    for (std::size_t cls = 0; cls < 2; ++cls) {
      std::vector<std::size_t> rows;
      for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] == cls) rows.push_back(r);
      }
      if (rows.size() < folds) {
        throw ConfigError("class " + std::to_string(cls) + " has " +
                          std::to_string(rows.size()) + " rows for " +
                          std::to_string(folds) + " folds");
      }
      rng.shuffle(rows);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        fold_of_row[rows[i]] = i % folds;
      }
    }
  } else {
    std::map<std::string, std::size_t> subject_fold;
    for (std::size_t cls = 0; cls < 2; ++cls) {
      std::set<std::string> unique;
      for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] == cls) unique.insert(subjects[r]);
      }
      if (unique.size() < folds) {
        throw ConfigError("class " + std::to_string(cls) + " has " +
                          std::to_string(unique.size()) + " subjects for " +
                          std::to_string(folds) + " folds");
      }
      std::vector<std::string> ids(unique.begin(), unique.end());
      rng.shuffle(ids);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        subject_fold[ids[i]] = i % folds;
      }
    }
    for (std::size_t r = 0; r < labels.size(); ++r) {
      fold_of_row[r] = subject_fold.at(subjects[r]);
    }
  }
  return fold_of_row;
}

struct CvCell {
  MeanStd auroc;
  MeanStd acc;
  std::vector<double> fold_auroc;
  std::vector<double> fold_acc;
};

inline CvCell cross_validate(const nn::Tensor& x,
                             const std::vector<std::size_t>& labels,
                             const std::vector<std::string>& subjects,
                             ClassifierKind kind, std::size_t folds,
                             std::uint64_t seed, double c_reg = 1.0,
                             FoldMode mode = FoldMode::StratifiedRows) {
  const auto fold_of_row = make_folds(labels, subjects, folds, seed, mode);
  CvCell cell;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows, val_rows;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      (fold_of_row[r] == f ? val_rows : train_rows).push_back(r);
    }
    nn::Tensor train_x = nn::gather_rows(x, train_rows.data(), train_rows.size());
    nn::Tensor val_x = nn::gather_rows(x, val_rows.data(), val_rows.size());
    std::vector<std::size_t> train_y, val_y;
    for (const std::size_t r : train_rows) train_y.push_back(labels[r]);
    for (const std::size_t r : val_rows) val_y.push_back(labels[r]);
    const ClassifierModel model =
        train_linear_classifier(kind, train_x, train_y, c_reg);
    cell.fold_auroc.push_back(auroc(predict_scores(model, val_x), val_y));
    cell.fold_acc.push_back(accuracy(predict_labels(model, val_x), val_y));
  }
  cell.auroc = mean_std(cell.fold_auroc);
  cell.acc = mean_std(cell.fold_acc);
  return cell;
}

// arm -> classifier -> K -> cross-validated metrics, plus the fold
// protocol so results can be audited per subject.
struct EvalReport {
  std::map<std::string, std::map<std::string, std::map<std::size_t, CvCell>>>
      cells;
  std::vector<std::size_t> k_order;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  std::string fold_mode = "stratified_rows";
  std::vector<std::vector<std::string>> fold_subjects;
};

inline nlohmann::json eval_report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["folds"] = report.folds;
  j["seed"] = report.seed;
  j["fold_mode"] = report.fold_mode;
  j["k_order"] = report.k_order;
  j["fold_subjects"] = report.fold_subjects;
  nlohmann::json arms = nlohmann::json::object();
  for (const auto& [arm, by_classifier] : report.cells) {
    nlohmann::json ja = nlohmann::json::object();
    for (const auto& [classifier, by_k] : by_classifier) {
      nlohmann::json jc = nlohmann::json::object();
      for (const auto& [k, cell] : by_k) {
        jc[std::to_string(k)] = {{"auroc_mean", cell.auroc.mean},
                                 {"auroc_std", cell.auroc.std},
                                 {"acc_mean", cell.acc.mean},
                                 {"acc_std", cell.acc.std},
                                 {"fold_auroc", cell.fold_auroc},
                                 {"fold_accuracy", cell.fold_acc}};
      }
      ja[classifier] = std::move(jc);
    }
    arms[arm] = std::move(ja);
  }
  j["arms"] = std::move(arms);
  return j;
}

// CSV mirroring the report tables; the RF columns are reserved for
// externally computed baselines and stay empty.
inline std::string eval_report_to_csv(const EvalReport& report) {
  std::string out =
      "arm,metric,K,SVM_mean,SVM_std,RF_mean,RF_std,LR_mean,LR_std\n";
  const auto cell_text = [](const std::map<std::size_t, CvCell>* by_k,
                            std::size_t k, bool use_auroc) -> std::string {
    if (!by_k) return ",";
    const auto it = by_k->find(k);
    if (it == by_k->end()) return ",";
    const MeanStd& ms = use_auroc ? it->second.auroc : it->second.acc;
    return format_double(ms.mean) + "," + format_double(ms.std);
  };
  for (const auto& [arm, by_classifier] : report.cells) {
    const auto* svm = by_classifier.count("SVM") ? &by_classifier.at("SVM") : nullptr;
    const auto* lr = by_classifier.count("LR") ? &by_classifier.at("LR") : nullptr;
    for (const bool use_auroc : {true, false}) {
      for (const std::size_t k : report.k_order) {
        out += arm;
        out += use_auroc ? ",auroc," : ",accuracy,";
        out += std::to_string(k) + ",";
        out += cell_text(svm, k, use_auroc) + ",,," +
               cell_text(lr, k, use_auroc) + "\n";
      }
    }
  }
  return out;
}

struct ExperimentConfig {
  features::EmbedderConfig embedder;
  selection::DsaeeConfig dsaee = selection::default_dsaee_config();
  std::vector<ClassifierKind> classifiers = {ClassifierKind::LinearSVM,
                                             ClassifierKind::LogisticRegression};
  std::size_t folds = 10;
  double regularization = 1.0;
  FoldMode fold_mode = FoldMode::StratifiedRows;
  std::uint64_t master_seed = 0;
  std::size_t jobs = 1;
  bool ablation = true;
};

struct ExperimentResult {
  std::vector<features::ChannelEmbedder> embedders;
  features::TrialVectorMatrix trial_matrix;
  std::vector<std::pair<double, double>> re_pairs;
  selection::ChannelRanking delta_ranking;
  selection::ChannelRanking accuracy_ranking;
  EvalReport report;
};

// Full protocol: embedders on the training group, ensemble selection on
// the trial matrix of the embedder-holdout subjects (rows the embedders
// never fit, so reconstruction errors reflect signal structure rather
// than memorized labels), then per arm / per K cross-validated
// classification of the reduced test matrix. Both arms share embedders,
// fold assignment and reduction machinery; only the ranking source
// differs.
inline ExperimentResult run_experiment(const data::Dataset& train,
                                       const data::Dataset& test,
                                       const std::vector<std::size_t>& k_list,
                                       const ExperimentConfig& cfg) {
  if (train.channel_names != test.channel_names) {
    throw SchemaError("train and test registries differ");
  }
  if (k_list.empty()) throw ConfigError("no selection sizes requested");
  for (const std::size_t k : k_list) {
    if (k < 1 || k > train.channel_count()) {
      throw ConfigError("selection size " + std::to_string(k) +
                        " outside [1, " +
                        std::to_string(train.channel_count()) + "]");
    }
  }
  {
    const auto train_subj = train.subject_ids();
    const std::set<std::string> train_ids(train_subj.begin(), train_subj.end());
    for (const auto& id : test.subject_ids()) {
      if (train_ids.count(id)) {
        throw SplitError("subject " + id + " appears in both groups");
      }
    }
  }

  ExperimentResult result;
  result.embedders = features::train_channel_embedders(
      train, cfg.embedder, cfg.master_seed, cfg.jobs);
  const std::set<std::string> holdout = features::pick_holdout_subjects(
      train, cfg.embedder.holdout_fraction, cfg.master_seed);
  const data::Dataset selection_ds = data::subset_by_subjects(
      train, std::vector<std::string>(holdout.begin(), holdout.end()));
  result.trial_matrix =
      features::build_trial_matrix(result.embedders, selection_ds, cfg.jobs);
  const selection::REMatrix re = selection::dsaee_run(
      result.trial_matrix, cfg.dsaee, cfg.master_seed, cfg.jobs);
  result.re_pairs = selection::channel_re_by_class(re);
  result.delta_ranking = selection::delta_re(result.re_pairs);
  result.accuracy_ranking = features::channel_accuracy_ranking(result.embedders);

  EvalReport& report = result.report;
  report.k_order = k_list;
  report.folds = cfg.folds;
  report.seed = cfg.master_seed;
  report.fold_mode = fold_mode_name(cfg.fold_mode);

  std::vector<std::pair<std::string, const selection::ChannelRanking*>> arms;
  arms.emplace_back(result.delta_ranking.metric, &result.delta_ranking);
  if (cfg.ablation) {
    arms.emplace_back(result.accuracy_ranking.metric, &result.accuracy_ranking);
  }
  bool folds_recorded = false;
  for (const auto& [arm_name, ranking] : arms) {
    for (const std::size_t k : k_list) {
      const auto selected = selection::select_top_k(*ranking, k);
      const ReducedTrialMatrix a =
          reduce_new_trials(result.embedders, selected, test, cfg.jobs);
      if (!folds_recorded) {
        const auto fold_of_row = make_folds(a.labels, a.subjects, cfg.folds,
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
      for (const ClassifierKind kind : cfg.classifiers) {
        report.cells[arm_name][classifier_name(kind)][k] =
            cross_validate(a.values, a.labels, a.subjects, kind, cfg.folds,
                           cfg.master_seed, cfg.regularization, cfg.fold_mode);
      }
    }
  }
  return result;
}

}  // namespace ernest::eval
