#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ernest/errors.hpp"
#include "ernest/features/embedder.hpp"
#include "ernest/io_util.hpp"
#include "ernest/nn/network.hpp"
#include "ernest/nn/train.hpp"
#include "ernest/parallel.hpp"
#include "ernest/rng.hpp"
#include "ernest/selection/ranking.hpp"

namespace ernest::selection {

struct DsaeeConfig {
  std::size_t components = 30;     // B
  std::size_t test_per_class = 0;  // L; 0 = floor(0.1 * minority count)
  std::vector<std::size_t> hidden_widths = {128, 32, 128};
  std::size_t sparse_hidden = 1;   // which hidden layer carries the penalty
  double lambda = 1e-4;
  nn::TrainOptions train;
  std::size_t normal_class = 0;    // class reconstructed during training

  // Test seam: when set, replaces init+train for each component. Receives
  // the input width, the scaled training rows and the component's stream.
  std::function<nn::Network(std::size_t, const nn::Tensor&, RngStream&)>
      component_trainer;
};

inline DsaeeConfig default_dsaee_config() {
  DsaeeConfig cfg;
  cfg.train.epochs = 300;
  cfg.train.batch_size = 500;
  return cfg;
}

// Dense(h0) -> ReLU -> ... -> Dense(input_dim), linear output.
inline std::vector<nn::LayerSpec> dsae_arch(
    std::size_t input_dim, const std::vector<std::size_t>& hidden_widths) {
  std::vector<nn::LayerSpec> specs;
  for (const std::size_t h : hidden_widths) {
    specs.push_back(nn::DenseSpec{h});
    specs.push_back(nn::ReLUSpec{});
  }
  specs.push_back(nn::DenseSpec{input_dim});
  return specs;
}

// Per-element squared reconstruction errors from the ensemble: one row per
// tested observation, 2L rows per component (class 0 first), B components.
struct REMatrix {
  nn::Tensor values;  // (2*B*L) x (C*M), nonnegative
  std::vector<std::size_t> row_labels;
  std::vector<std::size_t> channel_order;
  std::size_t embedding_dim = 0;
};

namespace detail {

struct ColumnScale {
  std::vector<double> min;
  std::vector<double> inv_range;  // 1/(max-min), 1 when the column is flat
};

inline ColumnScale fit_column_scale(const nn::Tensor& x,
                                    const std::vector<std::size_t>& rows) {
  const std::size_t d = x.cols();
  ColumnScale s;
  s.min.assign(d, 0.0);
  s.inv_range.assign(d, 1.0);
  for (std::size_t c = 0; c < d; ++c) {
    double lo = x.at(rows[0], c);
    double hi = lo;
    for (const std::size_t r : rows) {
      lo = std::min(lo, x.at(r, c));
      hi = std::max(hi, x.at(r, c));
    }
    s.min[c] = lo;
    s.inv_range[c] = hi > lo ? 1.0 / (hi - lo) : 1.0;
  }
  return s;
}

inline nn::Tensor scale_rows(const nn::Tensor& x,
                             const std::vector<std::size_t>& rows,
                             const ColumnScale& s) {
  nn::Tensor out = nn::Tensor::zeros({rows.size(), x.cols()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double* src = x.row(rows[r]);
    double* dst = out.row(r);
    for (std::size_t c = 0; c < x.cols(); ++c) {
      dst[c] = (src[c] - s.min[c]) * s.inv_range[c];
    }
  }
  return out;
}

}  // namespace detail

// One ensemble pass: component b (seeded from (master_seed, dsae, b))
// samples L test rows per class, trains a fresh autoencoder on the
// remaining normal-class rows (columns min-max scaled from those rows
// only), and contributes 2L squared-error rows.
inline REMatrix dsaee_run(const features::TrialVectorMatrix& t,
                          const DsaeeConfig& cfg, std::uint64_t master_seed,
                          std::size_t jobs = 1) {
  if (cfg.components == 0) throw ConfigError("ensemble needs at least one component");
  if (cfg.normal_class > 1) throw ConfigError("normal class must be 0 or 1");
  std::vector<std::size_t> class_rows[2];
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    if (t.row_labels[r] > 1) throw LabelError("labels must be binary");
    class_rows[t.row_labels[r]].push_back(r);
  }
  if (class_rows[0].empty() || class_rows[1].empty()) {
    throw LabelError("both classes must be present for selection");
  }
  const std::size_t minority =
      std::min(class_rows[0].size(), class_rows[1].size());
  const std::size_t l = cfg.test_per_class ? cfg.test_per_class : minority / 10;
  const std::size_t normal_count = class_rows[cfg.normal_class].size();
  if (l < 1 || l + 1 > normal_count || l > minority) {
    throw ConfigError("test rows per class (" + std::to_string(l) +
                      ") must be in [1, min(normal class - 1, minority))");
  }

  const std::size_t d = t.values.cols();
  const std::size_t b_count = cfg.components;
  REMatrix r;
  r.values = nn::Tensor::zeros({2 * b_count * l, d});
  r.row_labels.assign(2 * b_count * l, 0);
  r.channel_order = t.channel_order;
  r.embedding_dim = t.embedding_dim;

  parallel_for(b_count, jobs, [&](std::size_t b) {
    RngStream rng(master_seed, RngRole::Dsae, b);
    std::vector<std::size_t> test_rows;  // class 0 draws, then class 1
    std::vector<bool> picked(t.values.rows(), false);
    for (std::size_t cls = 0; cls < 2; ++cls) {
      for (const std::size_t i :
           rng.sample_without_replacement(class_rows[cls].size(), l)) {
        const std::size_t row = class_rows[cls][i];
        test_rows.push_back(row);
        picked[row] = true;
      }
    }
    std::vector<std::size_t> train_rows;
    for (const std::size_t row : class_rows[cfg.normal_class]) {
      if (!picked[row]) train_rows.push_back(row);
    }

    const detail::ColumnScale scale =
        detail::fit_column_scale(t.values, train_rows);
    const nn::Tensor train_x = detail::scale_rows(t.values, train_rows, scale);
    nn::Network net;
    if (cfg.component_trainer) {
      net = cfg.component_trainer(d, train_x, rng);
    } else {
      net = nn::Network(nn::Extent{d, 1}, dsae_arch(d, cfg.hidden_widths));
      net.init_params(rng);
      try {
        nn::train_autoencoder(net, train_x, cfg.lambda,
                              2 * cfg.sparse_hidden + 1, cfg.train, rng);
      } catch (const TrainingDivergedError& e) {
        throw TrainingDivergedError(b, std::string(e.what()) +
                                           " (component " + std::to_string(b) +
                                           ")");
      }
    }

    const nn::Tensor test_x = detail::scale_rows(t.values, test_rows, scale);
    const nn::Tensor recon = net.forward(test_x);
    if (recon.cols() != d) {
      throw ShapeError("autoencoder output width does not match its input");
    }
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      const std::size_t out_row = b * 2 * l + i;
      double* dst = r.values.row(out_row);
      const double* x = test_x.row(i);
      const double* y = recon.row(i);
      for (std::size_t c = 0; c < d; ++c) {
        const double e = y[c] - x[c];
        dst[c] = e * e;
      }
      r.row_labels[out_row] = i < l ? 0 : 1;
    }
  });
  return r;
}

// Mean squared error per channel and class: sum over that class's B*L rows
// and the channel's M columns, divided by B*L.
inline std::vector<std::pair<double, double>> channel_re_by_class(
    const REMatrix& r) {
  const std::size_t c_count = r.channel_order.size();
  const std::size_t m = r.embedding_dim;
  if (c_count * m != r.values.cols()) {
    throw ShapeError("reconstruction-error matrix width is not C*M");
  }
  std::size_t per_class[2] = {0, 0};
  for (const std::size_t label : r.row_labels) ++per_class[label];
  if (per_class[0] == 0 || per_class[1] == 0) {
    throw LabelError("reconstruction-error matrix must cover both classes");
  }
  std::vector<std::pair<double, double>> out(c_count, {0.0, 0.0});
  for (std::size_t row = 0; row < r.values.rows(); ++row) {
    const double* src = r.values.row(row);
    const bool is_one = r.row_labels[row] == 1;
    for (std::size_t c = 0; c < c_count; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += src[c * m + k];
      (is_one ? out[c].second : out[c].first) += acc;
    }
  }
  for (auto& [re0, re1] : out) {
    re0 /= static_cast<double>(per_class[0]);
    re1 /= static_cast<double>(per_class[1]);
  }
  return out;
}

// Score_c = RE_1 - RE_0: channels whose class-1 rows reconstruct worse
// under the class-0-trained ensemble rank first.
inline ChannelRanking delta_re(
    const std::vector<std::pair<double, double>>& pairs) {
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& [re0, re1] : pairs) scores.push_back(re1 - re0);
  return make_ranking(scores, "delta_re");
}

// CSV: rank,channel_index,channel_name,delta_re,re_class0,re_class1
inline std::string delta_ranking_to_csv(
    const ChannelRanking& ranking,
    const std::vector<std::string>& channel_names,
    const std::vector<std::pair<double, double>>& pairs) {
  std::string out = "rank,channel_index,channel_name,delta_re,re_class0,re_class1\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& e = ranking.entries[i];
    out += std::to_string(i) + "," + std::to_string(e.channel_index) + "," +
           channel_names.at(e.channel_index) + "," + format_double(e.score) +
           "," + format_double(pairs.at(e.channel_index).first) + "," +
           format_double(pairs.at(e.channel_index).second) + "\n";
  }
  return out;
}

// Audit CSV: label,ch<c>_<m>...
inline std::string re_matrix_to_csv(const REMatrix& r) {
  std::string out = "label";
  for (const std::size_t c : r.channel_order) {
    for (std::size_t m = 0; m < r.embedding_dim; ++m) {
      out += ",ch" + std::to_string(c) + "_" + std::to_string(m);
    }
  }
  out += "\n";
  for (std::size_t row = 0; row < r.values.rows(); ++row) {
    out += std::to_string(r.row_labels[row]);
    const double* src = r.values.row(row);
    for (std::size_t c = 0; c < r.values.cols(); ++c) {
      out += "," + format_double(src[c]);
    }
    out += "\n";
  }
  return out;
}

}  // namespace ernest::selection
