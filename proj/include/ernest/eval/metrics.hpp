#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "ernest/errors.hpp"

namespace ernest::eval {

// Exact Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 * P(tie).
// Counted over tie groups in integer arithmetic, so the result equals the
// brute-force pair count exactly.
inline double auroc(const std::vector<double>& scores,
                    const std::vector<std::size_t>& labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("score and label counts differ");
  }
  std::size_t pos = 0, neg = 0;
  for (const std::size_t y : labels) {
    if (y > 1) throw LabelError("labels must be binary");
    y == 1 ? ++pos : ++neg;
  }
  if (pos == 0 || neg == 0) {
    throw MetricError("both classes are required to compute a ranking metric");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // twice the pair count, so ties add odd integers without fractions
  std::size_t total2 = 0;
  std::size_t neg_below = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t group_pos = 0, group_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      labels[order[j]] == 1 ? ++group_pos : ++group_neg;
      ++j;
    }
    total2 += group_pos * (2 * neg_below + group_neg);
    neg_below += group_neg;
    i = j;
  }
  return static_cast<double>(total2) / static_cast<double>(2 * pos * neg);
}

inline double accuracy(const std::vector<std::size_t>& predicted,
                       const std::vector<std::size_t>& labels) {
  if (predicted.size() != labels.size()) {
    throw ShapeError("prediction and label counts differ");
  }
  if (labels.empty()) throw MetricError("no rows to score");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    correct += predicted[i] == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

inline double error_rate(const std::vector<std::size_t>& predicted,
                         const std::vector<std::size_t>& labels) {
  return 1.0 - accuracy(predicted, labels);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Population standard deviation.
inline MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw MetricError("no values to aggregate");
  MeanStd out;
  for (const double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (const double v : values) {
    const double d = v - out.mean;
    var += d * d;
  }
  var /= static_cast<double>(values.size());
  out.std = var > 0.0 ? std::sqrt(var) : 0.0;
  return out;
}

}  // namespace ernest::eval
