#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ernest/errors.hpp"
#include "ernest/nn/tensor.hpp"

namespace ernest::eval {

enum class ClassifierKind {
  LogisticRegression,
  LinearSVM,
};

inline std::string classifier_name(ClassifierKind kind) {
  return kind == ClassifierKind::LogisticRegression ? "LR" : "SVM";
}

inline ClassifierKind classifier_from_name(const std::string& name) {
  if (name == "LR") return ClassifierKind::LogisticRegression;
  if (name == "SVM") return ClassifierKind::LinearSVM;
  throw ConfigError("unknown classifier '" + name + "'");
}

// Linear model over raw (unstandardized) features.
struct ClassifierModel {
  ClassifierKind kind = ClassifierKind::LogisticRegression;
  std::vector<double> weights;
  double bias = 0.0;
  double regularization = 1.0;  // inverse penalty strength C
  std::size_t iterations = 0;
  bool converged = false;

  double score(const double* x) const {
    double z = bias;
    for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * x[i];
    return z;
  }

  // Ties (score exactly 0) classify as 0.
  std::size_t predict(const double* x) const { return score(x) > 0.0 ? 1 : 0; }
};

namespace detail {

// log(1 + exp(-t)) without overflow.
inline double log1p_exp_neg(double t) {
  return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

struct Objective {
  double value = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

}  // namespace detail

// Mean loss (log-loss or hinge) plus ||w||^2 / (2*C*n); bias unpenalized.
inline detail::Objective classifier_objective(ClassifierKind kind,
                                              const std::vector<double>& w,
                                              double b, const nn::Tensor& x,
                                              const std::vector<std::size_t>& y,
                                              double c_reg) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  detail::Objective out;
  out.grad_w.assign(d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.row(r);
    double z = b;
    for (std::size_t i = 0; i < d; ++i) z += w[i] * row[i];
    const double sign = y[r] == 1 ? 1.0 : -1.0;
    const double t = sign * z;
    double dz = 0.0;
    if (kind == ClassifierKind::LogisticRegression) {
      out.value += detail::log1p_exp_neg(t) * inv_n;
      const double s = t >= 0.0 ? std::exp(-t) / (1.0 + std::exp(-t))
                                : 1.0 / (1.0 + std::exp(t));
      dz = -sign * s * inv_n;
    } else {
      if (t < 1.0) {
        out.value += (1.0 - t) * inv_n;
        dz = -sign * inv_n;
      }
    }
    if (dz != 0.0) {
      for (std::size_t i = 0; i < d; ++i) out.grad_w[i] += dz * row[i];
      out.grad_b += dz;
    }
  }
  const double penalty = 1.0 / (c_reg * static_cast<double>(n));
  for (std::size_t i = 0; i < d; ++i) {
    out.value += 0.5 * penalty * w[i] * w[i];
    out.grad_w[i] += penalty * w[i];
  }
  return out;
}

// Full-batch gradient descent from w = 0 on column-standardized features,
// step halved whenever the objective would rise, until the objective
// change falls below 1e-8 relative. Deterministic; the standardization is
// folded back so the returned model scores raw features.
inline ClassifierModel train_linear_classifier(ClassifierKind kind,
                                               const nn::Tensor& x,
                                               const std::vector<std::size_t>& y,
                                               double c_reg = 1.0,
                                               std::size_t max_iter = 2000) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n == 0) throw EmptyDatasetError("classifier training set is empty");
  if (y.size() != n) throw ShapeError("label count does not match rows");
  if (!(c_reg > 0.0)) throw ConfigError("regularization must be positive");
  bool seen[2] = {false, false};
  for (const std::size_t label : y) {
    if (label > 1) throw LabelError("labels must be binary");
    seen[label] = true;
  }
  if (!seen[0] || !seen[1]) {
    throw LabelError("classifier training needs both classes");
  }

  std::vector<double> mean(d, 0.0), scale(d, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.row(r);
    for (std::size_t i = 0; i < d; ++i) mean[i] += row[i];
  }
  for (auto& v : mean) v /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = x.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = row[i] - mean[i];
      var[i] += diff * diff;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    scale[i] = var[i] > 0.0 ? std::sqrt(var[i] / static_cast<double>(n)) : 1.0;
  }
  nn::Tensor xs = nn::Tensor::zeros({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    const double* src = x.row(r);
    double* dst = xs.row(r);
    for (std::size_t i = 0; i < d; ++i) dst[i] = (src[i] - mean[i]) / scale[i];
  }

  std::vector<double> w(d, 0.0);
  double b = 0.0;
  double step = 1.0;
  auto cur = classifier_objective(kind, w, b, xs, y, c_reg);
  ClassifierModel model;
  model.kind = kind;
  model.regularization = c_reg;
  std::size_t iter = 0;
  for (; iter < max_iter; ++iter) {
    std::vector<double> w_next(d);
    bool accepted = false;
    double b_next = 0.0;
    detail::Objective next;
    while (step > 1e-20) {
      for (std::size_t i = 0; i < d; ++i) w_next[i] = w[i] - step * cur.grad_w[i];
      b_next = b - step * cur.grad_b;
      next = classifier_objective(kind, w_next, b_next, xs, y, c_reg);
      if (next.value <= cur.value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double change = cur.value - next.value;
    w = std::move(w_next);
    b = b_next;
    cur = std::move(next);
    if (change <= 1e-8 * std::max(1.0, std::abs(cur.value))) {
      model.converged = true;
      ++iter;
      break;
    }
  }
  model.iterations = iter;
  if (step <= 1e-20) model.converged = true;

  model.weights.assign(d, 0.0);
  double fold = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    model.weights[i] = w[i] / scale[i];
    fold += w[i] * mean[i] / scale[i];
  }
  model.bias = b - fold;
  return model;
}

inline std::vector<double> predict_scores(const ClassifierModel& model,
                                          const nn::Tensor& x) {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = model.score(x.row(r));
  return out;
}

inline std::vector<std::size_t> predict_labels(const ClassifierModel& model,
                                               const nn::Tensor& x) {
  std::vector<std::size_t> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = model.predict(x.row(r));
  return out;
}

}  // namespace ernest::eval
