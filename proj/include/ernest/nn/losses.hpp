#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ernest/errors.hpp"
#include "ernest/nn/tensor.hpp"

namespace ernest::nn {

struct LossValue {
  double loss = 0.0;
  Tensor grad;  // d loss / d input of the loss, mean-reduced over the batch
};

// Cross-entropy evaluated directly on logits (log-sum-exp form); the
// trailing softmax layer must not have been run.
inline LossValue softmax_cross_entropy(const Tensor& logits,
                                       const std::vector<std::size_t>& labels) {
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  if (labels.size() != batch) {
    throw ShapeError("label count does not match batch size");
  }
  LossValue out;
  out.grad = Tensor::zeros({batch, classes});
  const double inv_b = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    if (labels[r] >= classes) throw LabelError("label out of range");
    const double* z = logits.row(r);
    double m = z[0];
    for (std::size_t i = 1; i < classes; ++i) m = std::max(m, z[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < classes; ++i) sum += std::exp(z[i] - m);
    const double lse = m + std::log(sum);
    total += lse - z[labels[r]];
    double* g = out.grad.row(r);
    for (std::size_t i = 0; i < classes; ++i) {
      g[i] = std::exp(z[i] - lse) * inv_b;
    }
    g[labels[r]] -= inv_b;
  }
  out.loss = total * inv_b;
  return out;
}

struct SparseMseValue {
  double loss = 0.0;
  Tensor grad_output;  // d loss / d reconstruction
  Tensor grad_hidden;  // d loss / d sparse-layer activation
};

// Mean squared reconstruction error plus an L1 activity penalty on the
// hidden code: sum((r-x)^2)/(B*D) + lambda*sum(|h|)/(B*H).
inline SparseMseValue mse_with_activity_penalty(const Tensor& recon,
                                                const Tensor& target,
                                                const Tensor& hidden,
                                                double lambda) {
  if (recon.rows() != target.rows() || recon.cols() != target.cols()) {
    throw ShapeError("reconstruction and target shapes differ");
  }
  if (hidden.rows() != recon.rows()) {
    throw ShapeError("hidden batch size does not match reconstruction");
  }
  const std::size_t batch = recon.rows();
  SparseMseValue out;
  out.grad_output = Tensor::zeros({batch, recon.cols()});
  out.grad_hidden = Tensor::zeros({batch, hidden.cols()});
  const double norm_r = 1.0 / static_cast<double>(batch * recon.cols());
  const double norm_h = 1.0 / static_cast<double>(batch * hidden.cols());
  double sq = 0.0;
  for (std::size_t k = 0; k < recon.values.size(); ++k) {
    const double d = recon.values[k] - target.values[k];
    sq += d * d;
    out.grad_output.values[k] = 2.0 * d * norm_r;
  }
  double l1 = 0.0;
  for (std::size_t k = 0; k < hidden.values.size(); ++k) {
    const double h = hidden.values[k];
    l1 += std::abs(h);
    out.grad_hidden.values[k] =
        h > 0.0 ? lambda * norm_h : (h < 0.0 ? -lambda * norm_h : 0.0);
  }
  out.loss = sq * norm_r + lambda * l1 * norm_h;
  return out;
}

}  // namespace ernest::nn
