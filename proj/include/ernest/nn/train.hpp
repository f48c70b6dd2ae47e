#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "ernest/errors.hpp"
#include "ernest/nn/losses.hpp"
#include "ernest/nn/network.hpp"
#include "ernest/nn/optimizer.hpp"
#include "ernest/rng.hpp"

namespace ernest::nn {

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  AdamOptions adam;
};

inline Tensor gather_rows(const Tensor& x, const std::size_t* idx,
                          std::size_t count) {
  Tensor out = Tensor::zeros({count, x.cols()});
  for (std::size_t r = 0; r < count; ++r) {
    const double* src = x.row(idx[r]);
    std::copy(src, src + x.cols(), out.row(r));
  }
  return out;
}

namespace detail {

inline void check_train_args(const Network& net, const Tensor& x,
                             const TrainOptions& opts) {
  if (x.rows() == 0) throw EmptyDatasetError("training set is empty");
  if (x.cols() != net.input_extent().flat()) {
    throw ShapeError("training rows do not match network input");
  }
  if (opts.epochs == 0) throw ConfigError("epochs must be positive");
  if (opts.batch_size == 0) throw ConfigError("batch size must be positive");
}

}  // namespace detail

// Minibatch cross-entropy training. The trailing softmax layer, when
// present, is skipped during the forward pass; the loss consumes logits.
// Returns the mean loss per epoch.
inline std::vector<double> train_classifier(Network& net, const Tensor& x,
                                            const std::vector<std::size_t>& labels,
                                            const TrainOptions& opts,
                                            RngStream& rng) {
  detail::check_train_args(net, x, opts);
  if (labels.size() != x.rows()) {
    throw ShapeError("label count does not match training rows");
  }
  std::size_t run = net.size();
  if (run > 0 && kind_of(net.layers().back().spec) == LayerKind::Softmax) {
    --run;
  }
  Adam adam(net, opts.adam);
  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  history.reserve(opts.epochs);
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += opts.batch_size) {
      const std::size_t count = std::min(opts.batch_size, n - start);
      Tensor batch = gather_rows(x, order.data() + start, count);
      std::vector<std::size_t> batch_labels(count);
      for (std::size_t r = 0; r < count; ++r) {
        batch_labels[r] = labels[order[start + r]];
      }
      ForwardCache cache;
      Tensor logits = net.forward(batch, &cache, run);
      LossValue loss = softmax_cross_entropy(logits, batch_labels);
      if (!std::isfinite(loss.loss)) {
        throw TrainingDivergedError(epoch, "cross-entropy loss is not finite");
      }
      Gradients grads = net.backward(cache, loss.grad);
      adam.step(net, grads);
      epoch_loss += loss.loss * static_cast<double>(count);
    }
    history.push_back(epoch_loss / static_cast<double>(n));
  }
  return history;
}

// Minibatch reconstruction training with an L1 activity penalty injected
// at the output of layer `sparse_layer_index`. Returns mean loss per epoch.
inline std::vector<double> train_autoencoder(Network& net, const Tensor& x,
                                             double lambda,
                                             std::size_t sparse_layer_index,
                                             const TrainOptions& opts,
                                             RngStream& rng) {
  detail::check_train_args(net, x, opts);
  if (sparse_layer_index >= net.size()) {
    throw ConfigError("sparse layer index beyond network depth");
  }
  if (net.output_extent().flat() != net.input_extent().flat()) {
    throw ShapeError("autoencoder output does not match its input");
  }
  Adam adam(net, opts.adam);
  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  history.reserve(opts.epochs);
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += opts.batch_size) {
      const std::size_t count = std::min(opts.batch_size, n - start);
      Tensor batch = gather_rows(x, order.data() + start, count);
      ForwardCache cache;
      Tensor recon = net.forward(batch, &cache);
      const Tensor& hidden = cache.activations[sparse_layer_index + 1];
      SparseMseValue loss =
          mse_with_activity_penalty(recon, batch, hidden, lambda);
      if (!std::isfinite(loss.loss)) {
        throw TrainingDivergedError(epoch, "reconstruction loss is not finite");
      }
      ExtraGrads extra;
      extra.emplace(sparse_layer_index, std::move(loss.grad_hidden));
      Gradients grads = net.backward(cache, loss.grad_output, extra);
      adam.step(net, grads);
      epoch_loss += loss.loss * static_cast<double>(count);
    }
    history.push_back(epoch_loss / static_cast<double>(n));
  }
  return history;
}

// Class predictions by output argmax (first index wins ties).
inline std::vector<std::size_t> predict_classes(const Network& net,
                                                const Tensor& x) {
  Tensor out = net.forward(x);
  std::vector<std::size_t> pred(out.rows());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const double* row = out.row(r);
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.cols(); ++i) {
      if (row[i] > row[best]) best = i;
    }
    pred[r] = best;
  }
  return pred;
}

}  // namespace ernest::nn
