#include <cmath>
#include <numeric>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "ernest/nn/losses.hpp"
#include "ernest/nn/network.hpp"
#include "ernest/nn/optimizer.hpp"
#include "ernest/nn/train.hpp"

#include "helpers.hpp"

using namespace ernest;
using namespace ernest::nn;

TEST_CASE("cross entropy on uniform logits is log of class count") {
  const Tensor logits = Tensor::zeros({4, 2});
  const auto v = softmax_cross_entropy(logits, {0, 1, 0, 1});
  REQUIRE(v.loss == Catch::Approx(std::log(2.0)).margin(1e-14));
  for (std::size_t r = 0; r < 4; ++r) {
    const double sign = r % 2 == 0 ? 1.0 : -1.0;
    REQUIRE(v.grad.at(r, 0) ==
            Catch::Approx(sign == 1.0 ? -0.125 : 0.125).margin(1e-14));
    double row_sum = v.grad.at(r, 0) + v.grad.at(r, 1);
    REQUIRE(row_sum == Catch::Approx(0.0).margin(1e-15));
  }
}

TEST_CASE("cross entropy matches the negative log probability") {
  const Tensor logits = testutil::tensor2({{1.0, 3.0}});
  const auto v = softmax_cross_entropy(logits, {1});
  const double p1 = 1.0 / (1.0 + std::exp(-2.0));
  REQUIRE(v.loss == Catch::Approx(-std::log(p1)).margin(1e-12));
  REQUIRE(v.grad.at(0, 0) == Catch::Approx(1.0 - p1).margin(1e-12));
  REQUIRE(v.grad.at(0, 1) == Catch::Approx(p1 - 1.0).margin(1e-12));
}

TEST_CASE("cross entropy rejects out-of-range labels") {
  const Tensor logits = Tensor::zeros({2, 2});
  REQUIRE_THROWS_AS(softmax_cross_entropy(logits, {0, 2}), LabelError);
  REQUIRE_THROWS_AS(softmax_cross_entropy(logits, {0}), ShapeError);
}

TEST_CASE("sparse reconstruction loss matches hand arithmetic") {
  const Tensor recon = testutil::tensor2({{1.0, 2.0}});
  const Tensor target = Tensor::zeros({1, 2});
  const Tensor hidden = testutil::tensor2({{-1.0, 2.0, 0.0}});

  const auto v = mse_with_activity_penalty(recon, target, hidden, 0.3);
  REQUIRE(v.loss == Catch::Approx(2.5 + 0.3).margin(1e-14));
  REQUIRE(v.grad_output.at(0, 0) == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(v.grad_output.at(0, 1) == Catch::Approx(2.0).margin(1e-14));
  REQUIRE(v.grad_hidden.at(0, 0) == Catch::Approx(-0.1).margin(1e-14));
  REQUIRE(v.grad_hidden.at(0, 1) == Catch::Approx(0.1).margin(1e-14));
  REQUIRE(v.grad_hidden.at(0, 2) == 0.0);  // sign(0) contributes nothing
}

TEST_CASE("the activity penalty is linear in lambda") {
  RngStream rng(31, RngRole::Dsae, 0);
  const Tensor recon = testutil::random_tensor({5, 4}, rng);
  const Tensor target = testutil::random_tensor({5, 4}, rng);
  const Tensor hidden = testutil::random_tensor({5, 6}, rng);

  const double l0 = mse_with_activity_penalty(recon, target, hidden, 0.0).loss;
  const double l1 = mse_with_activity_penalty(recon, target, hidden, 0.7).loss;
  const double l2 = mse_with_activity_penalty(recon, target, hidden, 1.4).loss;
  REQUIRE(l2 - l0 == Catch::Approx(2.0 * (l1 - l0)).margin(1e-12));
}

TEST_CASE("dense backward under MSE equals the closed form") {
  const std::size_t batch = 6, in = 3, units = 2;
  Network net(Extent{1, in}, {DenseSpec{units}});
  RngStream init(7, RngRole::Embedder, 0);
  net.init_params(init);

  RngStream rng(8, RngRole::Embedder, 0);
  const Tensor x = testutil::random_tensor({batch, in}, rng);
  const Tensor y = testutil::random_tensor({batch, units}, rng);

  ForwardCache cache;
  const Tensor pred = net.forward(x, &cache);
  const auto v = mse_with_activity_penalty(pred, y, pred, 0.0);
  const auto grads = net.backward(cache, v.grad_output);

  const double scale = 2.0 / (batch * units);
  for (std::size_t u = 0; u < units; ++u) {
    double gb = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
      gb += scale * (pred.at(r, u) - y.at(r, u));
    }
    REQUIRE(grads.b[0][u] == Catch::Approx(gb).margin(1e-12));
    for (std::size_t i = 0; i < in; ++i) {
      double gw = 0.0;
      for (std::size_t r = 0; r < batch; ++r) {
        gw += scale * (pred.at(r, u) - y.at(r, u)) * x.at(r, i);
      }
      REQUIRE(grads.w[0][u * in + i] == Catch::Approx(gw).margin(1e-12));
    }
  }
}

namespace {

Tensor two_cluster_data(std::size_t n, std::vector<std::size_t>& labels,
                        std::uint64_t seed) {
  RngStream rng(seed, RngRole::Embedder, 5);
  Tensor x = Tensor::zeros({n, 2});
  labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    labels[r] = r % 2;
    const double cx = labels[r] == 0 ? -2.0 : 2.0;
    x.at(r, 0) = cx + 0.3 * rng.normal();
    x.at(r, 1) = -cx + 0.3 * rng.normal();
  }
  return x;
}

}  // namespace

TEST_CASE("classifier training separates an easy toy problem") {
  std::vector<std::size_t> labels;
  const Tensor x = two_cluster_data(40, labels, 3);

  Network net(Extent{1, 2}, {DenseSpec{8}, ReLUSpec{}, DenseSpec{2},
                             SoftmaxSpec{}});
  RngStream init(4, RngRole::Embedder, 0);
  net.init_params(init);

  TrainOptions opts;
  opts.epochs = 120;
  opts.batch_size = 20;
  RngStream train_rng(5, RngRole::Embedder, 0);
  const auto history = train_classifier(net, x, labels, opts, train_rng);

  REQUIRE(history.size() == 120);
  REQUIRE(history.back() < history.front());
  REQUIRE(history.back() < 0.1);
  REQUIRE(predict_classes(net, x) == labels);
}

TEST_CASE("training is bitwise reproducible under one seed") {
  std::vector<std::size_t> labels;
  const Tensor x = two_cluster_data(30, labels, 11);

  const auto run = [&] {
    Network net(Extent{1, 2}, {DenseSpec{6}, ReLUSpec{}, DenseSpec{2},
                               SoftmaxSpec{}});
    RngStream init(12, RngRole::Embedder, 1);
    net.init_params(init);
    TrainOptions opts;
    opts.epochs = 25;
    opts.batch_size = 8;
    RngStream rng(13, RngRole::Embedder, 1);
    const auto history = train_classifier(net, x, labels, opts, rng);
    return std::make_pair(history, net.layers()[0].w);
  };

  const auto a = run();
  const auto b = run();
  REQUIRE(a.first == b.first);
  REQUIRE(a.second == b.second);
}

TEST_CASE("non-finite loss reports divergence with the epoch") {
  std::vector<std::size_t> labels;
  const Tensor x = two_cluster_data(16, labels, 21);

  Network net(Extent{1, 2}, {DenseSpec{4}, ReLUSpec{}, DenseSpec{2},
                             SoftmaxSpec{}});
  RngStream init(22, RngRole::Embedder, 0);
  net.init_params(init);
  TrainOptions opts;
  opts.epochs = 5;
  opts.batch_size = 16;
  opts.adam.lr = 1e200;
  RngStream rng(23, RngRole::Embedder, 0);
  try {
    train_classifier(net, x, labels, opts, rng);
    FAIL("expected divergence");
  } catch (const TrainingDivergedError& e) {
    REQUIRE(e.category() == ErrorCategory::Training);
    REQUIRE(e.at() >= 1);
  }
}

TEST_CASE("argmax prediction prefers the first class on ties") {
  Network net(Extent{1, 3}, {DenseSpec{2}, SoftmaxSpec{}});  // zero params
  const Tensor x = testutil::tensor2({{1.0, 2.0, 3.0}});
  REQUIRE(predict_classes(net, x) == std::vector<std::size_t>{0});
}

TEST_CASE("a linear autoencoder approaches the rank-1 projection optimum") {
  // data with one dominant direction
  const std::size_t n = 120, d = 3;
  RngStream rng(41, RngRole::Dsae, 2);
  Tensor x = Tensor::zeros({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    const double big = 3.0 * rng.normal();
    const double s1 = 0.6 * rng.normal();
    const double s2 = 0.4 * rng.normal();
    x.at(r, 0) = 0.2 + big * 0.70 + s1 * 0.3;
    x.at(r, 1) = -0.1 + big * 0.50 - s1 * 0.4 + s2 * 0.2;
    x.at(r, 2) = 0.4 + big * 0.51 + s2 * 0.5;
  }

  // oracle: power iteration on the population covariance
  double mean[d] = {0, 0, 0};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += x.at(r, c) / n;
  }
  double cov[d][d] = {};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        cov[a][b] += (x.at(r, a) - mean[a]) * (x.at(r, b) - mean[b]) / n;
      }
    }
  }
  double v[d] = {1.0, 0.5, 0.25};
  double lambda1 = 0.0;
  for (int it = 0; it < 200; ++it) {
    double next[d] = {};
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) next[a] += cov[a][b] * v[b];
    }
    double norm = std::sqrt(next[0] * next[0] + next[1] * next[1] +
                            next[2] * next[2]);
    for (std::size_t a = 0; a < d; ++a) v[a] = next[a] / norm;
    lambda1 = norm;
  }
  const double trace = cov[0][0] + cov[1][1] + cov[2][2];
  const double optimum = (trace - lambda1) / d;  // per-entry squared error

  Network net(Extent{1, d}, {DenseSpec{1}, DenseSpec{d}});
  RngStream init(42, RngRole::Dsae, 0);
  net.init_params(init);
  TrainOptions opts;
  opts.epochs = 3000;
  opts.batch_size = n;
  opts.adam.lr = 0.01;
  RngStream train_rng(43, RngRole::Dsae, 0);
  train_autoencoder(net, x, 0.0, 0, opts, train_rng);

  const Tensor recon = net.forward(x);
  double err = 0.0;
  for (std::size_t k = 0; k < recon.values.size(); ++k) {
    const double diff = recon.values[k] - x.values[k];
    err += diff * diff;
  }
  err /= static_cast<double>(n * d);
  REQUIRE(err >= optimum - 1e-9);  // the spectral bound is a hard floor
  REQUIRE(err <= optimum * 1.05 + 1e-9);
}

TEST_CASE("autoencoder training validates its arguments") {
  Network mismatched(Extent{1, 4}, {DenseSpec{2}, DenseSpec{3}});
  RngStream rng(1, RngRole::Dsae, 0);
  Tensor x = Tensor::zeros({4, 4});
  TrainOptions opts;
  REQUIRE_THROWS_AS(train_autoencoder(mismatched, x, 0.0, 0, opts, rng),
                    ShapeError);

  Network ok(Extent{1, 4}, {DenseSpec{2}, DenseSpec{4}});
  REQUIRE_THROWS_AS(train_autoencoder(ok, x, 0.0, 5, opts, rng), ConfigError);

  const Tensor empty = Tensor::zeros({0, 4});
  REQUIRE_THROWS_AS(train_autoencoder(ok, empty, 0.0, 0, opts, rng),
                    EmptyDatasetError);
}

TEST_CASE("adam rejects gradients from a different topology") {
  Network net(Extent{1, 3}, {DenseSpec{2}});
  Adam adam(net, {});
  Gradients wrong;
  wrong.w.resize(1);
  wrong.b.resize(1);
  wrong.w[0].assign(5, 0.0);
  wrong.b[0].assign(2, 0.0);
  REQUIRE_THROWS_AS(adam.step(net, wrong), ShapeError);
}
