#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ernest/errors.hpp"
#include "ernest/nn/network.hpp"

namespace ernest::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(const Network& net, AdamOptions opts = {}) : opts_(opts) {
    const auto& layers = net.layers();
    mw_.resize(layers.size());
    vw_.resize(layers.size());
    mb_.resize(layers.size());
    vb_.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      mw_[i].assign(layers[i].w.size(), 0.0);
      vw_[i].assign(layers[i].w.size(), 0.0);
      mb_[i].assign(layers[i].b.size(), 0.0);
      vb_[i].assign(layers[i].b.size(), 0.0);
    }
  }

  void step(Network& net, const Gradients& grads) {
    auto& layers = net.layers_mut();
    if (grads.w.size() != layers.size()) {
      throw ShapeError("gradient layer count does not match network");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < layers.size(); ++i) {
      update(layers[i].w, grads.w[i], mw_[i], vw_[i], bc1, bc2);
      update(layers[i].b, grads.b[i], mb_[i], vb_[i], bc1, bc2);
    }
    net.bump_param_version();
  }

  std::size_t steps() const { return t_; }

 private:
  void update(std::vector<double>& p, const std::vector<double>& g,
              std::vector<double>& m, std::vector<double>& v, double bc1,
              double bc2) {
    if (g.size() != p.size()) throw ShapeError("gradient size mismatch");
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * g[k];
      v[k] = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.epsilon);
    }
  }

  AdamOptions opts_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> mw_, vw_, mb_, vb_;
};

}  // namespace ernest::nn
