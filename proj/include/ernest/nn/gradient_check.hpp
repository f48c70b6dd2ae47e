#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "ernest/nn/network.hpp"

namespace ernest::nn {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t params_checked = 0;
  bool passed = false;
};

// Compares analytic parameter gradients against central finite differences
// of a fixed projection loss sum(proj * output). `tamper` may mutate the
// analytic gradients before comparison (to prove the check catches bugs).
// Parameters are restored to their exact original values.
inline GradCheckResult gradient_check(
    Network& net, const Tensor& input, double tol, double h = 1e-5,
    const std::function<void(Gradients&)>& tamper = {}) {
  const Extent out_ext = net.output_extent();
  Tensor proj = Tensor::zeros({input.rows(), out_ext.flat()});
  for (std::size_t k = 0; k < proj.values.size(); ++k) {
    proj.values[k] = std::sin(0.7 * static_cast<double>(k) + 0.3) + 0.1;
  }
  const auto project = [&](const Tensor& out) {
    double acc = 0.0;
    for (std::size_t k = 0; k < out.values.size(); ++k) {
      acc += proj.values[k] * out.values[k];
    }
    return acc;
  };

  ForwardCache cache;
  net.forward(input, &cache);
  Gradients grads = net.backward(cache, proj);
  if (tamper) tamper(grads);

  GradCheckResult result;
  auto& layers = net.layers_mut();
  const auto check_param = [&](double& p, double analytic) {
    const double orig = p;
    p = orig + h;
    const double up = project(net.forward(input));
    p = orig - h;
    const double down = project(net.forward(input));
    p = orig;
    const double fd = (up - down) / (2.0 * h);
    const double rel =
        std::abs(analytic - fd) /
        std::max({1e-6, std::abs(analytic), std::abs(fd)});
    result.max_rel_err = std::max(result.max_rel_err, rel);
    ++result.params_checked;
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (std::size_t k = 0; k < layers[i].w.size(); ++k) {
      check_param(layers[i].w[k], grads.w[i][k]);
    }
    for (std::size_t k = 0; k < layers[i].b.size(); ++k) {
      check_param(layers[i].b[k], grads.b[i][k]);
    }
  }
  result.passed = result.max_rel_err < tol;
  return result;
}

}  // namespace ernest::nn
