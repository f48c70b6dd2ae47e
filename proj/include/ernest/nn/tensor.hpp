#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ernest/errors.hpp"

namespace ernest::nn {

// Dense row-major tensor of doubles. Most of the engine works on rank-2
// tensors (batch x features); the shape vector exists so callers can carry
// richer layouts through the same storage.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> dims) {
    Tensor t;
    std::size_t n = 1;
    for (const std::size_t d : dims) n *= d;
    t.shape = std::move(dims);
    t.values.assign(n, 0.0);
    return t;
  }

  std::size_t numel() const { return values.size(); }

  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }

  std::size_t cols() const {
    std::size_t n = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) n *= shape[i];
    return n;
  }

  double* row(std::size_t r) { return values.data() + r * cols(); }
  const double* row(std::size_t r) const { return values.data() + r * cols(); }

  double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return values[r * cols() + c];
  }

  bool all_finite() const {
    for (const double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

}  // namespace ernest::nn
