#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ernest/errors.hpp"
#include "ernest/nn/layers.hpp"
#include "ernest/nn/tensor.hpp"
#include "ernest/rng.hpp"

namespace ernest::nn {

struct Layer {
  LayerSpec spec;
  Extent in;
  Extent out;
  std::vector<double> w;
  std::vector<double> b;
};

// Snapshot of one forward pass; backward() refuses caches taken under a
// different parameter version.
struct ForwardCache {
  std::vector<Tensor> activations;  // activations[i] feeds layer i
  std::vector<std::vector<std::size_t>> pool_argmax;
  std::size_t layers_run = 0;
  std::uint64_t param_version = 0;
};

struct Gradients {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> b;
};

// Extra gradient added at a layer's output during the reverse pass,
// keyed by layer index (used for activation penalties).
using ExtraGrads = std::map<std::size_t, Tensor>;

class Network {
 public:
  Network() = default;

  Network(Extent input, std::vector<LayerSpec> specs) : input_(input) {
    if (input.flat() == 0) throw ShapeError("network input extent is empty");
    Extent cur = input;
    for (const auto& spec : specs) {
      Layer layer;
      layer.spec = spec;
      layer.in = cur;
      layer.out = resolve_extent(spec, cur);
      if (const auto* conv = std::get_if<Conv1DSpec>(&spec)) {
        layer.w.assign(conv->filters * cur.channels * conv->kernel, 0.0);
        layer.b.assign(conv->filters, 0.0);
      } else if (const auto* dense = std::get_if<DenseSpec>(&spec)) {
        layer.w.assign(dense->units * cur.flat(), 0.0);
        layer.b.assign(dense->units, 0.0);
      }
      cur = layer.out;
      layers_.push_back(std::move(layer));
    }
  }

  const Extent& input_extent() const { return input_; }
  Extent output_extent() const {
    return layers_.empty() ? input_ : layers_.back().out;
  }
  std::size_t size() const { return layers_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers_mut() { return layers_; }
  std::uint64_t param_version() const { return param_version_; }
  void bump_param_version() { ++param_version_; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.w.size() + l.b.size();
    return n;
  }

  // Fan-in scaled uniform weights, zero biases.
  void init_params(RngStream& rng) {
    for (auto& layer : layers_) {
      if (layer.w.empty()) continue;
      std::size_t fan_in = 0;
      if (const auto* conv = std::get_if<Conv1DSpec>(&layer.spec)) {
        fan_in = layer.in.channels * conv->kernel;
      } else {
        fan_in = layer.in.flat();
      }
      const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
      for (auto& v : layer.w) v = (2.0 * rng.uniform() - 1.0) * limit;
      std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }
    ++param_version_;
  }

  // Runs the first min(layer_limit, size()) layers over a batch whose rows
  // are flattened inputs (channel-major).
  Tensor forward(const Tensor& x, ForwardCache* cache = nullptr,
                 std::size_t layer_limit =
                     std::numeric_limits<std::size_t>::max()) const {
    if (x.cols() != input_.flat()) {
      throw ShapeError("network input has " + std::to_string(x.cols()) +
                       " values per row, expected " +
                       std::to_string(input_.flat()));
    }
    const std::size_t run = std::min(layer_limit, layers_.size());
    if (cache) {
      cache->activations.clear();
      cache->pool_argmax.assign(layers_.size(), {});
      cache->layers_run = run;
      cache->param_version = param_version_;
      cache->activations.push_back(x);
    }
    Tensor cur = x;
    for (std::size_t i = 0; i < run; ++i) {
      std::vector<std::size_t> argmax;
      Tensor next = apply(layers_[i], cur, &argmax);
      if (cache) {
        cache->pool_argmax[i] = std::move(argmax);
        cache->activations.push_back(next);
      }
      cur = std::move(next);
    }
    return cur;
  }

  // Backpropagates grad_out through the layers recorded in `cache`.
  // Entries in `extra` are added to the corresponding layer's output
  // gradient before it propagates further.
  Gradients backward(const ForwardCache& cache, const Tensor& grad_out,
                     const ExtraGrads& extra = {},
                     Tensor* grad_input = nullptr) const {
    if (cache.param_version != param_version_) {
      throw CacheError("forward cache is stale: parameters changed");
    }
    if (cache.activations.size() != cache.layers_run + 1) {
      throw CacheError("forward cache is incomplete");
    }
    Gradients grads;
    grads.w.resize(layers_.size());
    grads.b.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      grads.w[i].assign(layers_[i].w.size(), 0.0);
      grads.b[i].assign(layers_[i].b.size(), 0.0);
    }
    Tensor g = grad_out;
    for (std::size_t idx = cache.layers_run; idx-- > 0;) {
      if (auto it = extra.find(idx); it != extra.end()) {
        if (it->second.values.size() != g.values.size()) {
          throw ShapeError("extra gradient shape mismatch at layer " +
                           std::to_string(idx));
        }
        for (std::size_t k = 0; k < g.values.size(); ++k) {
          g.values[k] += it->second.values[k];
        }
      }
      g = apply_backward(layers_[idx], cache.activations[idx], g,
                         cache.pool_argmax[idx], grads.w[idx], grads.b[idx]);
    }
    if (grad_input) *grad_input = std::move(g);
    return grads;
  }

  // Copy of the first `layer_count` layers with their trained parameters.
  Network split(std::size_t layer_count) const {
    if (layer_count > layers_.size()) {
      throw ShapeError("split beyond network depth");
    }
    Network prefix;
    prefix.input_ = input_;
    prefix.layers_.assign(layers_.begin(),
                          layers_.begin() + static_cast<std::ptrdiff_t>(layer_count));
    prefix.param_version_ = 1;
    return prefix;
  }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
  }

 private:
  static Tensor apply(const Layer& layer, const Tensor& x,
                      std::vector<std::size_t>* argmax_out) {
    const std::size_t batch = x.rows();
    Tensor y = Tensor::zeros({batch, layer.out.flat()});
    switch (kind_of(layer.spec)) {
      case LayerKind::Conv1D: {
        const auto& conv = std::get<Conv1DSpec>(layer.spec);
        const std::size_t cin = layer.in.channels;
        const std::size_t lin = layer.in.length;
        const std::size_t lout = layer.out.length;
        for (std::size_t r = 0; r < batch; ++r) {
          const double* in = x.row(r);
          double* out = y.row(r);
          for (std::size_t f = 0; f < conv.filters; ++f) {
            for (std::size_t t = 0; t < lout; ++t) {
              double acc = layer.b[f];
              const std::size_t start = t * conv.stride;
              for (std::size_t c = 0; c < cin; ++c) {
                const double* wrow = layer.w.data() + (f * cin + c) * conv.kernel;
                const double* irow = in + c * lin + start;
                for (std::size_t j = 0; j < conv.kernel; ++j) {
                  acc += wrow[j] * irow[j];
                }
              }
              out[f * lout + t] = acc;
            }
          }
        }
        break;
      }
      case LayerKind::Dense: {
        const std::size_t in_flat = layer.in.flat();
        const std::size_t units = layer.out.channels;
        for (std::size_t r = 0; r < batch; ++r) {
          const double* in = x.row(r);
          double* out = y.row(r);
          for (std::size_t u = 0; u < units; ++u) {
            double acc = layer.b[u];
            const double* wrow = layer.w.data() + u * in_flat;
            for (std::size_t i = 0; i < in_flat; ++i) acc += wrow[i] * in[i];
            out[u] = acc;
          }
        }
        break;
      }
      case LayerKind::ReLU: {
        for (std::size_t k = 0; k < x.values.size(); ++k) {
          y.values[k] = x.values[k] > 0.0 ? x.values[k] : 0.0;
        }
        break;
      }
      case LayerKind::MaxPool1D: {
        const auto& pool = std::get<MaxPool1DSpec>(layer.spec);
        const std::size_t lin = layer.in.length;
        const std::size_t lout = layer.out.length;
        if (argmax_out) argmax_out->assign(batch * layer.out.flat(), 0);
        for (std::size_t r = 0; r < batch; ++r) {
          const double* in = x.row(r);
          double* out = y.row(r);
          for (std::size_t c = 0; c < layer.in.channels; ++c) {
            for (std::size_t t = 0; t < lout; ++t) {
              std::size_t best = c * lin + t * pool.width;
              double best_v = in[best];
              for (std::size_t j = 1; j < pool.width; ++j) {
                const std::size_t idx = c * lin + t * pool.width + j;
                if (in[idx] > best_v) {
                  best_v = in[idx];
                  best = idx;
                }
              }
              out[c * lout + t] = best_v;
              if (argmax_out) {
                (*argmax_out)[r * layer.out.flat() + c * lout + t] = best;
              }
            }
          }
        }
        break;
      }
      case LayerKind::GlobalAveragePool: {
        const std::size_t lin = layer.in.length;
        for (std::size_t r = 0; r < batch; ++r) {
          const double* in = x.row(r);
          double* out = y.row(r);
          for (std::size_t c = 0; c < layer.in.channels; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < lin; ++j) acc += in[c * lin + j];
            out[c] = acc / static_cast<double>(lin);
          }
        }
        break;
      }
      case LayerKind::Softmax: {
        const std::size_t n = layer.in.flat();
        for (std::size_t r = 0; r < batch; ++r) {
          const double* in = x.row(r);
          double* out = y.row(r);
          double m = in[0];
          for (std::size_t i = 1; i < n; ++i) m = std::max(m, in[i]);
          double sum = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            out[i] = std::exp(in[i] - m);
            sum += out[i];
          }
          for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
        }
        break;
      }
      case LayerKind::Sigmoid: {
        for (std::size_t k = 0; k < x.values.size(); ++k) {
          y.values[k] = 1.0 / (1.0 + std::exp(-x.values[k]));
        }
        break;
      }
    }
    return y;
  }

  static Tensor apply_backward(const Layer& layer, const Tensor& x,
                               const Tensor& g,
                               const std::vector<std::size_t>& argmax,
                               std::vector<double>& gw,
                               std::vector<double>& gb) {
    const std::size_t batch = x.rows();
    Tensor gx = Tensor::zeros({batch, layer.in.flat()});
    switch (kind_of(layer.spec)) {
      case LayerKind::Conv1D: {
        const auto& conv = std::get<Conv1DSpec>(layer.spec);
        const std::size_t cin = layer.in.channels;
        const std::size_t lin = layer.in.length;
        const std::size_t lout = layer.out.length;
        for (std::size_t r = 0; r < batch; ++r) {
          const double* in = x.row(r);
          const double* go = g.row(r);
          double* gi = gx.row(r);
          for (std::size_t f = 0; f < conv.filters; ++f) {
            for (std::size_t t = 0; t < lout; ++t) {
              const double gv = go[f * lout + t];
              if (gv == 0.0) continue;
              gb[f] += gv;
              const std::size_t start = t * conv.stride;
              for (std::size_t c = 0; c < cin; ++c) {
                const std::size_t wbase = (f * cin + c) * conv.kernel;
                const std::size_t ibase = c * lin + start;
                for (std::size_t j = 0; j < conv.kernel; ++j) {
                  gw[wbase + j] += gv * in[ibase + j];
                  gi[ibase + j] += gv * layer.w[wbase + j];
                }
              }
            }
          }
        }
        break;
      }
      case LayerKind::Dense: {
        const std::size_t in_flat = layer.in.flat();
        const std::size_t units = layer.out.channels;
        for (std::size_t r = 0; r < batch; ++r) {
          const double* in = x.row(r);
          const double* go = g.row(r);
          double* gi = gx.row(r);
          for (std::size_t u = 0; u < units; ++u) {
            const double gv = go[u];
            if (gv == 0.0) continue;
            gb[u] += gv;
            const double* wrow = layer.w.data() + u * in_flat;
            double* gwrow = gw.data() + u * in_flat;
            for (std::size_t i = 0; i < in_flat; ++i) {
              gwrow[i] += gv * in[i];
              gi[i] += gv * wrow[i];
            }
          }
        }
        break;
      }
      case LayerKind::ReLU: {
        for (std::size_t k = 0; k < x.values.size(); ++k) {
          gx.values[k] = x.values[k] > 0.0 ? g.values[k] : 0.0;
        }
        break;
      }
      case LayerKind::MaxPool1D: {
        const std::size_t out_flat = layer.out.flat();
        for (std::size_t r = 0; r < batch; ++r) {
          const double* go = g.row(r);
          double* gi = gx.row(r);
          for (std::size_t o = 0; o < out_flat; ++o) {
            gi[argmax[r * out_flat + o]] += go[o];
          }
        }
        break;
      }
      case LayerKind::GlobalAveragePool: {
        const std::size_t lin = layer.in.length;
        const double inv = 1.0 / static_cast<double>(lin);
        for (std::size_t r = 0; r < batch; ++r) {
          const double* go = g.row(r);
          double* gi = gx.row(r);
          for (std::size_t c = 0; c < layer.in.channels; ++c) {
            for (std::size_t j = 0; j < lin; ++j) {
              gi[c * lin + j] = go[c] * inv;
            }
          }
        }
        break;
      }
      case LayerKind::Softmax: {
        const std::size_t n = layer.in.flat();
        for (std::size_t r = 0; r < batch; ++r) {
          const double* in = x.row(r);
          const double* go = g.row(r);
          double* gi = gx.row(r);
          double m = in[0];
          for (std::size_t i = 1; i < n; ++i) m = std::max(m, in[i]);
          double sum = 0.0;
          std::vector<double> y(n);
          for (std::size_t i = 0; i < n; ++i) {
            y[i] = std::exp(in[i] - m);
            sum += y[i];
          }
          double dot = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            y[i] /= sum;
            dot += go[i] * y[i];
          }
          for (std::size_t i = 0; i < n; ++i) {
            gi[i] = y[i] * (go[i] - dot);
          }
        }
        break;
      }
      case LayerKind::Sigmoid: {
        for (std::size_t k = 0; k < x.values.size(); ++k) {
          const double y = 1.0 / (1.0 + std::exp(-x.values[k]));
          gx.values[k] = g.values[k] * y * (1.0 - y);
        }
        break;
      }
    }
    return gx;
  }

  Extent input_;
  std::vector<Layer> layers_;
  std::uint64_t param_version_ = 1;
};

}  // namespace ernest::nn
