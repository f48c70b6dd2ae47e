#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ernest/errors.hpp"

namespace ernest::nn {

// Feature-map extent between layers: `channels` parallel tracks of
// `length` samples. Dense layers consume the flattened product.
struct Extent {
  std::size_t channels = 1;
  std::size_t length = 1;

  std::size_t flat() const { return channels * length; }

  bool operator==(const Extent&) const = default;
};

struct Conv1DSpec {
  std::size_t filters = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
};

struct DenseSpec {
  std::size_t units = 1;
};

struct ReLUSpec {};

struct MaxPool1DSpec {
  std::size_t width = 2;
};

struct GlobalAveragePoolSpec {};

struct SoftmaxSpec {};

struct SigmoidSpec {};

using LayerSpec = std::variant<Conv1DSpec, DenseSpec, ReLUSpec, MaxPool1DSpec,
                               GlobalAveragePoolSpec, SoftmaxSpec, SigmoidSpec>;

enum class LayerKind {
  Conv1D,
  Dense,
  ReLU,
  MaxPool1D,
  GlobalAveragePool,
  Softmax,
  Sigmoid,
};

inline LayerKind kind_of(const LayerSpec& spec) {
  return static_cast<LayerKind>(spec.index());
}

inline std::string kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv1D: return "conv1d";
    case LayerKind::Dense: return "dense";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool1D: return "maxpool1d";
    case LayerKind::GlobalAveragePool: return "gap";
    case LayerKind::Softmax: return "softmax";
    case LayerKind::Sigmoid: return "sigmoid";
  }
  return "unknown";
}

inline void validate_spec(const LayerSpec& spec) {
  if (const auto* conv = std::get_if<Conv1DSpec>(&spec)) {
    if (conv->filters == 0 || conv->kernel == 0) {
      throw ConfigError("conv1d: filters and kernel must be positive");
    }
    if (conv->stride < 1) throw ConfigError("conv1d: stride must be >= 1");
  } else if (const auto* dense = std::get_if<DenseSpec>(&spec)) {
    if (dense->units == 0) throw ConfigError("dense: units must be positive");
  } else if (const auto* pool = std::get_if<MaxPool1DSpec>(&spec)) {
    if (pool->width == 0) throw ConfigError("maxpool1d: width must be positive");
  }
}

// Output extent of `spec` applied to `in`; throws ShapeError when the
// shapes do not compose (e.g. kernel longer than the input).
inline Extent resolve_extent(const LayerSpec& spec, const Extent& in) {
  validate_spec(spec);
  switch (kind_of(spec)) {
    case LayerKind::Conv1D: {
      const auto& conv = std::get<Conv1DSpec>(spec);
      if (conv.kernel > in.length) {
        throw ShapeError("conv1d: kernel " + std::to_string(conv.kernel) +
                         " exceeds input length " + std::to_string(in.length));
      }
      return Extent{conv.filters, (in.length - conv.kernel) / conv.stride + 1};
    }
    case LayerKind::Dense:
      return Extent{std::get<DenseSpec>(spec).units, 1};
    case LayerKind::MaxPool1D: {
      const auto& pool = std::get<MaxPool1DSpec>(spec);
      if (pool.width > in.length) {
        throw ShapeError("maxpool1d: width exceeds input length");
      }
      return Extent{in.channels, in.length / pool.width};
    }
    case LayerKind::GlobalAveragePool:
      return Extent{in.channels, 1};
    case LayerKind::ReLU:
    case LayerKind::Softmax:
    case LayerKind::Sigmoid:
      return in;
  }
  throw ShapeError("unknown layer kind");
}

inline nlohmann::json spec_to_json(const LayerSpec& spec) {
  nlohmann::json j;
  j["kind"] = kind_name(kind_of(spec));
  if (const auto* conv = std::get_if<Conv1DSpec>(&spec)) {
    j["filters"] = conv->filters;
    j["kernel"] = conv->kernel;
    j["stride"] = conv->stride;
  } else if (const auto* dense = std::get_if<DenseSpec>(&spec)) {
    j["units"] = dense->units;
  } else if (const auto* pool = std::get_if<MaxPool1DSpec>(&spec)) {
    j["width"] = pool->width;
  }
  return j;
}

inline LayerSpec spec_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "conv1d") {
    return Conv1DSpec{j.at("filters").get<std::size_t>(),
                      j.at("kernel").get<std::size_t>(),
                      j.at("stride").get<std::size_t>()};
  }
  if (kind == "dense") return DenseSpec{j.at("units").get<std::size_t>()};
  if (kind == "relu") return ReLUSpec{};
  if (kind == "maxpool1d") return MaxPool1DSpec{j.at("width").get<std::size_t>()};
  if (kind == "gap") return GlobalAveragePoolSpec{};
  if (kind == "softmax") return SoftmaxSpec{};
  if (kind == "sigmoid") return SigmoidSpec{};
  throw ConfigError("unknown layer kind '" + kind + "'");
}

inline nlohmann::json specs_to_json(const std::vector<LayerSpec>& specs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : specs) arr.push_back(spec_to_json(s));
  return arr;
}

inline std::vector<LayerSpec> specs_from_json(const nlohmann::json& arr) {
  std::vector<LayerSpec> specs;
  for (const auto& j : arr) specs.push_back(spec_from_json(j));
  return specs;
}

}  // namespace ernest::nn
