#pragma once

// Compact PointNet-style per-point segmentation network.
//
//   [optional 3x3 input transform on XYZ]
//   -> shared per-point MLP1            (local features)
//   -> shared per-point MLP2
//   -> max over points                  (global feature)
//   -> [local | global] per point
//   -> segmentation head -> per-point class logits
//
// No batch normalization: every layer is affine + ReLU, so an inner-loop step
// on the support set is a plain gradient step on the parameter store.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcmeta/autodiff.hpp"
#include "pcmeta/error.hpp"
#include "pcmeta/params.hpp"
#include "pcmeta/tensor.hpp"

namespace pcmeta {

struct PointNetConfig {
  std::size_t input_dim = 9;
  std::vector<std::size_t> mlp1_widths{64, 64};
  std::vector<std::size_t> mlp2_widths{64, 128, 256};
  std::vector<std::size_t> seg_head_widths{128, 64};
  std::size_t num_classes = 13;
  bool use_tnet = false;
  std::vector<std::size_t> tnet_mlp_widths{32, 64};
  std::vector<std::size_t> tnet_fc_widths{32};
  std::size_t points_per_block = 1024;

  void validate() const {
    auto positive = [](const std::vector<std::size_t>& widths, const char* what) {
      if (widths.empty()) throw ConfigError(std::string(what) + " must have at least one layer");
      for (auto w : widths) {
        if (w < 1) throw ConfigError(std::string(what) + " widths must be >= 1");
      }
    };
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    positive(mlp1_widths, "mlp1_widths");
    positive(mlp2_widths, "mlp2_widths");
    for (auto w : seg_head_widths) {
      if (w < 1) throw ConfigError("seg_head_widths widths must be >= 1");
    }
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (points_per_block < 1) throw ConfigError("points_per_block must be >= 1");
    if (use_tnet) {
      if (input_dim < 3) throw ConfigError("the input transform needs XYZ in the first 3 columns");
      positive(tnet_mlp_widths, "tnet_mlp_widths");
      for (auto w : tnet_fc_widths) {
        if (w < 1) throw ConfigError("tnet_fc_widths widths must be >= 1");
      }
    }
  }

  friend bool operator==(const PointNetConfig&, const PointNetConfig&) = default;
};

inline void to_json(nlohmann::json& j, const PointNetConfig& c) {
  j = nlohmann::json{{"input_dim", c.input_dim},
                     {"mlp1_widths", c.mlp1_widths},
                     {"mlp2_widths", c.mlp2_widths},
                     {"seg_head_widths", c.seg_head_widths},
                     {"num_classes", c.num_classes},
                     {"use_tnet", c.use_tnet},
                     {"tnet_mlp_widths", c.tnet_mlp_widths},
                     {"tnet_fc_widths", c.tnet_fc_widths},
                     {"points_per_block", c.points_per_block}};
}

/// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, PointNetConfig& c) {
  const PointNetConfig d;
  c.input_dim = j.value("input_dim", d.input_dim);
  c.mlp1_widths = j.value("mlp1_widths", d.mlp1_widths);
  c.mlp2_widths = j.value("mlp2_widths", d.mlp2_widths);
  c.seg_head_widths = j.value("seg_head_widths", d.seg_head_widths);
  c.num_classes = j.value("num_classes", d.num_classes);
  c.use_tnet = j.value("use_tnet", d.use_tnet);
  c.tnet_mlp_widths = j.value("tnet_mlp_widths", d.tnet_mlp_widths);
  c.tnet_fc_widths = j.value("tnet_fc_widths", d.tnet_fc_widths);
  c.points_per_block = j.value("points_per_block", d.points_per_block);
}

/// One affine layer of the network: `name.weight` is [in x out] and
/// `name.bias` is [1 x out].
struct LayerSpec {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  bool zero_init = false;
};

/// Layers in construction order. Parameter initialization draws from the
/// generator in exactly this order.
inline std::vector<LayerSpec> layer_specs(const PointNetConfig& cfg) {
  std::vector<LayerSpec> layers;
  auto chain = [&](const std::string& prefix, std::size_t in, const std::vector<std::size_t>& widths) {
    for (std::size_t i = 0; i < widths.size(); ++i) {
      layers.push_back({prefix + "." + std::to_string(i), in, widths[i], false});
      in = widths[i];
    }
    return in;
  };
  if (cfg.use_tnet) {
    std::size_t width = chain("tnet.mlp", 3, cfg.tnet_mlp_widths);
    width = chain("tnet.fc", width, cfg.tnet_fc_widths);
    layers.push_back({"tnet.out", width, 9, true});
  }
  const std::size_t local = chain("mlp1", cfg.input_dim, cfg.mlp1_widths);
  const std::size_t global = chain("mlp2", local, cfg.mlp2_widths);
  const std::size_t head = chain("head", local + global, cfg.seg_head_widths);
  layers.push_back({"head.out", head, cfg.num_classes, false});
  return layers;
}

inline std::size_t parameter_count(const PointNetConfig& cfg) {
  std::size_t n = 0;
  for (const auto& l : layer_specs(cfg)) n += l.in * l.out + l.out;
  return n;
}

/// Weights ~ U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)), biases zero. The
/// input-transform output layer starts at zero so the predicted matrix is the
/// identity. Values are drawn in double precision, so float and double stores
/// from the same seed agree up to rounding.
template <std::floating_point T>
ParamStore<T> init_params(const PointNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ParamStore<T> params;
  for (const auto& layer : layer_specs(cfg)) {
    Tensor<T> w(Shape{layer.in, layer.out});
    if (!layer.zero_init) {
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.in));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (auto& v : w.values()) v = static_cast<T>(u(rng));
    }
    params.emplace(layer.name + ".weight", std::move(w));
    params.emplace(layer.name + ".bias", Tensor<T>(Shape{1, layer.out}));
  }
  return params;
}

template <std::floating_point T>
struct ForwardResult {
  ad::Var<T> logits;          ///< [P x C]
  ad::Var<T> global_feature;  ///< [1 x G], max over points of the MLP2 output
};

namespace detail {

template <std::floating_point T>
ad::Var<T> affine(const ParamVars<T>& p, const std::string& name, const ad::Var<T>& x) {
  return ad::add_rowvec(ad::matmul(x, p.at(name + ".weight")), p.at(name + ".bias"));
}

template <std::floating_point T>
ad::Var<T> mlp(const ParamVars<T>& p, const std::string& prefix, std::size_t depth, ad::Var<T> x) {
  for (std::size_t i = 0; i < depth; ++i) x = ad::relu(affine(p, prefix + "." + std::to_string(i), x));
  return x;
}

}  // namespace detail

/// Applies the learned input transform to [P x 3] coordinates: a small shared
/// MLP and max-pool predict a 3x3 matrix (offset by the identity), and the
/// result is xyz * matrix.
template <std::floating_point T>
ad::Var<T> tnet_transform(const ParamVars<T>& p, const PointNetConfig& cfg, const ad::Var<T>& xyz) {
  if (!cfg.use_tnet) throw ConfigError("tnet_transform called with use_tnet = false");
  if (xyz.shape().cols != 3) throw DimensionError("tnet_transform expects [P x 3], got " + to_string(xyz.shape()));
  auto& tape = xyz.tape();
  auto h = detail::mlp(p, "tnet.mlp", cfg.tnet_mlp_widths.size(), xyz);
  auto pooled = ad::max_over_points(h).values;
  pooled = detail::mlp(p, "tnet.fc", cfg.tnet_fc_widths.size(), pooled);
  auto delta = ad::reshape(detail::affine(p, "tnet.out", pooled), Shape{3, 3});
  auto matrix = ad::add(delta, tape.constant(Tensor<T>::identity(3)));
  return ad::matmul(xyz, matrix);
}

/// Runs the network on one block of [P x input_dim] features.
template <std::floating_point T>
ForwardResult<T> forward(const ParamVars<T>& p, const PointNetConfig& cfg, ad::Var<T> x) {
  if (x.shape().cols != cfg.input_dim) {
    throw DimensionError("block has " + std::to_string(x.shape().cols) + " feature columns, model expects " +
                         std::to_string(cfg.input_dim));
  }
  const std::size_t points = x.shape().rows;
  if (points == 0) throw EmptyInputError("forward on an empty block");
  if (cfg.use_tnet) {
    auto xyz = tnet_transform(p, cfg, ad::slice_cols(x, 0, 3));
    x = cfg.input_dim > 3 ? ad::concat_cols(xyz, ad::slice_cols(x, 3, cfg.input_dim - 3)) : xyz;
  }
  auto local = detail::mlp(p, "mlp1", cfg.mlp1_widths.size(), x);
  auto deep = detail::mlp(p, "mlp2", cfg.mlp2_widths.size(), local);
  auto global = ad::max_over_points(deep).values;
  auto h = ad::concat_cols(local, ad::broadcast_rows(global, points));
  h = detail::mlp(p, "head", cfg.seg_head_widths.size(), h);
  return {detail::affine(p, "head.out", h), global};
}

/// Inference-only forward pass; returns [P x C] logits.
template <std::floating_point T>
Tensor<T> forward(const ParamStore<T>& params, const PointNetConfig& cfg, const Tensor<T>& features) {
  ad::Tape<T> tape;
  typename ad::Tape<T>::NoGradGuard guard(tape);
  auto vars = leaves(tape, params, false);
  return forward(vars, cfg, tape.constant(features)).logits.value();
}

/// Per-point argmax; ties go to the lowest class index.
template <std::floating_point T>
std::vector<int> predict_labels(const Tensor<T>& logits) {
  std::vector<int> labels(logits.rows(), 0);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    labels[r] = static_cast<int>(best);
  }
  return labels;
}

}  // namespace pcmeta
