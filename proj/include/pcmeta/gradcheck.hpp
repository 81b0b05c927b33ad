#pragma once

// Reverse-mode gradients of a seeded mini network against central finite
// differences, on sampled parameter coordinates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcmeta/autodiff.hpp"
#include "pcmeta/checkpoint.hpp"
#include "pcmeta/params.hpp"
#include "pcmeta/pointnet.hpp"

namespace pcmeta {

struct GradcheckConfig {
  PointNetConfig model = [] {
    PointNetConfig c;
    c.mlp1_widths = {8, 8};
    c.mlp2_widths = {8, 16, 32};
    c.seg_head_widths = {16, 8};
    c.num_classes = 3;
    c.points_per_block = 16;
    return c;
  }();
  std::size_t coordinates = 100;
  double eps = 1e-5;
  std::uint64_t seed = 0;
  Precision precision = Precision::float64;
  /// Negative control: perturbs every analytic gradient so the check must fail.
  bool inject_error = false;
};

inline void from_json(const nlohmann::json& j, GradcheckConfig& c) {
  const GradcheckConfig d;
  c.model = j.contains("model") ? j["model"].get<PointNetConfig>() : d.model;
  c.coordinates = j.value("coordinates", d.coordinates);
  c.eps = j.value("eps", d.eps);
  c.seed = j.value("seed", d.seed);
  c.precision = parse_precision(j.value("precision", to_string(d.precision)));
  c.inject_error = j.value("inject_error", d.inject_error);
}

/// float64 gradients must agree to 1e-7; float32 gradients are compared with
/// float64 differences and must agree to 1e-4.
inline double gradcheck_tolerance(Precision p) { return p == Precision::float64 ? 1e-7 : 1e-4; }

/// |a - b| / max(|a|, |b|, 1e-3); the floor keeps near-zero gradients from
/// being judged on finite-difference round-off alone.
inline double gradient_rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3});
}

struct CoordinateCheck {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<CoordinateCheck> checks;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

namespace detail {

template <std::floating_point T>
T block_loss(const ParamStore<T>& params, const PointNetConfig& cfg, const Tensor<T>& x, const std::vector<int>& y) {
  ad::Tape<T> tape;
  typename ad::Tape<T>::NoGradGuard guard(tape);
  const auto vars = leaves(tape, params, false);
  return ad::cross_entropy(forward(vars, cfg, tape.constant(x)).logits, std::span<const int>(y)).value().item();
}

template <std::floating_point T>
GradientMap<T> block_gradient(const ParamStore<T>& params, const PointNetConfig& cfg, const Tensor<T>& x,
                              const std::vector<int>& y) {
  ad::Tape<T> tape;
  const auto vars = leaves(tape, params, true);
  return backward(ad::cross_entropy(forward(vars, cfg, tape.constant(x)).logits, std::span<const int>(y)), vars);
}

template <std::floating_point To, std::floating_point From>
ParamStore<To> cast_store(const ParamStore<From>& p) {
  ParamStore<To> out;
  for (const auto& [name, t] : p) out.emplace(name, t.template cast<To>());
  return out;
}

}  // namespace detail

inline GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  cfg.model.validate();
  if (cfg.coordinates < 1) throw ConfigError("gradcheck needs at least one coordinate");
  if (!(cfg.eps > 0.0)) throw ConfigError("gradcheck eps must be > 0");
  std::mt19937_64 rng(cfg.seed);
  const std::size_t P = cfg.model.points_per_block;
  Tensor<double> x(Shape{P, cfg.model.input_dim});
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : x.values()) v = u(rng);
  std::vector<int> y(P);
  std::uniform_int_distribution<int> label(0, static_cast<int>(cfg.model.num_classes) - 1);
  for (auto& l : y) l = label(rng);

  auto params = init_params<double>(cfg.model, rng());
  // Non-zero biases so no unit starts exactly at a ReLU kink pattern shared by all points.
  for (auto& [name, t] : params)
    if (name.ends_with(".bias"))
      for (auto& v : t.values()) v = 0.1 * u(rng);

  GradientMap<double> analytic;
  if (cfg.precision == Precision::float64) {
    analytic = detail::block_gradient(params, cfg.model, x, y);
  } else {
    // Evaluate at float-representable parameters so both routes see the same point.
    const auto p32 = detail::cast_store<float>(params);
    params = detail::cast_store<double>(p32);
    analytic = detail::cast_store<double>(detail::block_gradient(p32, cfg.model, x.cast<float>(), y));
    x = x.cast<float>().cast<double>();
  }

  std::vector<std::pair<std::string, std::size_t>> coords;
  for (const auto& [name, t] : params)
    for (std::size_t i = 0; i < t.size(); ++i) coords.emplace_back(name, i);
  const std::size_t m = std::min(cfg.coordinates, coords.size());
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, coords.size() - 1);
    std::swap(coords[i], coords[pick(rng)]);
  }

  const std::function<double(const ParamStore<double>&)> f = [&](const ParamStore<double>& p) {
    return detail::block_loss(p, cfg.model, x, y);
  };
  GradcheckReport report;
  report.tolerance = gradcheck_tolerance(cfg.precision);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& [name, index] = coords[i];
    CoordinateCheck c{name, index, analytic.at(name)[index], 0.0, 0.0};
    if (cfg.inject_error) c.analytic = c.analytic * 1.01 + 1e-3;
    c.numeric = finite_diff_coordinate(f, params, name, index, cfg.eps);
    c.rel_error = gradient_rel_error(c.analytic, c.numeric);
    report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
    report.checks.push_back(std::move(c));
  }
  report.passed = report.max_rel_error <= report.tolerance;
  return report;
}

}  // namespace pcmeta
