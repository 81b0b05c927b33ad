#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pcmeta/autodiff.hpp"
#include "pcmeta/error.hpp"
#include "pcmeta/tensor.hpp"

namespace pcmeta {

/// Named parameter tensors. std::map keeps iteration (and therefore
/// serialization and reduction) order deterministic.
template <std::floating_point T>
using ParamStore = std::map<std::string, Tensor<T>>;

/// Same keys and shapes as the ParamStore it was computed against.
template <std::floating_point T>
using GradientMap = std::map<std::string, Tensor<T>>;

template <std::floating_point T>
using ParamVars = std::map<std::string, ad::Var<T>>;

template <std::floating_point T>
std::size_t parameter_count(const ParamStore<T>& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.size();
  return n;
}

template <std::floating_point T>
ParamVars<T> leaves(ad::Tape<T>& tape, const ParamStore<T>& params, bool requires_grad) {
  ParamVars<T> vars;
  for (const auto& [name, t] : params) vars.emplace(name, tape.leaf(t, requires_grad));
  return vars;
}

template <std::floating_point T>
ParamStore<T> values_of(const ParamVars<T>& vars) {
  ParamStore<T> out;
  for (const auto& [name, v] : vars) out.emplace(name, v.value());
  return out;
}

/// Gradient Vars of `loss` for every entry of `wrt`, keyed by name.
template <std::floating_point T>
ParamVars<T> gradient_vars(const ad::Var<T>& loss, const ParamVars<T>& wrt, bool create_graph) {
  std::vector<ad::Var<T>> targets;
  targets.reserve(wrt.size());
  for (const auto& [name, v] : wrt) targets.push_back(v);
  auto grads = loss.tape().grad(loss, targets, create_graph);
  ParamVars<T> out;
  std::size_t i = 0;
  for (const auto& [name, v] : wrt) out.emplace(name, grads[i++]);
  return out;
}

/// Reverse-mode gradient of a scalar loss with respect to `params`.
template <std::floating_point T>
GradientMap<T> backward(const ad::Var<T>& loss, const ParamVars<T>& params) {
  return values_of(gradient_vars(loss, params, false));
}

namespace detail {

template <std::floating_point T, class A, class B>
void require_matching_keys(const std::map<std::string, A>& params, const std::map<std::string, B>& grads) {
  if (params.size() != grads.size()) {
    throw ContractError("gradient map has " + std::to_string(grads.size()) + " entries for " +
                        std::to_string(params.size()) + " parameters");
  }
  for (const auto& [name, p] : params) {
    if (!grads.contains(name)) throw ContractError("missing gradient for parameter '" + name + "'");
  }
}

}  // namespace detail

/// params - lr * grads, returned as a new store.
template <std::floating_point T>
ParamStore<T> sgd_step(const ParamStore<T>& params, const GradientMap<T>& grads, T lr) {
  detail::require_matching_keys<T>(params, grads);
  ParamStore<T> out = params;
  for (auto& [name, p] : out) {
    const auto& g = grads.at(name);
    if (g.shape() != p.shape()) {
      throw DimensionError("gradient for '" + name + "' has shape " + to_string(g.shape()) +
                           ", parameter has " + to_string(p.shape()));
    }
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  }
  return out;
}

/// Taped variant of sgd_step; with gradients recorded under create_graph the
/// result stays differentiable with respect to the original parameters.
template <std::floating_point T>
ParamVars<T> sgd_step(const ParamVars<T>& params, const ParamVars<T>& grads, T lr) {
  detail::require_matching_keys<T>(params, grads);
  ParamVars<T> out;
  for (const auto& [name, p] : params) out.emplace(name, ad::sub(p, ad::scale(grads.at(name), lr)));
  return out;
}

/// Central differences (f(p + eps e_i) - f(p - eps e_i)) / (2 eps), one
/// coordinate at a time.
template <std::floating_point T>
GradientMap<T> finite_diff_gradient(const std::function<T(const ParamStore<T>&)>& f,
                                    const ParamStore<T>& params, T eps) {
  if (!(eps > T(0))) throw ContractError("finite-difference step must be positive");
  GradientMap<T> out;
  ParamStore<T> probe = params;
  for (const auto& [name, p] : params) {
    Tensor<T> g(p.shape());
    auto& slot = probe.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T original = slot[i];
      slot[i] = original + eps;
      const T up = f(probe);
      slot[i] = original - eps;
      const T down = f(probe);
      slot[i] = original;
      g[i] = (up - down) / (T(2) * eps);
    }
    out.emplace(name, std::move(g));
  }
  return out;
}

/// Single-coordinate central difference, for sampled gradient checks.
template <std::floating_point T>
T finite_diff_coordinate(const std::function<T(const ParamStore<T>&)>& f, ParamStore<T> params,
                         const std::string& name, std::size_t index, T eps) {
  if (!(eps > T(0))) throw ContractError("finite-difference step must be positive");
  auto& slot = params.at(name);
  const T original = slot[index];
  slot[index] = original + eps;
  const T up = f(params);
  slot[index] = original - eps;
  const T down = f(params);
  return (up - down) / (T(2) * eps);
}

}  // namespace pcmeta
