#pragma once

// One-parameter learner with L_S(w) = (w - a)^2 and L_Q(w) = (w - b)^2.
//
// Closed forms for s inner steps from theta:
//   phi' - a = (1 - 2 beta)^s (theta - a)
//   first-order meta gradient  = 2 (phi' - b)
//   second-order meta gradient = (1 - 2 beta)^s * 2 (phi' - b)

#include <cmath>

#include "pcmeta/autodiff.hpp"
#include "pcmeta/params.hpp"

namespace pcmeta::testing {

struct QuadraticTask {
  double a = 1.0;
  double b = 2.0;
};

template <bool SecondOrder = true>
struct BasicQuadraticLearner {
  using value_type = double;
  using task_type = QuadraticTask;
  static constexpr bool supports_second_order = SecondOrder;

  static ad::Var<double> distance(const ParamVars<double>& p, double target) {
    const auto& w = p.at("w");
    return ad::square(ad::sub(w, w.tape().constant(Tensor<double>::scalar(target))));
  }
  ad::Var<double> support_loss(const ParamVars<double>& p, const QuadraticTask& t) const { return distance(p, t.a); }
  ad::Var<double> query_loss(const ParamVars<double>& p, const QuadraticTask& t) const { return distance(p, t.b); }
};

using QuadraticLearner = BasicQuadraticLearner<true>;

inline ParamStore<double> scalar_theta(double w) { return {{"w", Tensor<double>::scalar(w)}}; }

inline double closed_form_phi(double theta, double a, double beta, std::size_t steps) {
  return a + std::pow(1.0 - 2.0 * beta, static_cast<double>(steps)) * (theta - a);
}

inline double closed_form_meta_gradient(double theta, const QuadraticTask& t, double beta, std::size_t steps,
                                        bool second_order) {
  const double phi = closed_form_phi(theta, t.a, beta, steps);
  const double g = 2.0 * (phi - t.b);
  return second_order ? std::pow(1.0 - 2.0 * beta, static_cast<double>(steps)) * g : g;
}

}  // namespace pcmeta::testing
