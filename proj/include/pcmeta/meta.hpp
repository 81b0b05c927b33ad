#pragma once

// MAML over any learner that can build taped support and query losses.
//
//   inner loop   phi' = theta - beta * grad L_S(theta)        (repeated inner_steps times)
//   query loss   L_Q(phi')
//   batch loss   mean over the tasks of a batch (collaborative mode)
//   outer step   theta <- theta - alpha * grad_theta of the batch loss
//
// first_order treats d phi' / d theta as the identity, i.e. the gradient of
// L_Q is taken at phi'. second_order differentiates through every inner step.

#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcmeta/autodiff.hpp"
#include "pcmeta/error.hpp"
#include "pcmeta/metrics.hpp"
#include "pcmeta/params.hpp"
#include "pcmeta/pointnet.hpp"
#include "pcmeta/sampler.hpp"

namespace pcmeta {

enum class GradientMode { first_order, second_order };

inline std::string to_string(GradientMode m) { return m == GradientMode::first_order ? "first_order" : "second_order"; }

inline GradientMode parse_gradient_mode(const std::string& s) {
  if (s == "first_order") return GradientMode::first_order;
  if (s == "second_order") return GradientMode::second_order;
  throw ConfigError("unknown gradient mode '" + s + "' (expected first_order or second_order)");
}

struct MetaConfig {
  double alpha = 1e-3;  ///< outer (meta) step size
  double beta = 1e-3;   ///< inner learning rate
  std::size_t inner_steps = 1;
  std::size_t tasks_per_batch = 4;
  GradientMode gradient_mode = GradientMode::first_order;
  bool collaborative = true;
  std::size_t epochs = 1;
  std::size_t steps_per_epoch = 500;
  /// Non-empty: single decayed run, the schedule split into equal phases
  /// using these betas in order (overrides `beta`).
  std::vector<double> beta_phases;
  /// Abort once the query loss exceeds this multiple of the first loss.
  double divergence_factor = 1e4;
  std::size_t threads = 1;

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    for (double b : beta_phases)
      if (!(b >= 0.0)) throw ConfigError("beta_phases entries must be >= 0");
    if (inner_steps < 1) throw ConfigError("inner_steps must be >= 1");
    if (tasks_per_batch < 1) throw ConfigError("tasks_per_batch must be >= 1");
    if (!(divergence_factor > 1.0)) throw ConfigError("divergence_factor must be > 1");
  }

  [[nodiscard]] std::size_t total_steps() const noexcept { return epochs * steps_per_epoch; }

  [[nodiscard]] double beta_at(std::size_t step) const {
    if (beta_phases.empty()) return beta;
    const std::size_t total = std::max<std::size_t>(total_steps(), 1);
    return beta_phases[std::min(step * beta_phases.size() / total, beta_phases.size() - 1)];
  }
};

inline void to_json(nlohmann::json& j, const MetaConfig& c) {
  j = {{"alpha", c.alpha},
       {"beta", c.beta},
       {"inner_steps", c.inner_steps},
       {"tasks_per_batch", c.tasks_per_batch},
       {"gradient_mode", to_string(c.gradient_mode)},
       {"collaborative", c.collaborative},
       {"epochs", c.epochs},
       {"steps_per_epoch", c.steps_per_epoch},
       {"beta_phases", c.beta_phases},
       {"divergence_factor", c.divergence_factor},
       {"threads", c.threads}};
}

inline void from_json(const nlohmann::json& j, MetaConfig& c) {
  const MetaConfig d;
  c.alpha = j.value("alpha", d.alpha);
  c.beta = j.value("beta", d.beta);
  c.inner_steps = j.value("inner_steps", d.inner_steps);
  c.tasks_per_batch = j.value("tasks_per_batch", d.tasks_per_batch);
  c.gradient_mode = parse_gradient_mode(j.value("gradient_mode", to_string(d.gradient_mode)));
  c.collaborative = j.value("collaborative", d.collaborative);
  c.epochs = j.value("epochs", d.epochs);
  c.steps_per_epoch = j.value("steps_per_epoch", d.steps_per_epoch);
  c.beta_phases = j.value("beta_phases", d.beta_phases);
  c.divergence_factor = j.value("divergence_factor", d.divergence_factor);
  c.threads = j.value("threads", d.threads);
}

/// A learner turns parameters plus one task into taped scalar losses. Both
/// losses must be built on the tape that owns the parameter Vars.
template <class L>
concept Learner = requires(const L& learner, const ParamVars<typename L::value_type>& p,
                           const typename L::task_type& task) {
  typename L::value_type;
  typename L::task_type;
  { L::supports_second_order } -> std::convertible_to<bool>;
  { learner.support_loss(p, task) } -> std::same_as<ad::Var<typename L::value_type>>;
  { learner.query_loss(p, task) } -> std::same_as<ad::Var<typename L::value_type>>;
};

/// Gradient steps on the support loss; theta is copied, never modified.
template <Learner L>
ParamStore<typename L::value_type> inner_adapt(const L& learner, const ParamStore<typename L::value_type>& theta,
                                               const typename L::task_type& task, double beta, std::size_t steps) {
  using T = typename L::value_type;
  ParamStore<T> phi = theta;
  if (beta == 0.0) return phi;
  for (std::size_t s = 0; s < steps; ++s) {
    ad::Tape<T> tape;
    const auto vars = leaves(tape, phi, true);
    const auto grads = backward(learner.support_loss(vars, task), vars);
    phi = sgd_step(phi, grads, static_cast<T>(beta));
  }
  return phi;
}

template <Learner L>
typename L::value_type query_loss(const L& learner, const ParamStore<typename L::value_type>& phi,
                                  const typename L::task_type& task) {
  using T = typename L::value_type;
  ad::Tape<T> tape;
  typename ad::Tape<T>::NoGradGuard guard(tape);
  return learner.query_loss(leaves(tape, phi, false), task).value().item();
}

/// Mean over tasks of L_Q(inner_adapt(theta, S_i)).
template <Learner L>
typename L::value_type collaborative_query_loss(const L& learner, const ParamStore<typename L::value_type>& theta,
                                                std::span<const typename L::task_type> tasks, double beta,
                                                std::size_t steps) {
  using T = typename L::value_type;
  if (tasks.empty()) throw EmptyInputError("collaborative_query_loss on an empty batch");
  T total = T(0);
  for (const auto& task : tasks) total += query_loss(learner, inner_adapt(learner, theta, task, beta, steps), task);
  return total / static_cast<T>(tasks.size());
}

template <std::floating_point T>
struct TaskGradient {
  T query_loss = T(0);
  GradientMap<T> grad;
};

/// Meta gradient and query loss of a single task at theta.
template <Learner L>
TaskGradient<typename L::value_type> task_meta_gradient(const L& learner,
                                                        const ParamStore<typename L::value_type>& theta,
                                                        const typename L::task_type& task, double beta,
                                                        std::size_t steps, GradientMode mode) {
  using T = typename L::value_type;
  if (mode == GradientMode::second_order) {
    if constexpr (!L::supports_second_order) {
      throw CapabilityError("second_order meta gradients are not supported by this learner");
    } else {
      ad::Tape<T> tape;
      const auto theta_vars = leaves(tape, theta, true);
      auto phi = theta_vars;
      for (std::size_t s = 0; s < steps; ++s) {
        const auto g = gradient_vars(learner.support_loss(phi, task), phi, true);
        phi = sgd_step(phi, g, static_cast<T>(beta));
      }
      const auto q = learner.query_loss(phi, task);
      return {q.value().item(), backward(q, theta_vars)};
    }
  }
  const auto phi = inner_adapt(learner, theta, task, beta, steps);
  ad::Tape<T> tape;
  const auto phi_vars = leaves(tape, phi, true);
  const auto q = learner.query_loss(phi_vars, task);
  return {q.value().item(), backward(q, phi_vars)};
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception thrown by any worker is rethrown here.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < threads; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::scoped_lock lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

template <std::floating_point T>
void add_into(GradientMap<T>& acc, const GradientMap<T>& g) {
  for (auto& [name, t] : acc) {
    const auto& src = g.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += src[i];
  }
}

}  // namespace detail

template <std::floating_point T>
struct MetaGradient {
  GradientMap<T> grad;        ///< mean of the per-task gradients
  T query_loss = T(0);        ///< mean of the per-task query losses
  std::vector<T> task_losses;
};

/// Gradient of the batch-mean query loss with respect to theta. Per-task work
/// may run concurrently; the reduction is an ordered sum over task index.
template <Learner L>
MetaGradient<typename L::value_type> meta_gradient(const L& learner, const ParamStore<typename L::value_type>& theta,
                                                   std::span<const typename L::task_type> batch,
                                                   const MetaConfig& cfg, double beta) {
  using T = typename L::value_type;
  if (batch.empty()) throw EmptyInputError("meta_gradient on an empty batch");
  std::vector<TaskGradient<T>> per_task(batch.size());
  detail::parallel_for(batch.size(), cfg.threads, [&](std::size_t i) {
    per_task[i] = task_meta_gradient(learner, theta, batch[i], beta, cfg.inner_steps, cfg.gradient_mode);
  });
  MetaGradient<T> out;
  out.grad = per_task[0].grad;
  for (std::size_t i = 1; i < per_task.size(); ++i) detail::add_into(out.grad, per_task[i].grad);
  const T inv = T(1) / static_cast<T>(batch.size());
  for (auto& [name, t] : out.grad)
    for (auto& v : t.values()) v *= inv;
  T total = T(0);
  for (const auto& r : per_task) {
    out.task_losses.push_back(r.query_loss);
    total += r.query_loss;
  }
  out.query_loss = total * inv;
  return out;
}

template <std::floating_point T>
struct TrainState {
  ParamStore<T> theta;
  std::size_t step = 0;
  std::vector<T> loss_history;  ///< one entry per completed outer step
};

/// One outer update. Collaborative: a single step along the batch-mean
/// gradient. Otherwise the tasks update theta one after another. Returns a
/// new state; `state` is left as it was.
template <Learner L>
TrainState<typename L::value_type> meta_step(const L& learner, const TrainState<typename L::value_type>& state,
                                             std::span<const typename L::task_type> batch, const MetaConfig& cfg) {
  using T = typename L::value_type;
  const double beta = cfg.beta_at(state.step);
  const T alpha = static_cast<T>(cfg.alpha);
  TrainState<T> next = state;
  T loss = T(0);
  if (cfg.collaborative) {
    const auto mg = meta_gradient(learner, state.theta, batch, cfg, beta);
    loss = mg.query_loss;
    if (std::isfinite(static_cast<double>(loss))) next.theta = sgd_step(state.theta, mg.grad, alpha);
  } else {
    if (batch.empty()) throw EmptyInputError("meta_step on an empty batch");
    for (const auto& task : batch) {
      const auto tg = task_meta_gradient(learner, next.theta, task, beta, cfg.inner_steps, cfg.gradient_mode);
      loss += tg.query_loss;
      if (!std::isfinite(static_cast<double>(tg.query_loss))) break;
      next.theta = sgd_step(next.theta, tg.grad, alpha);
    }
    loss /= static_cast<T>(batch.size());
  }
  if (!std::isfinite(static_cast<double>(loss))) throw DivergenceError("non-finite query loss", state.step);
  if (!state.loss_history.empty() &&
      static_cast<double>(loss) > cfg.divergence_factor * static_cast<double>(state.loss_history.front())) {
    throw DivergenceError("query loss " + std::to_string(loss) + " exceeds " + std::to_string(cfg.divergence_factor) +
                              " x the initial loss",
                          state.step);
  }
  next.loss_history.push_back(loss);
  ++next.step;
  return next;
}

struct StepRecord {
  std::size_t step = 0;
  double query_loss = 0.0;
  double beta = 0.0;
  double alpha = 0.0;
};

template <std::floating_point T>
struct TrainObserver {
  std::function<void(const StepRecord&)> on_step;
  /// Called after every completed epoch (1-based).
  std::function<void(std::size_t epoch, const TrainState<T>&)> on_epoch;
};

/// The full schedule. `batch_at(step)` supplies the tasks of each outer step,
/// so the run is reproducible from the step index alone.
template <Learner L>
TrainState<typename L::value_type> pretrain(
    const L& learner, ParamStore<typename L::value_type> theta0,
    const std::function<std::vector<typename L::task_type>(std::size_t step)>& batch_at, const MetaConfig& cfg,
    const TrainObserver<typename L::value_type>& observer = {}) {
  cfg.validate();
  TrainState<typename L::value_type> state{std::move(theta0), 0, {}};
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t s = 0; s < cfg.steps_per_epoch; ++s) {
      const auto batch = batch_at(state.step);
      const double beta = cfg.beta_at(state.step);
      state = meta_step(learner, state, std::span<const typename L::task_type>(batch), cfg);
      if (observer.on_step) observer.on_step({state.step - 1, static_cast<double>(state.loss_history.back()), beta, cfg.alpha});
    }
    if (observer.on_epoch && cfg.steps_per_epoch > 0) observer.on_epoch(epoch, state);
  }
  return state;
}

// ---------------------------------------------------------------------------
// PointNet learner

/// Losses are the mean per-point cross-entropy over every block of the set.
template <std::floating_point T>
class PointNetLearner {
 public:
  using value_type = T;
  using task_type = Task<T>;
  static constexpr bool supports_second_order = true;

  explicit PointNetLearner(PointNetConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  [[nodiscard]] const PointNetConfig& config() const noexcept { return cfg_; }

  ad::Var<T> support_loss(const ParamVars<T>& p, const Task<T>& task) const { return mean_loss(p, task.support); }
  ad::Var<T> query_loss(const ParamVars<T>& p, const Task<T>& task) const { return mean_loss(p, task.query); }

  ad::Var<T> mean_loss(const ParamVars<T>& p, const std::vector<LabeledBlock<T>>& blocks) const {
    if (blocks.empty()) throw EmptyInputError("loss over an empty block set");
    if (p.empty()) throw ContractError("loss with no parameters");
    auto& tape = p.begin()->second.tape();
    std::size_t total = 0;
    for (const auto& b : blocks) total += b.labels.size();
    ad::Var<T> acc;
    for (const auto& b : blocks) {
      const auto logits = forward(p, cfg_, tape.constant(b.features)).logits;
      const auto weighted = ad::scale(ad::cross_entropy(logits, std::span<const int>(b.labels)),
                                      static_cast<T>(b.labels.size()) / static_cast<T>(total));
      acc = acc.valid() ? ad::add(acc, weighted) : weighted;
    }
    return acc;
  }

  [[nodiscard]] std::vector<int> predict(const ParamStore<T>& params, const Tensor<T>& features) const {
    return predict_labels(forward(params, cfg_, features));
  }

 private:
  PointNetConfig cfg_;
};

/// Tasks of outer step `step`: episodes [step*N, (step+1)*N) of `dist`.
template <std::floating_point T>
std::vector<Task<T>> batch_from(const TaskDistribution& dist, std::size_t step, std::size_t tasks_per_batch,
                                std::size_t points_per_block) {
  std::vector<Task<T>> batch;
  for (std::size_t i = 0; i < tasks_per_batch; ++i)
    batch.push_back(materialize<T>(dist.index(), dist.episode(step * tasks_per_batch + i), points_per_block));
  return batch;
}

struct EvalSummary {
  ConfusionMatrix confusion;             ///< all query points of all episodes
  SegMetrics overall;                    ///< from `confusion`
  std::vector<SegMetrics> per_episode;
  double mean_oacc = 0.0, mean_macc = 0.0, mean_miou = 0.0;  ///< over episodes
};

/// Transfer protocol: for each episode adapt on S, predict Q, score.
template <std::floating_point T>
EvalSummary adapt_and_eval(const PointNetLearner<T>& learner, const ParamStore<T>& theta, const TaskDistribution& target,
                           double beta, std::size_t inner_steps, std::size_t threads = 1) {
  if (target.size() == 0) throw ConfigError("adapt_and_eval needs at least one episode");
  const std::size_t classes = learner.config().num_classes;
  const std::size_t P = learner.config().points_per_block;
  std::vector<ConfusionMatrix> matrices(target.size(), ConfusionMatrix(classes));
  detail::parallel_for(target.size(), threads, [&](std::size_t e) {
    const auto task = materialize<T>(target.index(), target.episode(e), P);
    const auto phi = inner_adapt(learner, theta, task, beta, inner_steps);
    auto cm = ConfusionMatrix(classes);
    for (const auto& q : task.query) cm = accumulate(cm, learner.predict(phi, q.features), q.labels);
    matrices[e] = std::move(cm);
  });
  EvalSummary out;
  out.confusion = ConfusionMatrix(classes);
  for (const auto& cm : matrices) {
    out.confusion += cm;
    out.per_episode.push_back(compute_metrics(cm));
    out.mean_oacc += out.per_episode.back().oacc;
    out.mean_macc += out.per_episode.back().macc;
    out.mean_miou += out.per_episode.back().miou;
  }
  const double n = static_cast<double>(matrices.size());
  out.mean_oacc /= n;
  out.mean_macc /= n;
  out.mean_miou /= n;
  out.overall = compute_metrics(out.confusion);
  return out;
}

}  // namespace pcmeta
