#pragma once

// Distributed dual decomposition. Relaxing the coupling constraints
// (B x)_i <= S_i with multipliers mu >= 0 splits the Lagrangian into one
// load subproblem and one offload subproblem per node; node i needs only
// mu_i, A_i, its own costs and the coupling factor beta_i = sum_j C(i, j) mu_j.
// Multipliers follow projected supergradient ascent with a constant step:
//   mu_i <- max(0, mu_i + alpha * (S_obs_i - S*_i)),   S_obs = B x*.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "anycast/costs.hpp"
#include "anycast/exact.hpp"
#include "anycast/fastcontrol.hpp"
#include "anycast/model.hpp"

namespace anycast {

enum class BetaMode { Exact, FastControl };

struct DualConfig {
  double epsilon = 0.01;
  std::optional<double> step_size;  // derived from epsilon when empty
  std::size_t max_iters = 1'000'000;
  BetaMode beta_mode = BetaMode::Exact;
  ChannelConfig channel;
  // Stop once the best dual value gains less than window_tol * (1 + |best|)
  // over `window` iterations.
  std::size_t window = 200;
  double window_tol = 1e-9;
  // Reference primal optimum; when set, history rows carry the gap.
  std::optional<double> reference_optimum;
};

struct DualHistoryRow {
  std::size_t k = 0;
  double dual = 0.0;
  double best_dual = 0.0;
  double grad_norm_sq = 0.0;
  double max_overload = 0.0;  // max_i (S_obs_i - T_i)
  std::optional<double> gap;  // reference_optimum - best_dual

  friend bool operator==(const DualHistoryRow&, const DualHistoryRow&) = default;
};

struct DualState {
  Vector mu;
  Vector beta;
  Vector x_star;
  Vector s_star;
  Vector s_obs;
  std::size_t k = 0;
  double dual = 0.0;
  double best_dual = -std::numeric_limits<double>::infinity();
};

struct DualSolution {
  Vector x;       // ergodic average of the offload iterates
  Vector s_obs;   // B x
  Vector x_last;  // last subproblem minimizer
  Vector s_obs_last;
  Vector s_star_last;
  Vector mu;
  std::size_t iterations = 0;
  bool converged = false;
  double best_dual = 0.0;
  double step_size = 0.0;
  Cost primal_cost;  // W(x, B x) at the averaged iterate
  std::vector<DualHistoryRow> history;
  // Supergradient bound ||g||^2 <= (sum_i A_i)^2 + N * max_i T_i^2.
  std::size_t bound_violations = 0;
  double max_bound_ratio = 0.0;
};

inline double supergradient_bound(const SystemInstance& inst) {
  const double a = total_arrivals(inst);
  const double t = max_threshold(inst);
  return a * a + static_cast<double>(inst.size()) * t * t;
}

/// alpha = 2 epsilon / (A_max^2 + N T_max^2), A_max = sum_i A_i.
inline double step_size_for_epsilon(const SystemInstance& inst, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("step_size_for_epsilon: epsilon must be > 0");
  return 2.0 * epsilon / supergradient_bound(inst);
}

inline OverloadCost overload_cost(const SystemInstance& inst, std::size_t i) {
  return {inst.eta[i], inst.thresholds[i]};
}

inline OffloadCost offload_cost(const SystemInstance& inst, std::size_t i) {
  return {inst.gamma_cost[i], inst.arrivals[i], inst.latency[i]};
}

/// beta_i = sum_j C(i, j) mu_j, correctly rounded.
inline Vector compute_beta_exact(const SystemInstance& inst, std::span<const double> mu) {
  const std::size_t n = inst.size();
  if (mu.size() != n) throw std::invalid_argument("compute_beta_exact: length mismatch");
  Vector beta(n);
  for (std::size_t i = 0; i < n; ++i) beta[i] = exact_dot(inst.corr.row(i), mu);
  return beta;
}

/// g = B x* - s*.
inline Vector supergradient(const Matrix& routing, std::span<const double> x_star,
                            std::span<const double> s_star) {
  Vector g = multiply(routing, x_star);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= s_star[i];
  return g;
}

inline Vector supergradient(const SystemInstance& inst, std::span<const double> x_star,
                            std::span<const double> s_star) {
  return supergradient(routing_matrix(inst), x_star, s_star);
}

/// Projected ascent step max(0, mu + alpha g).
inline Vector dual_update(std::span<const double> mu, std::span<const double> g, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("dual_update: step must be > 0");
  Vector out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) out[i] = std::max(0.0, mu[i] + alpha * g[i]);
  return out;
}

/// L(x, S, mu) = sum_i [g_i(S_i) - mu_i S_i] + sum_i [h_i(x_i) + A_i x_i beta_i].
inline Cost eval_lagrangian(const SystemInstance& inst, std::span<const double> x,
                            std::span<const double> s, std::span<const double> mu) {
  const std::size_t n = inst.size();
  const Vector beta = compute_beta_exact(inst, mu);
  Cost total(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    total += eval_g(overload_cost(inst, i), s[i]);
    total += -mu[i] * s[i];
    total += eval_h(offload_cost(inst, i), x[i]) + inst.arrivals[i] * x[i] * beta[i];
  }
  return total;
}

/// Primal objective W(x, B x).
inline Cost primal_objective(const SystemInstance& inst, const Matrix& routing,
                             std::span<const double> x) {
  const Vector s = multiply(routing, x);
  Cost total(0.0);
  for (std::size_t i = 0; i < inst.size(); ++i) {
    total += eval_g(overload_cost(inst, i), s[i]);
    total += eval_h(offload_cost(inst, i), x[i]);
  }
  return total;
}

inline Cost primal_objective(const SystemInstance& inst, std::span<const double> x) {
  return primal_objective(inst, routing_matrix(inst), x);
}

struct DualEvaluation {
  double value = 0.0;
  Vector x_star;
  Vector s_star;
  Vector beta;
};

namespace detail {

inline DualEvaluation solve_subproblems(const SystemInstance& inst, std::span<const double> mu,
                                        Vector beta) {
  const std::size_t n = inst.size();
  DualEvaluation ev;
  ev.x_star.resize(n);
  ev.s_star.resize(n);
  double value = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto g = overload_cost(inst, i);
    const auto h = offload_cost(inst, i);
    const double s = solve_s_subproblem(g, mu[i]);
    const double x = solve_x_subproblem(h, beta[i]);
    ev.s_star[i] = s;
    ev.x_star[i] = x;
    value += eval_g(g, s).value() - mu[i] * s;
    value += eval_h(h, x) + inst.arrivals[i] * beta[i] * x;
  }
  ev.value = value;
  ev.beta = std::move(beta);
  return ev;
}

}  // namespace detail

/// D(mu) and the separable minimizers (x*, s*).
inline DualEvaluation eval_dual(const SystemInstance& inst, std::span<const double> mu) {
  for (double m : mu)
    if (m < 0.0) throw std::invalid_argument("eval_dual: negative multiplier");
  return detail::solve_subproblems(inst, mu, compute_beta_exact(inst, mu));
}

/// Runs the per-node dual algorithm from mu = 0. Every iteration solves both
/// subproblems at each node, observes S_obs = B x* and moves the multipliers.
///
/// The reported primal point is the average of x* over the current suffix
/// [2^m, k] of iterations (the averaging window restarts at powers of two),
/// which discards the initial transient while still averaging out the
/// oscillation of constant-step iterates.
class DualSolver {
 public:
  DualSolver(const SystemInstance& inst, DualConfig cfg) : inst_(inst), cfg_(std::move(cfg)) {
    require_valid(inst_);
    if (cfg_.beta_mode == BetaMode::FastControl && !strictly_positive_corr(inst_))
      throw ChannelError("fastcontrol mode needs strictly positive routing probabilities");
    if (cfg_.max_iters == 0) throw std::invalid_argument("DualSolver: max_iters must be >= 1");
    alpha_ = cfg_.step_size ? *cfg_.step_size : step_size_for_epsilon(inst_, cfg_.epsilon);
    if (!(alpha_ > 0.0)) throw std::invalid_argument("DualSolver: step size must be > 0");
    routing_ = routing_matrix(inst_);
    bound_ = supergradient_bound(inst_);
    const std::size_t n = inst_.size();
    state_.mu.assign(n, 0.0);
    avg_sum_.assign(n, 0.0);
  }

  double step_size() const noexcept { return alpha_; }
  const DualState& state() const noexcept { return state_; }

  /// One iteration; returns the supergradient.
  Vector step() {
    const std::size_t n = inst_.size();
    ++state_.k;
    Vector beta = coupling(state_.mu);
    DualEvaluation ev = detail::solve_subproblems(inst_, state_.mu, std::move(beta));
    if (cfg_.beta_mode == BetaMode::FastControl && cfg_.channel.mode == ChannelMode::Poisson) {
      // Noisy beta makes ev.value a noisy Lagrangian; report the true dual.
      ev.value = eval_dual(inst_, state_.mu).value;
    }
    state_.dual = ev.value;
    state_.best_dual = std::max(state_.best_dual, ev.value);
    state_.beta = std::move(ev.beta);
    state_.x_star = std::move(ev.x_star);
    state_.s_star = std::move(ev.s_star);
    state_.s_obs = multiply(routing_, state_.x_star);

    Vector g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = state_.s_obs[i] - state_.s_star[i];
    const double gn = squared_norm(g);
    if (gn > bound_) ++bound_violations_;
    max_bound_ratio_ = std::max(max_bound_ratio_, gn / bound_);
    last_grad_norm_sq_ = gn;

    if (state_.k >= next_restart_) {
      std::fill(avg_sum_.begin(), avg_sum_.end(), 0.0);
      avg_count_ = 0;
      next_restart_ *= 2;
    }
    for (std::size_t i = 0; i < n; ++i) avg_sum_[i] += state_.x_star[i];
    ++avg_count_;

    state_.mu = dual_update(state_.mu, g, alpha_);
    return g;
  }

  DualSolution run() {
    DualSolution sol;
    sol.step_size = alpha_;
    std::vector<double> best_trace;  // best dual per iteration, for the window test
    best_trace.reserve(std::min<std::size_t>(cfg_.max_iters, 1u << 20));
    bool converged = false;
    while (state_.k < cfg_.max_iters) {
      step();
      record(sol.history);
      best_trace.push_back(state_.best_dual);
      const std::size_t k = state_.k;
      if (k > cfg_.window) {
        const double gain = state_.best_dual - best_trace[k - 1 - cfg_.window];
        if (gain < cfg_.window_tol * (1.0 + std::abs(state_.best_dual))) {
          converged = true;
          break;
        }
      }
    }
    const std::size_t n = inst_.size();
    sol.converged = converged;
    sol.iterations = state_.k;
    sol.best_dual = state_.best_dual;
    sol.mu = state_.mu;
    sol.x_last = state_.x_star;
    sol.s_obs_last = state_.s_obs;
    sol.s_star_last = state_.s_star;
    sol.x.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      sol.x[i] = std::clamp(avg_sum_[i] / static_cast<double>(avg_count_), 0.0, 1.0);
    sol.s_obs = multiply(routing_, sol.x);
    sol.primal_cost = primal_objective(inst_, routing_, sol.x);
    sol.bound_violations = bound_violations_;
    sol.max_bound_ratio = max_bound_ratio_;
    return sol;
  }

 private:
  Vector coupling(std::span<const double> mu) {
    if (cfg_.beta_mode == BetaMode::Exact) return compute_beta_exact(inst_, mu);
    ChannelConfig ch = cfg_.channel;
    ch.seed = cfg_.channel.seed * 0x9E3779B97F4A7C15ull + state_.k;
    return channel_beta(inst_, mu, ch);
  }

  void record(std::vector<DualHistoryRow>& history) const {
    const std::size_t k = state_.k;
    if (k > 10'000 && k % 10 != 0) return;
    DualHistoryRow row;
    row.k = k;
    row.dual = state_.dual;
    row.best_dual = state_.best_dual;
    row.grad_norm_sq = last_grad_norm_sq_;
    double mo = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inst_.size(); ++i)
      mo = std::max(mo, state_.s_obs[i] - inst_.thresholds[i]);
    row.max_overload = mo;
    if (cfg_.reference_optimum) row.gap = *cfg_.reference_optimum - state_.best_dual;
    history.push_back(row);
  }

  SystemInstance inst_;
  DualConfig cfg_;
  double alpha_ = 0.0;
  Matrix routing_;
  double bound_ = 0.0;
  DualState state_;
  Vector avg_sum_;
  std::size_t avg_count_ = 0;
  std::size_t next_restart_ = 1;
  std::size_t bound_violations_ = 0;
  double max_bound_ratio_ = 0.0;
  double last_grad_norm_sq_ = 0.0;
};

inline DualSolution run_dual(const SystemInstance& inst, const DualConfig& cfg) {
  return DualSolver(inst, cfg).run();
}

}  // namespace anycast
