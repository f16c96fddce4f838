#pragma once

// The production greedy heuristic as a damped ODE:
//
//   dx_i/dt = -beta * R(x_i) * ((B x)_i - T_i),   R(x) = x (1 - x).
//
// Each node raises its offload probability while its proxy is under its
// threshold and lowers it while overloaded. R vanishes at 0 and 1, which
// keeps trajectories started inside the unit hypercube inside it forever.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "anycast/model.hpp"

namespace anycast {

struct LogisticDamping {
  double operator()(double x) const noexcept { return x * (1.0 - x); }
};

/// Writes A(t) into `arrivals` (already sized to n).
using ArrivalSchedule = std::function<void(double t, std::span<double> arrivals)>;

struct GreedyConfig {
  double sensitivity = 1.0;
  std::optional<double> step;  // default 0.01 / (sensitivity * max(1, max_j A_j))
  double horizon = 2000.0;
  double conv_tol = 1e-8;     // ||dx/dt||_inf threshold
  std::size_t conv_window = 100;  // consecutive steps below conv_tol
  double boundary_eps = 1e-3;
  std::size_t sample_stride = 0;  // 0: choose so at most ~20k samples are kept
};

/// Post-step guard band; the exact flow never reaches the faces.
inline constexpr double kClampMargin = 1e-15;

enum class Verdict { Converged, HorizonReached };
enum class NodeState { Interior, AtZero, AtOne };

struct TrajectorySample {
  double t = 0.0;
  Vector x;
  Vector load;
  Vector load_integral;  // int_0^t S(u) du, integrated alongside x
  double variation = 0.0;  // cumulative sum over steps of ||dx||_1
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  Verdict verdict = Verdict::HorizonReached;
  Vector x_final;
  Vector load_final;
  std::vector<NodeState> states;
  double step = 0.0;
  std::size_t steps = 0;
  std::size_t clamp_count = 0;
  double max_clamp = 0.0;      // largest correction applied by the guard band
  double max_excursion = 0.0;  // largest pre-clamp distance outside [0, 1]

  bool converged() const noexcept { return verdict == Verdict::Converged; }
  double final_time() const noexcept { return samples.empty() ? 0.0 : samples.back().t; }
};

template <class Damping = LogisticDamping>
Vector greedy_derivative(const Matrix& routing, std::span<const double> thresholds,
                         std::span<const double> x, double sensitivity, Damping damping = {}) {
  const Vector s = multiply(routing, x);
  Vector dx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    dx[i] = -sensitivity * damping(x[i]) * (s[i] - thresholds[i]);
  return dx;
}

template <class Damping = LogisticDamping>
Vector greedy_derivative(const SystemInstance& inst, std::span<const double> x,
                         double sensitivity, Damping damping = {}) {
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("greedy_derivative: x outside [0, 1]");
  return greedy_derivative(routing_matrix(inst), inst.thresholds, x, sensitivity, damping);
}

inline double default_greedy_step(const SystemInstance& inst, double sensitivity) {
  double amax = 1.0;
  for (double a : inst.arrivals) amax = std::max(amax, a);
  return 0.01 / (sensitivity * amax);
}

inline NodeState classify_node(double x, double boundary_eps) {
  if (x <= boundary_eps) return NodeState::AtZero;
  if (x >= 1.0 - boundary_eps) return NodeState::AtOne;
  return NodeState::Interior;
}

namespace detail {

// Right-hand side of the augmented system (x, int S dt) at time t.
template <class Damping>
class GreedyField {
 public:
  GreedyField(const SystemInstance& inst, double sensitivity, Damping damping,
              const ArrivalSchedule* schedule)
      : inst_(inst),
        sensitivity_(sensitivity),
        damping_(damping),
        schedule_(schedule),
        arrivals_(inst.arrivals) {}

  // dx into `dx`, S into `load`. S = sum_j (A_j x_j) C(j, :), accumulated row
  // by row so the inner loop is a plain axpy.
  void operator()(double t, std::span<const double> x, std::span<double> dx,
                  std::span<double> load) {
    if (schedule_ != nullptr && *schedule_) (*schedule_)(t, arrivals_);
    const std::size_t n = x.size();
    std::fill(load.begin(), load.end(), 0.0);
    double* out = load.data();
    for (std::size_t j = 0; j < n; ++j) {
      const double w = arrivals_[j] * x[j];
      if (w == 0.0) continue;
      const double* c = inst_.corr.row(j).data();
      for (std::size_t i = 0; i < n; ++i) out[i] += c[i] * w;
    }
    for (std::size_t i = 0; i < n; ++i)
      dx[i] = -sensitivity_ * damping_(x[i]) * (load[i] - inst_.thresholds[i]);
  }

 private:
  const SystemInstance& inst_;
  double sensitivity_;
  Damping damping_;
  const ArrivalSchedule* schedule_;
  Vector arrivals_;
};

}  // namespace detail

/// Classical fourth-order Runge-Kutta at a fixed step, with the load integral
/// carried as extra state so time averages share the integrator's order.
/// Stops once ||dx/dt||_inf stays below conv_tol for conv_window steps, or
/// at the horizon.
template <class Damping = LogisticDamping>
Trajectory integrate(const SystemInstance& inst, std::span<const double> x0,
                     const GreedyConfig& cfg, const ArrivalSchedule& schedule = {},
                     Damping damping = {}) {
  const std::size_t n = inst.size();
  if (x0.size() != n) throw std::invalid_argument("integrate: x0 length mismatch");
  for (double v : x0)
    if (!(v > 0.0 && v < 1.0))
      throw std::invalid_argument("integrate: x0 must lie strictly inside the unit hypercube");
  if (!(cfg.sensitivity > 0.0) || !(cfg.horizon > 0.0) || !(cfg.conv_tol > 0.0) ||
      !(cfg.boundary_eps > 0.0 && cfg.boundary_eps < 0.5))
    throw std::invalid_argument("integrate: invalid configuration");

  const double h = cfg.step ? *cfg.step : default_greedy_step(inst, cfg.sensitivity);
  if (!(h > 0.0)) throw std::invalid_argument("integrate: step must be > 0");
  const auto max_steps = static_cast<std::size_t>(std::ceil(cfg.horizon / h));
  const std::size_t stride =
      cfg.sample_stride > 0 ? cfg.sample_stride : std::max<std::size_t>(1, max_steps / 20000);

  detail::GreedyField<Damping> field(inst, cfg.sensitivity, damping, &schedule);

  Trajectory traj;
  traj.step = h;
  Vector x(x0.begin(), x0.end());
  Vector integral(n, 0.0);
  Vector k1(n), k2(n), k3(n), k4(n);
  Vector l1(n), l2(n), l3(n), l4(n);
  Vector tmp(n);
  double variation = 0.0;
  double t = 0.0;

  auto push_sample = [&](std::span<const double> load) {
    traj.samples.push_back({t, x, Vector(load.begin(), load.end()), integral, variation});
  };

  field(t, x, k1, l1);
  push_sample(l1);

  std::size_t calm = 0;
  std::size_t step = 0;
  bool converged = false;
  while (step < max_steps) {
    // k1/l1 hold the derivative and load at (t, x).
    if (norm_inf(k1) < cfg.conv_tol) {
      if (++calm >= cfg.conv_window) {
        converged = true;
        break;
      }
    } else {
      calm = 0;
    }

    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    field(t + 0.5 * h, tmp, k2, l2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    field(t + 0.5 * h, tmp, k3, l3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    field(t + h, tmp, k4, l4);

    double dv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double next = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      traj.max_excursion = std::max({traj.max_excursion, -next, next - 1.0});
      const double guarded = std::clamp(next, kClampMargin, 1.0 - kClampMargin);
      if (guarded != next) {
        ++traj.clamp_count;
        traj.max_clamp = std::max(traj.max_clamp, std::abs(guarded - next));
      }
      dv += std::abs(guarded - x[i]);
      x[i] = guarded;
      integral[i] += h / 6.0 * (l1[i] + 2.0 * l2[i] + 2.0 * l3[i] + l4[i]);
    }
    variation += dv;
    ++step;
    t = static_cast<double>(step) * h;
    field(t, x, k1, l1);
    if (step % stride == 0) push_sample(l1);
  }
  if (traj.samples.back().t != t) push_sample(l1);

  traj.steps = step;
  traj.verdict = converged ? Verdict::Converged : Verdict::HorizonReached;
  traj.x_final = x;
  traj.load_final = l1;
  traj.states.resize(n);
  for (std::size_t i = 0; i < n; ++i) traj.states[i] = classify_node(x[i], cfg.boundary_eps);
  return traj;
}

enum class OverloadClass { Ok, OverloadedControllable, Uncontrollable };

struct OverloadReport {
  std::vector<OverloadClass> nodes;
  bool determinate = true;  // false when the trajectory never settled

  std::size_t uncontrollable_count() const {
    return static_cast<std::size_t>(
        std::count(nodes.begin(), nodes.end(), OverloadClass::Uncontrollable));
  }
};

/// A node is uncontrollably overloaded when its steady load exceeds its
/// threshold although its own DNS already sends everything away (x_i ~ 0).
inline OverloadReport detect_uncontrollable(const Trajectory& traj, const SystemInstance& inst,
                                            double boundary_eps = 1e-3, double tol = 1e-6) {
  OverloadReport rep;
  rep.determinate = traj.converged();
  const std::size_t n = inst.size();
  rep.nodes.resize(n, OverloadClass::Ok);
  for (std::size_t i = 0; i < n; ++i) {
    if (traj.load_final[i] > inst.thresholds[i] + tol)
      rep.nodes[i] = traj.x_final[i] <= boundary_eps ? OverloadClass::Uncontrollable
                                                    : OverloadClass::OverloadedControllable;
  }
  return rep;
}

struct TimeAverage {
  Vector mean_load;
  Vector deviation;  // mean_load - T
  double t_begin = 0.0;
  double t_end = 0.0;
  bool hypothesis_ok = true;  // segment stayed strictly inside the hypercube
};

/// Mean load over the sampled segment [t_begin, t_end] (snapped to sample
/// times), from the integrated load.
inline TimeAverage time_average_check(const SystemInstance& inst, const Trajectory& traj,
                                      double t_begin, double t_end, double margin = 1e-9) {
  const auto& s = traj.samples;
  if (s.size() < 2) throw std::invalid_argument("time_average_check: trajectory too short");
  auto first = std::lower_bound(s.begin(), s.end(), t_begin,
                                [](const TrajectorySample& a, double t) { return a.t < t; });
  auto last = std::upper_bound(s.begin(), s.end(), t_end,
                               [](double t, const TrajectorySample& a) { return t < a.t; });
  if (first == s.end() || last == s.begin()) throw std::invalid_argument("time_average_check: empty segment");
  --last;
  if (!(last->t > first->t)) throw std::invalid_argument("time_average_check: empty segment");
  TimeAverage out;
  out.t_begin = first->t;
  out.t_end = last->t;
  const std::size_t n = inst.size();
  const double span = last->t - first->t;
  out.mean_load.resize(n);
  out.deviation.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.mean_load[i] = (last->load_integral[i] - first->load_integral[i]) / span;
    out.deviation[i] = out.mean_load[i] - inst.thresholds[i];
  }
  for (auto it = first; it <= last; ++it)
    for (double v : it->x)
      if (!(v > margin && v < 1.0 - margin)) out.hypothesis_ok = false;
  return out;
}

/// Smallest lag in [min_lag, max_lag] at which the state at the end of the
/// trajectory recurs within `tol` (sup norm), scanning sampled lags.
inline std::optional<double> detect_period(const Trajectory& traj, double min_lag,
                                           double max_lag, double tol) {
  const auto& s = traj.samples;
  if (s.empty()) return std::nullopt;
  const auto& end = s.back();
  double best_dist = std::numeric_limits<double>::infinity();
  double best_lag = 0.0;
  for (auto it = s.rbegin() + 1; it != s.rend(); ++it) {
    const double lag = end.t - it->t;
    if (lag < min_lag) continue;
    if (lag > max_lag) break;
    double d = 0.0;
    for (std::size_t i = 0; i < end.x.size(); ++i) d = std::max(d, std::abs(end.x[i] - it->x[i]));
    if (d < best_dist) {
      best_dist = d;
      best_lag = lag;
    }
  }
  if (best_dist < tol) return best_lag;
  return std::nullopt;
}

/// Sum of ||dx||_1 over the last `fraction` of the run's duration.
inline double tail_variation(const Trajectory& traj, double fraction = 0.1) {
  const auto& s = traj.samples;
  if (s.empty()) return 0.0;
  const double cut = s.back().t * (1.0 - fraction);
  auto it = std::upper_bound(s.begin(), s.end(), cut,
                             [](double t, const TrajectorySample& a) { return t < a.t; });
  if (it != s.begin()) --it;  // sample at or before the cut
  return s.back().variation - it->variation;
}

struct FieldPoint {
  double x1, x2, dx1, dx2;
};

/// Vector field on a resolution x resolution grid of cell centres, two-node
/// instances only.
inline std::vector<FieldPoint> vector_field_grid(const SystemInstance& inst, std::size_t resolution,
                                                 double sensitivity) {
  if (inst.size() != 2) throw std::invalid_argument("vector_field_grid: two-node instances only");
  if (resolution == 0) throw std::invalid_argument("vector_field_grid: resolution must be >= 1");
  const Matrix b = routing_matrix(inst);
  std::vector<FieldPoint> out;
  out.reserve(resolution * resolution);
  for (std::size_t i = 0; i < resolution; ++i) {
    for (std::size_t j = 0; j < resolution; ++j) {
      const double x[2] = {(static_cast<double>(i) + 0.5) / static_cast<double>(resolution),
                           (static_cast<double>(j) + 0.5) / static_cast<double>(resolution)};
      const Vector d = greedy_derivative(b, inst.thresholds, x, sensitivity);
      out.push_back({x[0], x[1], d[0], d[1]});
    }
  }
  return out;
}

}  // namespace anycast
