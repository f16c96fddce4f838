#pragma once

// Brute-force reference solvers for small instances. They share no code with
// the dual algorithm beyond the cost functions and the load map, and are used
// to referee it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "anycast/costs.hpp"
#include "anycast/greedy.hpp"
#include "anycast/model.hpp"

namespace anycast {

enum class OracleMethod { Grid, ProjectedDescent };

inline const char* to_string(OracleMethod m) {
  return m == OracleMethod::Grid ? "GRID" : "PROJECTED_DESCENT";
}

struct OracleResult {
  Vector x;
  Vector s;
  double objective = std::numeric_limits<double>::infinity();
  OracleMethod method = OracleMethod::Grid;
  double resolution = 0.0;   // grid spacing, or the descent step tolerance
  double error_bound = 0.0;  // grid: sum of neighbour differences at the optimum
  bool converged = true;
  std::size_t evaluations = 0;
};

namespace detail {

/// W(x, B x), +inf when some S_i reaches T_i. Allocation-free.
struct PrimalEvaluator {
  const SystemInstance& inst;
  Matrix routing;

  explicit PrimalEvaluator(const SystemInstance& i) : inst(i), routing(routing_matrix(i)) {}

  double operator()(std::span<const double> x) const {
    const std::size_t n = inst.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += routing(i, j) * x[j];
      if (s >= inst.thresholds[i]) return std::numeric_limits<double>::infinity();
      total += inst.eta[i] * s / (1.0 - s / inst.thresholds[i]);
      const double y = 1.0 - x[i];
      total += inst.gamma_cost[i] * inst.arrivals[i] * y * (inst.latency[i] + inst.arrivals[i] * y);
    }
    return total;
  }
};

}  // namespace detail

inline constexpr double default_grid_resolution(std::size_t n) { return n <= 2 ? 1e-3 : 1e-2; }

/// Exhaustive search over the grid {0, r, 2r, ..., 1}^n for n <= 3.
inline OracleResult primal_grid_solve(const SystemInstance& inst, double resolution = 0.0,
                                      unsigned threads = 0) {
  require_valid(inst);
  const std::size_t n = inst.size();
  if (n > 3) throw std::invalid_argument("primal_grid_solve: n > 3 is not supported");
  if (resolution == 0.0) resolution = default_grid_resolution(n);
  if (!(resolution > 0.0 && resolution <= 1.0))
    throw std::invalid_argument("primal_grid_solve: resolution must be in (0, 1]");
  const auto steps = static_cast<std::size_t>(std::llround(1.0 / resolution));
  const std::size_t m = steps + 1;
  auto coord = [&](std::size_t k) { return k == steps ? 1.0 : static_cast<double>(k) * resolution; };

  std::size_t total = 1;
  for (std::size_t d = 0; d < n; ++d) total *= m;

  const detail::PrimalEvaluator w(inst);
  auto point = [&](std::size_t idx, double* x) {
    for (std::size_t d = 0; d < n; ++d) {
      x[d] = coord(idx % m);
      idx /= m;
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  struct Best {
    double value = std::numeric_limits<double>::infinity();
    std::size_t index = 0;
  };
  std::vector<Best> partial(threads);
  auto scan = [&](unsigned t) {
    const std::size_t begin = total * t / threads;
    const std::size_t end = total * (t + 1) / threads;
    double x[3];
    Best b;
    b.index = begin;
    for (std::size_t idx = begin; idx < end; ++idx) {
      point(idx, x);
      const double v = w(std::span<const double>(x, n));
      if (v < b.value) b = {v, idx};
    }
    partial[t] = b;
  };
  if (threads == 1) {
    scan(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(scan, t);
    for (auto& th : pool) th.join();
  }
  Best best;
  for (const auto& b : partial)
    if (b.value < best.value) best = b;  // chunks are ordered, so ties keep the lowest index

  OracleResult r;
  r.method = OracleMethod::Grid;
  r.resolution = resolution;
  r.evaluations = total;
  r.x.assign(n, 0.0);
  point(best.index, r.x.data());
  r.objective = best.value;
  r.s = compute_load(w.routing, r.x);

  double bound = 0.0;
  Vector probe = r.x;
  for (std::size_t d = 0; d < n; ++d) {
    double worst = 0.0;
    for (double dir : {-1.0, 1.0}) {
      probe = r.x;
      probe[d] = std::clamp(r.x[d] + dir * resolution, 0.0, 1.0);
      if (probe[d] == r.x[d]) continue;
      const double v = w(probe);
      if (std::isfinite(v)) worst = std::max(worst, std::abs(v - r.objective));
    }
    bound += worst;
  }
  r.error_bound = bound;
  return r;
}

struct DescentConfig {
  Vector x0;                       // empty: 0.5 everywhere
  double barrier_start = 1e-2;
  double barrier_factor = 0.1;
  double barrier_end = 1e-12;      // last barrier stage; a pure stage follows
  std::size_t iters_per_stage = 5000;
  double tolerance = 1e-13;        // stage ends when the projected step moves x less
};

/// Projected gradient descent on W(x, B x) + w * sum_i -log(T_i - S_i) over
/// the box, with Armijo backtracking and w driven geometrically to zero. A
/// start outside the feasible region is pulled toward x = 0 (where S = 0)
/// until it is strictly feasible.
inline OracleResult primal_projected_descent(const SystemInstance& inst,
                                             const DescentConfig& cfg = {}) {
  require_valid(inst);
  const std::size_t n = inst.size();
  const detail::PrimalEvaluator w(inst);
  const Matrix& b = w.routing;
  Vector x = cfg.x0.empty() ? Vector(n, 0.5) : cfg.x0;
  if (x.size() != n) throw std::invalid_argument("primal_projected_descent: x0 length mismatch");
  for (double& v : x) v = std::clamp(v, 0.0, 1.0);
  std::size_t evals = 0;

  auto loads = [&](std::span<const double> p) {
    Vector s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) s[i] += b(i, j) * p[j];
    return s;
  };
  auto feasible = [&](std::span<const double> p) {
    const Vector s = loads(p);
    for (std::size_t i = 0; i < n; ++i)
      if (!(s[i] < inst.thresholds[i])) return false;
    return true;
  };
  while (!feasible(x)) {
    for (double& v : x) v *= 0.5;
    if (norm_inf(x) < 1e-300) {
      std::fill(x.begin(), x.end(), 0.0);
      break;
    }
  }

  auto objective = [&](std::span<const double> p, double weight) {
    ++evals;
    const double base = w(p);
    if (!std::isfinite(base) || weight == 0.0) return base;
    const Vector s = loads(p);
    double barrier = 0.0;
    for (std::size_t i = 0; i < n; ++i) barrier -= std::log(inst.thresholds[i] - s[i]);
    return base + weight * barrier;
  };
  auto gradient = [&](std::span<const double> p, double weight) {
    const Vector s = loads(p);
    Vector dload(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double gap = inst.thresholds[i] - s[i];
      dload[i] = eval_g_derivative(OverloadCost{inst.eta[i], inst.thresholds[i]}, s[i]) +
                 (weight > 0.0 ? weight / gap : 0.0);
    }
    Vector grad(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) grad[j] += b(i, j) * dload[i];
      grad[j] += eval_h_derivative(
          OffloadCost{inst.gamma_cost[j], inst.arrivals[j], inst.latency[j]}, p[j]);
    }
    return grad;
  };

  bool all_converged = true;
  std::vector<double> weights;
  for (double wt = cfg.barrier_start; wt >= cfg.barrier_end; wt *= cfg.barrier_factor)
    weights.push_back(wt);
  weights.push_back(0.0);

  double t = 1.0;
  for (double weight : weights) {
    double fx = objective(x, weight);
    bool stage_converged = false;
    for (std::size_t it = 0; it < cfg.iters_per_stage; ++it) {
      const Vector grad = gradient(x, weight);
      Vector trial(n);
      bool accepted = false;
      double moved = 0.0;
      t = std::min(1.0, 4.0 * t);
      for (int bt = 0; bt < 200; ++bt) {
        double decrease = 0.0;
        moved = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          trial[j] = std::clamp(x[j] - t * grad[j], 0.0, 1.0);
          decrease += grad[j] * (x[j] - trial[j]);
          moved = std::max(moved, std::abs(trial[j] - x[j]));
        }
        const double ft = objective(trial, weight);
        if (std::isfinite(ft) && ft <= fx - 1e-4 * decrease) {
          accepted = true;
          x = trial;
          fx = ft;
          break;
        }
        t *= 0.5;
      }
      if (!accepted || moved < cfg.tolerance) {
        stage_converged = true;
        break;
      }
    }
    if (!stage_converged) all_converged = false;
  }

  OracleResult r;
  r.method = OracleMethod::ProjectedDescent;
  r.resolution = cfg.tolerance;
  r.x = x;
  r.s = loads(x);
  r.objective = w(x);
  r.converged = all_converged;
  r.evaluations = evals;
  return r;
}

/// Central differences of the greedy field.
inline Matrix finite_diff_jacobian(const SystemInstance& inst, std::span<const double> x,
                                   double sensitivity, double step = 1e-6) {
  const std::size_t n = inst.size();
  if (x.size() != n) throw std::invalid_argument("finite_diff_jacobian: length mismatch");
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_jacobian: step must be > 0");
  for (double v : x)
    if (!(v >= step && v <= 1.0 - step))
      throw std::invalid_argument("finite_diff_jacobian: x within one step of the boundary");
  const Matrix b = routing_matrix(inst);
  Matrix j(n, n);
  Vector p(x.begin(), x.end());
  for (std::size_t c = 0; c < n; ++c) {
    p[c] = x[c] + step;
    const Vector fp = greedy_derivative(b, inst.thresholds, p, sensitivity);
    p[c] = x[c] - step;
    const Vector fm = greedy_derivative(b, inst.thresholds, p, sensitivity);
    p[c] = x[c];
    for (std::size_t r = 0; r < n; ++r) j(r, c) = (fp[r] - fm[r]) / (2.0 * step);
  }
  return j;
}

}  // namespace anycast
