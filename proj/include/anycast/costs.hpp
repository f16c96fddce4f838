#pragma once

// Per-node costs of the load-management problem and the closed-form
// minimizers of the two separable Lagrangian subproblems.
//
//   overload cost  g(S) = eta * S / (1 - S / T)            (M/G/1 delay, S < T)
//   offload cost   h(x) = gamma * A * (1 - x) * (d + A * (1 - x))

#include <cmath>
#include <limits>
#include <stdexcept>

namespace anycast {

/// A cost value, or the overload marker for a proxy driven to or past its
/// threshold. Sums propagate the marker instead of producing infinities.
class Cost {
 public:
  constexpr Cost() = default;
  constexpr explicit Cost(double v) : value_(v) {}

  static constexpr Cost overload() {
    Cost c;
    c.overload_ = true;
    return c;
  }

  constexpr bool is_overload() const noexcept { return overload_; }
  constexpr bool is_finite() const noexcept { return !overload_; }

  double value() const {
    if (overload_) throw std::logic_error("Cost::value on an overloaded cost");
    return value_;
  }

  /// Finite value, or +inf for the overload marker. For comparisons only.
  constexpr double value_or_inf() const noexcept {
    return overload_ ? std::numeric_limits<double>::infinity() : value_;
  }

  constexpr Cost& operator+=(Cost o) noexcept {
    overload_ = overload_ || o.overload_;
    value_ = overload_ ? 0.0 : value_ + o.value_;
    return *this;
  }
  constexpr Cost& operator+=(double v) noexcept {
    if (!overload_) value_ += v;
    return *this;
  }
  friend constexpr Cost operator+(Cost a, Cost b) noexcept { return a += b; }
  friend constexpr Cost operator+(Cost a, double b) noexcept { return a += b; }

 private:
  double value_ = 0.0;
  bool overload_ = false;
};

struct OverloadCost {
  double eta = 1.0;
  double threshold = 1.0;
};

struct OffloadCost {
  double gamma_cost = 1.0;
  double arrival = 0.0;
  double latency = 0.0;
};

inline Cost eval_g(const OverloadCost& c, double s) {
  if (s < 0.0) throw std::invalid_argument("eval_g: negative load");
  if (s >= c.threshold) return Cost::overload();
  return Cost(c.eta * s / (1.0 - s / c.threshold));
}

/// dg/ds on [0, T).
inline double eval_g_derivative(const OverloadCost& c, double s) {
  const double u = 1.0 - s / c.threshold;
  return c.eta / (u * u);
}

inline double eval_h(const OffloadCost& c, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("eval_h: x outside [0, 1]");
  const double y = 1.0 - x;
  return c.gamma_cost * c.arrival * y * (c.latency + c.arrival * y);
}

inline double eval_h_derivative(const OffloadCost& c, double x) {
  return -c.gamma_cost * c.arrival * (c.latency + 2.0 * c.arrival * (1.0 - x));
}

/// argmin_{0 <= s <= T} g(s) - mu * s  =  T * max(0, 1 - sqrt(eta / mu)).
inline double solve_s_subproblem(const OverloadCost& c, double mu) {
  if (mu < 0.0) throw std::invalid_argument("solve_s_subproblem: negative multiplier");
  if (mu <= c.eta) return 0.0;  // covers mu = 0, where eta / mu is undefined
  return c.threshold * (1.0 - std::sqrt(c.eta / mu));
}

/// argmin_{0 <= x <= 1} h(x) + A * beta * x, with c1 = A * gamma and
/// c2 = gamma * d - beta. A zero arrival rate makes every x optimal; 1 is
/// returned.
inline double solve_x_subproblem(const OffloadCost& c, double beta) {
  if (c.arrival == 0.0) return 1.0;
  const double c1 = c.arrival * c.gamma_cost;
  const double c2 = c.gamma_cost * c.latency - beta;
  if (c2 > 0.0) return 1.0;
  if (2.0 * c1 >= -c2) return 1.0 + c2 / (2.0 * c1);
  return 0.0;
}

/// Subproblem values at the minimizers (the infima themselves).
inline double s_subproblem_value(const OverloadCost& c, double mu) {
  const double s = solve_s_subproblem(c, mu);
  return eval_g(c, s).value() - mu * s;
}

inline double x_subproblem_value(const OffloadCost& c, double beta) {
  const double x = solve_x_subproblem(c, beta);
  return eval_h(c, x) + c.arrival * beta * x;
}

/// Golden-section search for the minimizer of a convex f on [lo, hi], to an
/// absolute x-tolerance. f may return +inf on part of the interval. The end
/// points are compared against the interior estimate, so monotone functions
/// return the exact boundary.
template <class F>
double minimize_1d(F&& f, double lo, double hi, double tol = 1e-10) {
  if (!(lo < hi)) throw std::invalid_argument("minimize_1d: empty interval");
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  double best = 0.5 * (a + b);
  double fbest = f(best);
  for (double end : {lo, hi}) {
    const double fe = f(end);
    if (fe < fbest) {
      best = end;
      fbest = fe;
    }
  }
  return best;
}

/// Fallback s-subproblem for a user-supplied convex overload cost that is
/// finite on [0, threshold].
template <class G>
double solve_s_subproblem_generic(G&& g, double threshold, double mu) {
  return minimize_1d([&](double s) { return g(s) - mu * s; }, 0.0, threshold);
}

/// Fallback x-subproblem for a user-supplied convex offload cost.
template <class H>
double solve_x_subproblem_generic(H&& h, double arrival, double beta) {
  return minimize_1d([&](double x) { return h(x) + arrival * beta * x; }, 0.0, 1.0);
}

}  // namespace anycast
