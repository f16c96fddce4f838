#pragma once

// System model: N co-located DNS/proxy nodes in the primary layer, an anycast
// routing matrix C (C(i, j) = probability that a request answered by node i's
// DNS lands on node j's proxy), DNS arrival rates A, proxy thresholds T and
// per-node cost weights.
//
// Proxy load under offload probabilities x:
//   S_i = sum_j C(j, i) * A_j * x_j,   i.e.  S = B x  with  B = C^T diag(A).

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "anycast/matrix.hpp"

namespace anycast {

/// Row sums of the routing matrix must equal one within this tolerance.
inline constexpr double kRowSumTolerance = 1e-12;

struct SystemInstance {
  Matrix corr;
  Vector arrivals;
  Vector thresholds;
  Vector eta;         // delay-cost weight of the overload cost
  Vector gamma_cost;  // latency-cost weight of the offload cost
  Vector latency;     // round-trip latency parameter d_i to the secondary layer

  std::size_t size() const noexcept { return arrivals.size(); }
};

/// Probability vector x: x_i is the chance node i answers with the primary
/// layer's anycast address.
using OffloadState = Vector;
/// HTTP request rate arriving at each proxy.
using LoadVector = Vector;

struct Violation {
  std::string field;
  std::size_t index = 0;
  double magnitude = 0.0;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }

  std::string summary() const {
    std::ostringstream os;
    for (std::size_t k = 0; k < violations.size(); ++k) {
      if (k) os << "; ";
      os << violations[k].message;
    }
    return os.str();
  }
};

class InvalidInstance : public std::invalid_argument {
 public:
  explicit InvalidInstance(const ValidationReport& report)
      : std::invalid_argument("invalid instance: " + report.summary()), report_(report) {}
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

namespace detail {

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

inline void check_vector(ValidationReport& rep, const Vector& v, const char* name, std::size_t n,
                         bool strictly_positive) {
  if (v.size() != n) {
    rep.violations.push_back({name, v.size(), static_cast<double>(v.size()),
                              std::string(name) + " has length " + std::to_string(v.size()) +
                                  ", expected " + std::to_string(n)});
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double e = v[i];
    if (!std::isfinite(e)) {
      rep.violations.push_back(
          {name, i, e, std::string(name) + "[" + std::to_string(i) + "] is not finite"});
    } else if (strictly_positive ? e <= 0.0 : e < 0.0) {
      rep.violations.push_back({name, i, e,
                                std::string(name) + "[" + std::to_string(i) + "] = " +
                                    format_number(e) +
                                    (strictly_positive ? " must be > 0" : " must be >= 0")});
    }
  }
}

}  // namespace detail

/// Reports every violated invariant; never throws.
inline ValidationReport validate(const SystemInstance& inst) {
  ValidationReport rep;
  const std::size_t n = inst.size();
  if (n == 0) {
    rep.violations.push_back({"n", 0, 0.0, "instance has no nodes"});
    return rep;
  }
  if (inst.corr.rows() != n || inst.corr.cols() != n) {
    rep.violations.push_back({"corr", 0, static_cast<double>(inst.corr.rows()),
                              "corr is " + std::to_string(inst.corr.rows()) + "x" +
                                  std::to_string(inst.corr.cols()) + ", expected " +
                                  std::to_string(n) + "x" + std::to_string(n)});
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      bool finite = true;
      for (std::size_t j = 0; j < n; ++j) {
        const double c = inst.corr(i, j);
        if (!std::isfinite(c)) {
          finite = false;
          rep.violations.push_back({"corr", i * n + j, c,
                                    "corr(" + std::to_string(i) + "," + std::to_string(j) +
                                        ") is not finite"});
        } else if (c < 0.0) {
          rep.violations.push_back({"corr", i * n + j, c,
                                    "corr(" + std::to_string(i) + "," + std::to_string(j) +
                                        ") = " + detail::format_number(c) + " is negative"});
        }
        sum += c;
      }
      if (finite && std::abs(sum - 1.0) > kRowSumTolerance) {
        rep.violations.push_back({"corr", i, sum - 1.0,
                                  "row " + std::to_string(i) + " sums to " +
                                      detail::format_number(sum)});
      }
    }
  }
  detail::check_vector(rep, inst.arrivals, "arrivals", n, false);
  detail::check_vector(rep, inst.thresholds, "thresholds", n, true);
  detail::check_vector(rep, inst.eta, "eta", n, true);
  detail::check_vector(rep, inst.gamma_cost, "gamma_cost", n, true);
  detail::check_vector(rep, inst.latency, "d", n, false);
  return rep;
}

inline void require_valid(const SystemInstance& inst) {
  auto rep = validate(inst);
  if (!rep.ok()) throw InvalidInstance(rep);
}

/// Strict positivity of every routing probability; only the control-packet
/// channel needs it.
inline bool strictly_positive_corr(const SystemInstance& inst) {
  for (double c : inst.corr.data())
    if (!(c > 0.0)) return false;
  return true;
}

/// B(i, j) = C(j, i) * A_j.
inline Matrix routing_matrix(const SystemInstance& inst) {
  const std::size_t n = inst.size();
  Matrix b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = inst.corr(j, i) * inst.arrivals[j];
  return b;
}

inline LoadVector compute_load(const Matrix& routing, std::span<const double> x) {
  return multiply(routing, x);
}

inline LoadVector compute_load(const SystemInstance& inst, std::span<const double> x) {
  return compute_load(routing_matrix(inst), x);
}

/// Largest load node i can ever see: sum_j C(j, i) A_j (all x_j = 1).
inline LoadVector max_load(const SystemInstance& inst) {
  return compute_load(inst, Vector(inst.size(), 1.0));
}

inline double total_arrivals(const SystemInstance& inst) {
  double s = 0.0;
  for (double a : inst.arrivals) s += a;
  return s;
}

inline double max_threshold(const SystemInstance& inst) {
  double m = 0.0;
  for (double t : inst.thresholds) m = std::max(m, t);
  return m;
}

/// The two-node example where node a's poor self-correlation drives node b
/// into overload under greedy control. Cost weights follow the evaluation
/// setup (gamma = 10, eta = 1) with d = 0.5 at both nodes.
inline SystemInstance two_node_example() {
  SystemInstance inst;
  inst.corr = Matrix{{0.1, 0.9}, {0.5, 0.5}};
  inst.arrivals = {1.0, 1.0};
  inst.thresholds = {0.7, 0.7};
  inst.eta = {1.0, 1.0};
  inst.gamma_cost = {10.0, 10.0};
  inst.latency = {0.5, 0.5};
  return inst;
}

/// Two-node instance with C = [[a, 1 - a], [1 - b, b]].
inline SystemInstance two_node_instance(double self_a, double self_b, double arrival_1,
                                        double arrival_2, double threshold_1 = 0.7,
                                        double threshold_2 = 0.7) {
  SystemInstance inst;
  inst.corr = Matrix{{self_a, 1.0 - self_a}, {1.0 - self_b, self_b}};
  inst.arrivals = {arrival_1, arrival_2};
  inst.thresholds = {threshold_1, threshold_2};
  inst.eta = {1.0, 1.0};
  inst.gamma_cost = {10.0, 10.0};
  inst.latency = {0.5, 0.5};
  return inst;
}

}  // namespace anycast
