#pragma once

// Local stability analysis of the greedy dynamics.
//
// A node k can only end up uncontrollably overloaded (x_k = 0, S_k > T_k)
// if the load the other nodes push onto it can exceed its threshold:
//   sum_{j != k} C(j, k) A_j > T_k.
// Arrival vectors violating this nowhere form the polytope
//   Pi_C = { A >= 0 : sum_{j != i} C(j, i) A_j <= T_i  for all i }.
//
// For two nodes with C = [[a, 1 - a], [1 - b, b]] the analysis is complete:
// no periodic orbits exist, self-correlations above 1/2 make every arrival
// pair controllable, and below 1/2 explicit arrival bounds suffice.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "anycast/greedy.hpp"
#include "anycast/model.hpp"

namespace anycast {

struct PolytopeReport {
  bool contained = true;
  Vector slack;  // T_i - sum_{j != i} C(j, i) A_j
};

inline PolytopeReport polytope_contains(const SystemInstance& inst) {
  const std::size_t n = inst.size();
  PolytopeReport rep;
  rep.slack.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double inflow = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) inflow += inst.corr(j, i) * inst.arrivals[j];
    rep.slack[i] = inst.thresholds[i] - inflow;
    if (rep.slack[i] < 0.0) rep.contained = false;
  }
  return rep;
}

/// True when node k provably avoids uncontrollable overload.
inline bool node_sufficient_condition(const SystemInstance& inst, std::size_t k) {
  if (k >= inst.size()) throw std::out_of_range("node_sufficient_condition: node index");
  double inflow = 0.0;
  for (std::size_t j = 0; j < inst.size(); ++j)
    if (j != k) inflow += inst.corr(j, k) * inst.arrivals[j];
  return inflow <= inst.thresholds[k];
}

/// Analytic Jacobian of the greedy field:
///   dF_i/dx_j = -beta x_i (1 - x_i) B(i, j)                       (i != j)
///   dF_i/dx_i = -beta [x_i (1 - x_i) B(i, i) + (1 - 2 x_i)(S_i - T_i)]
inline Matrix jacobian_at(const SystemInstance& inst, std::span<const double> x,
                          double sensitivity) {
  const std::size_t n = inst.size();
  if (x.size() != n) throw std::invalid_argument("jacobian_at: length mismatch");
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("jacobian_at: x outside [0, 1]");
  const Matrix b = routing_matrix(inst);
  const Vector s = multiply(b, x);
  Matrix j(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const double damp = x[r] * (1.0 - x[r]);
    for (std::size_t c = 0; c < n; ++c) j(r, c) = -sensitivity * damp * b(r, c);
    j(r, r) = -sensitivity * (damp * b(r, r) + (1.0 - 2.0 * x[r]) * (s[r] - inst.thresholds[r]));
  }
  return j;
}

/// Closed-form eigenvalues of a 2x2 matrix.
inline std::pair<std::complex<double>, std::complex<double>> eigenvalues_2x2(const Matrix& m) {
  if (m.rows() != 2 || m.cols() != 2) throw std::invalid_argument("eigenvalues_2x2: not 2x2");
  const double tr = m(0, 0) + m(1, 1);
  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr / 4.0 - det));
  return {tr / 2.0 + disc, tr / 2.0 - disc};
}

enum class FixedPointVerdict { Stable, Unstable, Indeterminate };

struct FixedPointAnalysis {
  std::string label;
  Vector point;
  Matrix jacobian;
  std::vector<std::complex<double>> eigenvalues;  // n == 2 or diagonal Jacobians
  FixedPointVerdict verdict = FixedPointVerdict::Indeterminate;
  bool undesirable = false;  // some node sits at x = 0 while overloaded
};

/// Linearization verdict at a fixed point. Rows of nodes on a face (x_k in
/// {0, 1}) have no off-diagonal entries, so their diagonal is an eigenvalue
/// for any n; complete spectra come from the closed form for n == 2 or when
/// every node is on a face.
inline FixedPointAnalysis analyze_fixed_point(const SystemInstance& inst, Vector point,
                                              double sensitivity, std::string label = {}) {
  FixedPointAnalysis fa;
  fa.label = std::move(label);
  fa.jacobian = jacobian_at(inst, point, sensitivity);
  const std::size_t n = inst.size();
  const Vector s = compute_load(inst, point);
  for (std::size_t k = 0; k < n; ++k)
    if (point[k] == 0.0 && s[k] > inst.thresholds[k]) fa.undesirable = true;

  auto verdict_from = [](const std::vector<std::complex<double>>& ev) {
    bool any_zero = false;
    for (const auto& e : ev) {
      if (e.real() > 0.0) return FixedPointVerdict::Unstable;
      if (e.real() == 0.0) any_zero = true;
    }
    return any_zero ? FixedPointVerdict::Indeterminate : FixedPointVerdict::Stable;
  };

  bool all_faces = true;
  std::vector<std::complex<double>> face_eigs;
  for (std::size_t k = 0; k < n; ++k) {
    if (point[k] == 0.0 || point[k] == 1.0)
      face_eigs.emplace_back(fa.jacobian(k, k), 0.0);
    else
      all_faces = false;
  }
  if (n == 2) {
    auto [l1, l2] = eigenvalues_2x2(fa.jacobian);
    fa.eigenvalues = {l1, l2};
    fa.verdict = verdict_from(fa.eigenvalues);
  } else if (all_faces) {
    fa.eigenvalues = face_eigs;
    fa.verdict = verdict_from(fa.eigenvalues);
  } else {
    fa.eigenvalues = face_eigs;
    bool unstable = false;
    for (const auto& e : face_eigs)
      if (e.real() > 0.0) unstable = true;
    fa.verdict = unstable ? FixedPointVerdict::Unstable : FixedPointVerdict::Indeterminate;
  }
  fa.point = std::move(point);
  return fa;
}

/// Interior equilibrium B x = T, when it exists strictly inside the cube.
inline std::optional<Vector> interior_fixed_point(const SystemInstance& inst) {
  const std::size_t n = inst.size();
  const Matrix b = routing_matrix(inst);
  Eigen::MatrixXd m(n, n);
  Eigen::VectorXd t(n);
  for (std::size_t i = 0; i < n; ++i) {
    t(i) = inst.thresholds[i];
    for (std::size_t j = 0; j < n; ++j) m(i, j) = b(i, j);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) return std::nullopt;
  const Eigen::VectorXd x = lu.solve(t);
  Vector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x(i) > 0.0 && x(i) < 1.0)) return std::nullopt;
    out[i] = x(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-node theory

struct TwoNodeParams {
  double alpha = 0.5;      // C(0, 0)
  double beta_corr = 0.5;  // C(1, 1)
};

enum class TwoNodeClass { ControllableAllA, ControllableIf, Indeterminate };

struct TwoNodeClassification {
  TwoNodeClass kind = TwoNodeClass::Indeterminate;
  // Sufficient bounds A_1 < bound_1, A_2 < bound_2 (ControllableIf only).
  double bound_1 = 0.0;
  double bound_2 = 0.0;
  bool arrivals_within_bounds = false;
};

inline TwoNodeClassification two_node_classify(const TwoNodeParams& p, std::array<double, 2> a,
                                               std::array<double, 2> t) {
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0 && p.beta_corr >= 0.0 && p.beta_corr <= 1.0))
    throw std::invalid_argument("two_node_classify: self-correlations outside [0, 1]");
  TwoNodeClassification out;
  if (p.alpha > 0.5 && p.beta_corr > 0.5) {
    out.kind = TwoNodeClass::ControllableAllA;
    out.arrivals_within_bounds = true;
  } else if (p.alpha < 0.5 && p.beta_corr < 0.5) {
    out.kind = TwoNodeClass::ControllableIf;
    out.bound_1 = t[0] / (1.0 - p.alpha);
    out.bound_2 = t[1] / (1.0 - p.beta_corr);
    out.arrivals_within_bounds = a[0] < out.bound_1 && a[1] < out.bound_2;
  }
  return out;
}

/// Reads (alpha, beta) off a two-node routing matrix.
inline TwoNodeParams two_node_params(const SystemInstance& inst) {
  if (inst.size() != 2) throw std::invalid_argument("two_node_params: two-node instances only");
  return {inst.corr(0, 0), inst.corr(1, 1)};
}

/// Open interval (lower, upper) of a single arrival rate; empty when
/// lower >= upper. upper may be +inf.
struct Window {
  double lower = 0.0;
  double upper = 0.0;
  bool empty() const noexcept { return !(lower < upper); }
};

enum class WindowMembership { Inside, Outside, Boundary };

inline WindowMembership classify_in_window(const Window& w, double a) {
  if (w.empty()) return WindowMembership::Outside;
  if (a == w.lower || a == w.upper) return WindowMembership::Boundary;
  return (a > w.lower && a < w.upper) ? WindowMembership::Inside : WindowMembership::Outside;
}

/// Arrival-rate windows in which each undesirable boundary equilibrium of the
/// two-node system is a stable attractor. Which arrival a window constrains:
///   vertex (0, 1):         A_2 in (T_1 / (1 - b), T_2 / b)
///   vertex (1, 0):         A_1 in (T_2 / (1 - a), T_1 / a)
///   mixed (0, S_2 = T_2):  A_2 > T_2 / b, requires (1 - b) T_2 / b > T_1
///   mixed (S_1 = T_1, 0):  A_1 > T_1 / a, requires (1 - a) T_1 / a > T_2
/// The mixed conditions reduce to b < 1/2 and a < 1/2 for equal thresholds.
/// A parameter condition holding with equality makes the linearization
/// inconclusive; that is reported through *_marginal.
struct FixedPointWindows {
  Window vertex_01;
  Window vertex_10;
  Window mixed_0s;
  Window mixed_s0;
  bool mixed_0s_marginal = false;
  bool mixed_s0_marginal = false;
};

inline FixedPointWindows two_node_fixed_point_windows(const TwoNodeParams& p,
                                                      std::array<double, 2> t) {
  const double a = p.alpha;
  const double b = p.beta_corr;
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : inf; };
  FixedPointWindows w;
  // At (0, 1): S_1 = (1 - b) A_2 must exceed T_1, S_2 = b A_2 must stay below T_2.
  w.vertex_01 = {ratio(t[0], 1.0 - b), ratio(t[1], b)};
  // At (1, 0): S_1 = a A_1 below T_1, S_2 = (1 - a) A_1 above T_2.
  w.vertex_10 = {ratio(t[1], 1.0 - a), ratio(t[0], a)};

  // Mixed point (0, T_2 / (b A_2)): node 1's eigenvalue is T_1 - (1 - b) T_2 / b,
  // node 2's is negative iff the point is strictly inside (A_2 > T_2 / b).
  const double lhs_0s = b > 0.0 ? (1.0 - b) * t[1] / b : inf;
  w.mixed_0s_marginal = lhs_0s == t[0];
  w.mixed_0s = lhs_0s > t[0] ? Window{ratio(t[1], b), inf} : Window{inf, inf};
  const double lhs_s0 = a > 0.0 ? (1.0 - a) * t[0] / a : inf;
  w.mixed_s0_marginal = lhs_s0 == t[1];
  w.mixed_s0 = lhs_s0 > t[1] ? Window{ratio(t[0], a), inf} : Window{inf, inf};
  return w;
}

/// Divergence of the field rescaled by 1 / (x1 x2 (1 - x1)(1 - x2)):
///   -beta (B(0,0) / (x2 (1 - x2)) + B(1,1) / (x1 (1 - x1))).
/// Its fixed sign rules out closed orbits in the open square.
inline double dulac_divergence(const SystemInstance& inst, std::array<double, 2> x,
                               double sensitivity) {
  if (inst.size() != 2) throw std::invalid_argument("dulac_divergence: two-node instances only");
  for (double v : x)
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("dulac_divergence: x must be interior");
  const Matrix b = routing_matrix(inst);
  return -sensitivity * (b(0, 0) / (x[1] * (1.0 - x[1])) + b(1, 1) / (x[0] * (1.0 - x[0])));
}

// ---------------------------------------------------------------------------
// Partition application

struct PartitionVerdict {
  double alpha_g1 = 0.0;
  double beta_g2 = 0.0;
  bool controllable_all_symmetric = false;
};

/// Block self-correlations sum_{i in G} sum_{j in G} C(i, j) / |G|.
inline PartitionVerdict effective_self_correlation(const SystemInstance& inst,
                                                   const std::vector<std::size_t>& g1,
                                                   const std::vector<std::size_t>& g2) {
  const std::size_t n = inst.size();
  if (g1.empty() || g2.empty()) throw std::invalid_argument("partition: groups must be nonempty");
  std::vector<int> seen(n, 0);
  for (auto i : g1) {
    if (i >= n) throw std::invalid_argument("partition: node index out of range");
    ++seen[i];
  }
  for (auto i : g2) {
    if (i >= n) throw std::invalid_argument("partition: node index out of range");
    ++seen[i];
  }
  for (int c : seen)
    if (c != 1) throw std::invalid_argument("partition: groups must be disjoint and cover all nodes");

  auto block = [&](const std::vector<std::size_t>& g) {
    double s = 0.0;
    for (auto i : g)
      for (auto j : g) s += inst.corr(i, j);
    return s / static_cast<double>(g.size());
  };
  PartitionVerdict v;
  v.alpha_g1 = block(g1);
  v.beta_g2 = block(g2);
  v.controllable_all_symmetric = v.alpha_g1 > 0.5 && v.beta_g2 > 0.5;
  return v;
}

// ---------------------------------------------------------------------------
// Full report

struct StabilityReport {
  PolytopeReport polytope;
  std::vector<bool> node_conditions;
  std::optional<TwoNodeClassification> two_node;
  std::optional<FixedPointWindows> windows;
  std::vector<FixedPointAnalysis> fixed_points;
  std::optional<PartitionVerdict> partition;
};

/// Polytope membership, per-node conditions, and fixed-point analyses: for
/// two nodes every boundary and interior equilibrium, otherwise the vertices
/// (n <= 10) and the interior equilibrium.
inline StabilityReport analyze(const SystemInstance& inst, double sensitivity = 1.0) {
  require_valid(inst);
  StabilityReport rep;
  const std::size_t n = inst.size();
  rep.polytope = polytope_contains(inst);
  for (std::size_t k = 0; k < n; ++k) rep.node_conditions.push_back(node_sufficient_condition(inst, k));

  if (n == 2) {
    const auto p = two_node_params(inst);
    rep.two_node = two_node_classify(p, {inst.arrivals[0], inst.arrivals[1]},
                                     {inst.thresholds[0], inst.thresholds[1]});
    rep.windows = two_node_fixed_point_windows(p, {inst.thresholds[0], inst.thresholds[1]});
    const Matrix b = routing_matrix(inst);
    const double t1 = inst.thresholds[0];
    const double t2 = inst.thresholds[1];
    std::vector<std::pair<std::string, Vector>> candidates = {
        {"vertex(0,0)", {0.0, 0.0}}, {"vertex(0,1)", {0.0, 1.0}},
        {"vertex(1,0)", {1.0, 0.0}}, {"vertex(1,1)", {1.0, 1.0}}};
    auto add_edge = [&](const std::string& label, Vector p) {
      for (double v : p)
        if (!(v >= 0.0 && v <= 1.0) || !std::isfinite(v)) return;
      if (p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0) return;
      for (const auto& c : candidates)
        if (c.second == p) return;
      candidates.emplace_back(label, std::move(p));
    };
    if (b(1, 1) > 0.0) {
      add_edge("edge(x1=0,S2=T2)", {0.0, t2 / b(1, 1)});
      add_edge("edge(x1=1,S2=T2)", {1.0, (t2 - b(1, 0)) / b(1, 1)});
    }
    if (b(0, 0) > 0.0) {
      add_edge("edge(S1=T1,x2=0)", {t1 / b(0, 0), 0.0});
      add_edge("edge(S1=T1,x2=1)", {(t1 - b(0, 1)) / b(0, 0), 1.0});
    }
    for (auto& [label, p] : candidates)
      rep.fixed_points.push_back(analyze_fixed_point(inst, p, sensitivity, label));
  } else if (n <= 10) {
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      Vector p(n);
      std::string label = "vertex(";
      for (std::size_t i = 0; i < n; ++i) {
        p[i] = (mask >> i) & 1u ? 1.0 : 0.0;
        label += (i ? "," : "") + std::string(p[i] == 1.0 ? "1" : "0");
      }
      rep.fixed_points.push_back(analyze_fixed_point(inst, p, sensitivity, label + ")"));
    }
  }
  if (auto xi = interior_fixed_point(inst))
    rep.fixed_points.push_back(analyze_fixed_point(inst, *xi, sensitivity, "interior"));
  return rep;
}

}  // namespace anycast
