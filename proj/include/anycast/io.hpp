#pragma once

// File formats: instances, experiment configs and reports as JSON, time
// series and sweeps as CSV.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "anycast/dual.hpp"
#include "anycast/greedy.hpp"
#include "anycast/harness.hpp"
#include "anycast/model.hpp"
#include "anycast/oracle.hpp"
#include "anycast/stability.hpp"

namespace anycast {

using Json = nlohmann::json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rows whose sums were within 1e-9 of one and were rescaled on load.
struct RowAdjustment {
  std::size_t row = 0;
  double original_sum = 1.0;
};

struct LoadedInstance {
  SystemInstance instance;
  std::vector<RowAdjustment> adjustments;
};

inline constexpr double kIngestRowSumTolerance = 1e-9;

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline Vector read_vector(const Json& j, const char* key, std::size_t n, bool allow_scalar) {
  if (!j.contains(key)) throw FormatError(std::string("missing field \"") + key + "\"");
  const Json& v = j.at(key);
  if (allow_scalar && v.is_number()) return Vector(n, v.get<double>());
  if (!v.is_array()) throw FormatError(std::string("field \"") + key + "\" must be an array");
  if (v.size() != n)
    throw FormatError(std::string("field \"") + key + "\" has " + std::to_string(v.size()) +
                      " entries, expected " + std::to_string(n));
  Vector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!v[i].is_number())
      throw FormatError(std::string("field \"") + key + "\"[" + std::to_string(i) + "] is not a number");
    out[i] = v[i].get<double>();
  }
  return out;
}

inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(origin + ": " + e.what());
  }
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
  if (!out) throw FormatError("write failed: " + path);
}

inline Json complex_json(const std::complex<double>& c) { return Json{{"re", c.real()}, {"im", c.imag()}}; }

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(Vector(r.begin(), r.end()));
  }
  return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Instances

/// Parses an instance document. Cost parameters may be given as one number
/// for all nodes. Rows summing to within 1e-9 of one are rescaled.
inline LoadedInstance instance_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("instance must be a JSON object");
  if (!j.contains("n") || !j.at("n").is_number_integer() || j.at("n").get<long long>() < 1)
    throw FormatError("field \"n\" must be a positive integer");
  const auto n = static_cast<std::size_t>(j.at("n").get<long long>());
  if (!j.contains("corr") || !j.at("corr").is_array() || j.at("corr").size() != n)
    throw FormatError("field \"corr\" must be an array of " + std::to_string(n) + " rows");

  LoadedInstance out;
  SystemInstance& inst = out.instance;
  inst.corr = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const Json& row = j.at("corr")[i];
    if (!row.is_array() || row.size() != n)
      throw FormatError("corr row " + std::to_string(i) + " must have " + std::to_string(n) + " entries");
    for (std::size_t k = 0; k < n; ++k) {
      if (!row[k].is_number())
        throw FormatError("corr[" + std::to_string(i) + "][" + std::to_string(k) + "] is not a number");
      inst.corr(i, k) = row[k].get<double>();
    }
  }
  inst.arrivals = detail::read_vector(j, "arrivals", n, false);
  inst.thresholds = detail::read_vector(j, "thresholds", n, false);
  inst.eta = detail::read_vector(j, "eta", n, true);
  inst.gamma_cost = detail::read_vector(j, "gamma_cost", n, true);
  inst.latency = detail::read_vector(j, "d", n, true);

  for (std::size_t i = 0; i < n; ++i) {
    auto row = inst.corr.row(i);
    const double sum = exact_dot(row, Vector(n, 1.0));
    const double dev = std::abs(sum - 1.0);
    if (dev > kRowSumTolerance && dev <= kIngestRowSumTolerance) {
      for (std::size_t k = 0; k < n; ++k) inst.corr(i, k) /= sum;
      out.adjustments.push_back({i, sum});
    }
  }
  return out;
}

inline LoadedInstance parse_instance(const std::string& text, const std::string& origin = "instance") {
  return instance_from_json(detail::parse_json_text(text, origin));
}

inline LoadedInstance read_instance(const std::string& path) {
  return parse_instance(detail::slurp(path), path);
}

inline Json instance_to_json(const SystemInstance& inst) {
  Json j;
  j["n"] = inst.size();
  j["corr"] = detail::matrix_json(inst.corr);
  j["arrivals"] = inst.arrivals;
  j["thresholds"] = inst.thresholds;
  j["eta"] = inst.eta;
  j["gamma_cost"] = inst.gamma_cost;
  j["d"] = inst.latency;
  return j;
}

inline void write_instance(const std::string& path, const SystemInstance& inst,
                           const Json& metadata = nullptr) {
  Json j = instance_to_json(inst);
  if (!metadata.is_null()) j["metadata"] = metadata;
  detail::write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Dual results

inline Json cost_json(const Cost& c) {
  if (c.is_overload()) return Json{{"overload", true}, {"value", nullptr}};
  return Json{{"overload", false}, {"value", c.value()}};
}

inline Json dual_solution_to_json(const DualSolution& sol) {
  Json j;
  j["x"] = sol.x;
  j["s_obs"] = sol.s_obs;
  j["x_last"] = sol.x_last;
  j["s_obs_last"] = sol.s_obs_last;
  j["s_star_last"] = sol.s_star_last;
  j["mu"] = sol.mu;
  j["converged"] = sol.converged;
  j["iterations"] = sol.iterations;
  j["best_dual"] = sol.best_dual;
  j["step_size"] = sol.step_size;
  j["primal_cost"] = cost_json(sol.primal_cost);
  j["bound_violations"] = sol.bound_violations;
  j["max_bound_ratio"] = sol.max_bound_ratio;
  return j;
}

inline void write_history_csv(std::ostream& out, const std::vector<DualHistoryRow>& rows) {
  const bool gap = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.gap.has_value(); });
  out << "k,dual,best_dual,grad_norm_sq,max_overload" << (gap ? ",gap" : "") << "\n";
  for (const auto& r : rows) {
    out << r.k << ',' << format_double(r.dual) << ',' << format_double(r.best_dual) << ','
        << format_double(r.grad_norm_sq) << ',' << format_double(r.max_overload);
    if (gap) out << ',' << (r.gap ? format_double(*r.gap) : "");
    out << '\n';
  }
}

inline Json oracle_to_json(const OracleResult& r) {
  return Json{{"method", to_string(r.method)}, {"x", r.x},
              {"s", r.s},                      {"objective", r.objective},
              {"resolution", r.resolution},    {"error_bound", r.error_bound},
              {"converged", r.converged}};
}

// ---------------------------------------------------------------------------
// Greedy results

inline const char* to_string(NodeState s) {
  switch (s) {
    case NodeState::Interior: return "INTERIOR";
    case NodeState::AtZero: return "AT_ZERO";
    case NodeState::AtOne: return "AT_ONE";
  }
  return "?";
}

inline const char* to_string(OverloadClass c) {
  switch (c) {
    case OverloadClass::Ok: return "OK";
    case OverloadClass::OverloadedControllable: return "OVERLOADED_CONTROLLABLE";
    case OverloadClass::Uncontrollable: return "UNCONTROLLABLE";
  }
  return "?";
}

inline Json trajectory_verdict_json(const Trajectory& traj, const OverloadReport& rep) {
  Json j;
  j["verdict"] = traj.converged() ? "CONVERGED" : "HORIZON_REACHED";
  j["final_time"] = traj.final_time();
  j["steps"] = traj.steps;
  j["step"] = traj.step;
  j["x_final"] = traj.x_final;
  j["load_final"] = traj.load_final;
  Json nodes = Json::array();
  for (std::size_t i = 0; i < traj.x_final.size(); ++i)
    nodes.push_back({{"node", i}, {"state", to_string(traj.states[i])}, {"class", to_string(rep.nodes[i])}});
  j["nodes"] = nodes;
  j["determinate"] = rep.determinate;
  j["uncontrollable_count"] = rep.uncontrollable_count();
  j["clamp_count"] = traj.clamp_count;
  j["max_clamp"] = traj.max_clamp;
  j["max_excursion"] = traj.max_excursion;
  return j;
}

/// t, x_1..x_n, S_1..S_n, thinned evenly to at most max_rows rows (the last
/// sample is always kept).
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                                 std::size_t max_rows = 10'000) {
  const auto& s = traj.samples;
  const std::size_t n = s.empty() ? 0 : s.front().x.size();
  out << "t";
  for (std::size_t i = 1; i <= n; ++i) out << ",x_" << i;
  for (std::size_t i = 1; i <= n; ++i) out << ",S_" << i;
  out << '\n';
  if (s.empty() || max_rows == 0) return;
  auto emit = [&](const TrajectorySample& r) {
    out << format_double(r.t);
    for (double v : r.x) out << ',' << format_double(v);
    for (double v : r.load) out << ',' << format_double(v);
    out << '\n';
  };
  if (s.size() <= max_rows) {
    for (const auto& r : s) emit(r);
    return;
  }
  if (max_rows == 1) {
    emit(s.back());
    return;
  }
  const double scale = static_cast<double>(s.size() - 1) / static_cast<double>(max_rows - 1);
  for (std::size_t r = 0; r < max_rows; ++r)
    emit(s[static_cast<std::size_t>(std::llround(static_cast<double>(r) * scale))]);
}

inline void write_field_csv(std::ostream& out, const std::vector<FieldPoint>& grid) {
  out << "x1,x2,dx1,dx2\n";
  for (const auto& p : grid)
    out << format_double(p.x1) << ',' << format_double(p.x2) << ',' << format_double(p.dx1) << ','
        << format_double(p.dx2) << '\n';
}

// ---------------------------------------------------------------------------
// Stability

inline const char* to_string(TwoNodeClass c) {
  switch (c) {
    case TwoNodeClass::ControllableAllA: return "CONTROLLABLE_ALL_A";
    case TwoNodeClass::ControllableIf: return "CONTROLLABLE_IF";
    case TwoNodeClass::Indeterminate: return "INDETERMINATE";
  }
  return "?";
}

inline const char* to_string(FixedPointVerdict v) {
  switch (v) {
    case FixedPointVerdict::Stable: return "STABLE";
    case FixedPointVerdict::Unstable: return "UNSTABLE";
    case FixedPointVerdict::Indeterminate: return "INDETERMINATE";
  }
  return "?";
}

inline Json window_json(const Window& w) {
  if (w.empty()) return Json{{"empty", true}};
  Json j{{"empty", false}, {"lower", w.lower}};
  j["upper"] = std::isinf(w.upper) ? Json("inf") : Json(w.upper);
  return j;
}

inline Json stability_to_json(const StabilityReport& rep) {
  Json j;
  j["in_polytope"] = rep.polytope.contained;
  j["slack"] = rep.polytope.slack;
  j["node_conditions"] = rep.node_conditions;
  if (rep.two_node) {
    Json c{{"class", to_string(rep.two_node->kind)}};
    if (rep.two_node->kind == TwoNodeClass::ControllableIf) {
      c["bound_1"] = rep.two_node->bound_1;
      c["bound_2"] = rep.two_node->bound_2;
    }
    c["arrivals_within_bounds"] = rep.two_node->arrivals_within_bounds;
    j["two_node_class"] = c;
  }
  if (rep.windows) {
    j["fixed_point_windows"] = {
        {"vertex_0_1", window_json(rep.windows->vertex_01)},
        {"vertex_1_0", window_json(rep.windows->vertex_10)},
        {"mixed_x1_0", window_json(rep.windows->mixed_0s)},
        {"mixed_x2_0", window_json(rep.windows->mixed_s0)},
        {"mixed_x1_0_marginal", rep.windows->mixed_0s_marginal},
        {"mixed_x2_0_marginal", rep.windows->mixed_s0_marginal}};
  }
  Json fps = Json::array();
  for (const auto& fp : rep.fixed_points) {
    Json e{{"label", fp.label},
           {"point", fp.point},
           {"jacobian", detail::matrix_json(fp.jacobian)},
           {"verdict", to_string(fp.verdict)},
           {"undesirable", fp.undesirable}};
    Json eig = Json::array();
    for (const auto& ev : fp.eigenvalues) eig.push_back(detail::complex_json(ev));
    e["eigenvalues"] = eig;
    fps.push_back(e);
  }
  j["fixed_points"] = fps;
  if (rep.partition) {
    j["partition"] = {{"alpha_g1", rep.partition->alpha_g1},
                      {"beta_g2", rep.partition->beta_g2},
                      {"verdict", rep.partition->controllable_all_symmetric
                                      ? "CONTROLLABLE_ALL_SYMMETRIC_A"
                                      : "INDETERMINATE"}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Experiments

inline ExperimentConfig experiment_config_from_json(const Json& j) {
  if (!j.is_object()) throw FormatError("experiment config must be a JSON object");
  ExperimentConfig cfg;
  for (const auto& [key, v] : j.items()) {
    auto num = [&] {
      if (!v.is_number()) throw FormatError("field \"" + key + "\" must be a number");
      return v.get<double>();
    };
    auto count = [&] {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw FormatError("field \"" + key + "\" must be a nonnegative integer");
      return static_cast<std::size_t>(v.get<long long>());
    };
    if (key == "n") cfg.n = count();
    else if (key == "trials") cfg.trials = count();
    else if (key == "load_grid") {
      if (!v.is_array()) throw FormatError("field \"load_grid\" must be an array");
      cfg.load_grid.clear();
      for (const auto& e : v) {
        if (!e.is_number()) throw FormatError("load_grid entries must be numbers");
        cfg.load_grid.push_back(e.get<double>());
      }
    } else if (key == "self_corr") cfg.corr_gen.self_corr = num();
    else if (key == "spread") cfg.corr_gen.spread = num();
    else if (key == "concentration") cfg.corr_gen.concentration = num();
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(count());
    else if (key == "algorithm") {
      const std::string a = v.is_string() ? v.get<std::string>() : "";
      if (a == "dual") cfg.algorithm = Algorithm::Dual;
      else if (a == "greedy") cfg.algorithm = Algorithm::Greedy;
      else if (a == "both") cfg.algorithm = Algorithm::Both;
      else throw FormatError("field \"algorithm\" must be \"dual\", \"greedy\" or \"both\"");
    } else if (key == "gamma_cost") cfg.gamma_cost = num();
    else if (key == "eta") cfg.eta = num();
    else if (key == "threshold") cfg.threshold = num();
    else if (key == "rel_epsilon") cfg.rel_epsilon = num();
    else if (key == "dual_max_iters") cfg.dual_max_iters = count();
    else if (key == "dual_window_tol") cfg.dual_window_tol = num();
    else if (key == "greedy_sensitivity") cfg.greedy_sensitivity = num();
    else if (key == "greedy_horizon") cfg.greedy_horizon = num();
    else if (key == "greedy_start") cfg.greedy_start = num();
    else if (key == "threads") cfg.threads = static_cast<unsigned>(count());
    else throw FormatError("unknown experiment field \"" + key + "\"");
  }
  validate_config(cfg);
  return cfg;
}

inline ExperimentConfig read_experiment_config(const std::string& path) {
  return experiment_config_from_json(detail::parse_json_text(detail::slurp(path), path));
}

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Dual: return "dual";
    case Algorithm::Greedy: return "greedy";
    case Algorithm::Both: return "both";
  }
  return "?";
}

inline Json experiment_config_to_json(const ExperimentConfig& cfg) {
  return Json{{"n", cfg.n},
              {"trials", cfg.trials},
              {"load_grid", cfg.load_grid},
              {"self_corr", cfg.corr_gen.self_corr},
              {"spread", cfg.corr_gen.spread},
              {"concentration", cfg.corr_gen.concentration},
              {"seed", cfg.seed},
              {"algorithm", to_string(cfg.algorithm)},
              {"gamma_cost", cfg.gamma_cost},
              {"eta", cfg.eta},
              {"threshold", cfg.threshold},
              {"rel_epsilon", cfg.rel_epsilon},
              {"dual_max_iters", cfg.dual_max_iters},
              {"dual_window_tol", cfg.dual_window_tol},
              {"greedy_sensitivity", cfg.greedy_sensitivity},
              {"greedy_horizon", cfg.greedy_horizon},
              {"greedy_start", cfg.greedy_start}};
}

inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : format_double(v); }

inline void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  out << "abar,mean_cost,std_cost,mean_uncontrollable_count,overload_sentinel_rate\n";
  for (const auto& row : r.rows)
    out << format_double(row.mean_load) << ',' << csv_number(row.mean_cost) << ','
        << csv_number(row.std_cost) << ',' << csv_number(row.mean_uncontrollable) << ','
        << csv_number(row.overload_rate) << '\n';
}

inline Json sweep_summary_json(const SweepResult& r, const ExperimentConfig& cfg) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"abar", row.mean_load},
                    {"dual_trials", row.dual_trials},
                    {"dual_nonconverged", row.dual_nonconverged},
                    {"greedy_trials", row.greedy_trials},
                    {"greedy_indeterminate", row.greedy_indeterminate},
                    {"failed_trials", row.failed_trials}});
  return Json{{"config", experiment_config_to_json(cfg)}, {"rows", rows}};
}

}  // namespace anycast
