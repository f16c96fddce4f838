#pragma once

// Monte-Carlo sweeps over the mean arrival rate on synthetic instances.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "anycast/dual.hpp"
#include "anycast/greedy.hpp"
#include "anycast/model.hpp"

namespace anycast {

enum class Algorithm { Dual, Greedy, Both };

struct CorrelationGenerator {
  double self_corr = 0.7;  // target mean of C(i, i)
  double spread = 0.1;     // C(i, i) ~ U[self_corr - spread, self_corr + spread]
  // Dirichlet shape of the off-diagonal split; small values send most of a
  // row's foreign traffic to a few nodes.
  double concentration = 0.5;
};

struct ExperimentConfig {
  std::size_t n = 48;
  std::size_t trials = 100;
  std::vector<double> load_grid = {0.1, 0.3, 1.0, 3.0, 10.0};
  CorrelationGenerator corr_gen;
  std::uint64_t seed = 1;
  Algorithm algorithm = Algorithm::Both;

  // Fixed per-node cost and capacity parameters.
  double gamma_cost = 10.0;
  double eta = 1.0;
  double threshold = 0.7;

  // Dual runs use epsilon = rel_epsilon * W(x = 0, S = 0) of each instance.
  double rel_epsilon = 1.0;
  std::size_t dual_max_iters = 200'000;
  double dual_window_tol = 1e-9;

  double greedy_sensitivity = 1.0;
  double greedy_horizon = 500.0;
  double greedy_start = 0.5;

  unsigned threads = 0;  // 0: hardware concurrency
};

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.n == 0) throw std::invalid_argument("experiment: n must be >= 1");
  if (cfg.trials == 0) throw std::invalid_argument("experiment: trials must be >= 1");
  if (cfg.load_grid.empty()) throw std::invalid_argument("experiment: load_grid is empty");
  for (double a : cfg.load_grid)
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("experiment: load_grid values must be > 0");
  if (!(cfg.corr_gen.self_corr > 0.0 && cfg.corr_gen.self_corr < 1.0))
    throw std::invalid_argument("experiment: self_corr must be in (0, 1)");
  if (!(cfg.corr_gen.spread >= 0.0)) throw std::invalid_argument("experiment: spread must be >= 0");
  if (!(cfg.corr_gen.concentration > 0.0))
    throw std::invalid_argument("experiment: concentration must be > 0");
  if (!(cfg.rel_epsilon > 0.0)) throw std::invalid_argument("experiment: rel_epsilon must be > 0");
  if (!(cfg.greedy_start > 0.0 && cfg.greedy_start < 1.0))
    throw std::invalid_argument("experiment: greedy_start must be in (0, 1)");
}

/// Per-trial seed from (master seed, load index, trial index).
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t load_index, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(load_index), static_cast<std::uint32_t>(trial)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Row i puts C(i, i) ~ U[self - spread, self + spread] (kept inside
/// [0.01, 0.99]) on the diagonal and splits the rest over the other nodes
/// with Dirichlet(concentration) weights, floored so every entry stays
/// positive. n == 1 gives C = (1).
inline Matrix generate_correlation(std::size_t n, const CorrelationGenerator& gen,
                                   std::mt19937_64& rng) {
  Matrix c(n, n);
  if (n == 1) {
    c(0, 0) = 1.0;
    return c;
  }
  std::uniform_real_distribution<double> diag(gen.self_corr - gen.spread, gen.self_corr + gen.spread);
  std::gamma_distribution<double> weight(gen.concentration, 1.0);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double cii = std::clamp(diag(rng), 0.01, 0.99);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      w[j] = j == i ? 0.0 : std::max(weight(rng), 1e-9);
      total += w[j];
    }
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      c(i, j) = (1.0 - cii) * w[j] / total;
      row += c(i, j);
    }
    c(i, i) = 1.0 - row;
  }
  return c;
}

inline SystemInstance generate_instance(const ExperimentConfig& cfg, double mean_load,
                                        std::uint64_t seed) {
  if (!(mean_load > 0.0)) throw std::invalid_argument("generate_instance: mean load must be > 0");
  if (cfg.n == 0) throw std::invalid_argument("generate_instance: n must be >= 1");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  const std::size_t n = cfg.n;
  SystemInstance inst;
  inst.corr = generate_correlation(n, cfg.corr_gen, rng);
  std::poisson_distribution<std::int64_t> arrivals(mean_load);
  std::uniform_real_distribution<double> latency(0.0, 1.0);
  inst.arrivals.resize(n);
  inst.latency.resize(n);
  for (std::size_t i = 0; i < n; ++i) inst.arrivals[i] = static_cast<double>(arrivals(rng));
  for (std::size_t i = 0; i < n; ++i) inst.latency[i] = latency(rng);
  inst.thresholds.assign(n, cfg.threshold);
  inst.eta.assign(n, cfg.eta);
  inst.gamma_cost.assign(n, cfg.gamma_cost);
  return inst;
}

/// W(x = 0, S = 0): everything offloaded.
inline double offload_all_cost(const SystemInstance& inst) {
  double w = 0.0;
  for (std::size_t i = 0; i < inst.size(); ++i) w += eval_h(offload_cost(inst, i), 0.0);
  return w;
}

struct TrialResult {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  // dual
  bool dual_ran = false;
  Cost cost;
  bool dual_converged = false;
  std::size_t dual_iterations = 0;
  std::size_t dual_bound_violations = 0;
  // greedy
  bool greedy_ran = false;
  std::size_t uncontrollable = 0;
  bool greedy_determinate = true;
  double greedy_max_excursion = 0.0;
};

inline TrialResult run_trial(const ExperimentConfig& cfg, double mean_load, std::uint64_t seed) {
  TrialResult r;
  r.seed = seed;
  try {
    const SystemInstance inst = generate_instance(cfg, mean_load, seed);
    if (cfg.algorithm != Algorithm::Greedy) {
      DualConfig dc;
      const double w0 = offload_all_cost(inst);
      dc.epsilon = cfg.rel_epsilon * std::max(w0, 1e-12);
      dc.max_iters = cfg.dual_max_iters;
      dc.window_tol = cfg.dual_window_tol;
      const DualSolution sol = run_dual(inst, dc);
      r.dual_ran = true;
      r.cost = sol.primal_cost;
      r.dual_converged = sol.converged;
      r.dual_iterations = sol.iterations;
      r.dual_bound_violations = sol.bound_violations;
    }
    if (cfg.algorithm != Algorithm::Dual) {
      GreedyConfig gc;
      gc.sensitivity = cfg.greedy_sensitivity;
      gc.horizon = cfg.greedy_horizon;
      gc.sample_stride = std::numeric_limits<std::size_t>::max();  // endpoints only
      const Vector x0(inst.size(), cfg.greedy_start);
      const Trajectory traj = integrate(inst, x0, gc);
      const OverloadReport rep = detect_uncontrollable(traj, inst, gc.boundary_eps);
      r.greedy_ran = true;
      r.uncontrollable = rep.uncontrollable_count();
      r.greedy_determinate = rep.determinate;
      r.greedy_max_excursion = traj.max_excursion;
    }
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  return r;
}

struct SweepRow {
  double mean_load = 0.0;
  double mean_cost = std::numeric_limits<double>::quiet_NaN();
  double std_cost = std::numeric_limits<double>::quiet_NaN();
  double mean_uncontrollable = std::numeric_limits<double>::quiet_NaN();
  double overload_rate = std::numeric_limits<double>::quiet_NaN();
  std::size_t dual_trials = 0;
  std::size_t dual_nonconverged = 0;
  std::size_t greedy_trials = 0;
  std::size_t greedy_indeterminate = 0;
  std::size_t failed_trials = 0;
  std::vector<TrialResult> trials;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::uint64_t seed = 0;
};

/// Mean and sample standard deviation of finite dual costs, sentinel rate
/// over all dual trials, and mean uncontrollable count over greedy trials.
inline SweepRow aggregate(double mean_load, std::vector<TrialResult> trials) {
  SweepRow row;
  row.mean_load = mean_load;
  std::vector<double> costs;
  std::size_t sentinels = 0;
  double unc = 0.0;
  for (const auto& t : trials) {
    if (t.failed) {
      ++row.failed_trials;
      continue;
    }
    if (t.dual_ran) {
      ++row.dual_trials;
      if (!t.dual_converged) ++row.dual_nonconverged;
      if (t.cost.is_overload())
        ++sentinels;
      else
        costs.push_back(t.cost.value());
    }
    if (t.greedy_ran) {
      ++row.greedy_trials;
      if (!t.greedy_determinate) ++row.greedy_indeterminate;
      unc += static_cast<double>(t.uncontrollable);
    }
  }
  if (!costs.empty()) {
    double sum = 0.0;
    for (double c : costs) sum += c;
    row.mean_cost = sum / static_cast<double>(costs.size());
    double ss = 0.0;
    for (double c : costs) ss += (c - row.mean_cost) * (c - row.mean_cost);
    row.std_cost = costs.size() > 1 ? std::sqrt(ss / static_cast<double>(costs.size() - 1)) : 0.0;
  }
  if (row.dual_trials > 0)
    row.overload_rate = static_cast<double>(sentinels) / static_cast<double>(row.dual_trials);
  if (row.greedy_trials > 0) row.mean_uncontrollable = unc / static_cast<double>(row.greedy_trials);
  row.trials = std::move(trials);
  return row;
}

/// Runs every (load, trial) pair on a pool of worker threads. Each result goes
/// to its own slot, so the outcome does not depend on scheduling.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const std::size_t loads = cfg.load_grid.size();
  const std::size_t jobs = loads * cfg.trials;
  std::vector<TrialResult> slots(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs; job = next++) {
      const std::size_t li = job / cfg.trials;
      const std::size_t ti = job % cfg.trials;
      slots[job] = run_trial(cfg, cfg.load_grid[li], trial_seed(cfg.seed, li, ti));
    }
  };
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  SweepResult out;
  out.seed = cfg.seed;
  for (std::size_t li = 0; li < loads; ++li) {
    std::vector<TrialResult> trials(std::make_move_iterator(slots.begin() + li * cfg.trials),
                                    std::make_move_iterator(slots.begin() + (li + 1) * cfg.trials));
    out.rows.push_back(aggregate(cfg.load_grid[li], std::move(trials)));
  }
  return out;
}

}  // namespace anycast
