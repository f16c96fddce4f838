// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "anycast/anycast.hpp"

using namespace anycast;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Suite-wide bookkeeping for the invariants checked across every run.
struct Ledger {
  std::size_t dual_runs = 0;
  std::size_t dual_iterations = 0;
  std::size_t bound_violations = 0;
  double max_bound_ratio = 0.0;

  std::size_t greedy_runs = 0;
  double max_excursion = 0.0;

  std::size_t two_node_converged = 0;
  double max_tail_variation = 0.0;
} ledger;

DualSolution dual(const SystemInstance& inst, const DualConfig& cfg) {
  DualSolution sol = run_dual(inst, cfg);
  ++ledger.dual_runs;
  ledger.dual_iterations += sol.iterations;
  ledger.bound_violations += sol.bound_violations;
  ledger.max_bound_ratio = std::max(ledger.max_bound_ratio, sol.max_bound_ratio);
  return sol;
}

// Suite runs settle further than the library default before declaring convergence.
constexpr double kSuiteConvTol = 1e-10;

Trajectory greedy(const SystemInstance& inst, const Vector& x0, GreedyConfig cfg,
                  const ArrivalSchedule& schedule = {}) {
  cfg.conv_tol = std::min(cfg.conv_tol, kSuiteConvTol);
  Trajectory traj = integrate(inst, x0, cfg, schedule);
  ++ledger.greedy_runs;
  ledger.max_excursion = std::max(ledger.max_excursion, traj.max_excursion);
  if (inst.size() == 2 && traj.converged()) {
    ++ledger.two_node_converged;
    ledger.max_tail_variation = std::max(ledger.max_tail_variation, tail_variation(traj, 0.1));
  }
  return traj;
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

Outcome outcomes[12];

void report(int id, Outcome& o) {
  std::fprintf(stderr, "criterion %d done\n", id);
  outcomes[id] = std::move(o);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Matrix positive_stochastic(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += (c(i, j) = u(rng));
    double row = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) row += (c(i, j) /= sum);
    c(i, n - 1) = 1.0 - row;
  }
  return c;
}

SystemInstance random_instance(std::size_t n, std::mt19937_64& rng, double amin, double amax) {
  std::uniform_real_distribution<double> a(amin, amax);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  SystemInstance inst;
  inst.corr = positive_stochastic(n, rng);
  for (std::size_t i = 0; i < n; ++i) {
    inst.arrivals.push_back(a(rng));
    inst.latency.push_back(d(rng));
  }
  inst.thresholds.assign(n, 0.7);
  inst.eta.assign(n, 1.0);
  inst.gamma_cost.assign(n, 10.0);
  return inst;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  Outcome o;
  const auto inst = two_node_example();
  const auto t0 = Clock::now();
  const Trajectory traj = greedy(inst, Vector{0.5, 0.5}, GreedyConfig{});
  const OverloadReport rep = detect_uncontrollable(traj, inst);
  const double secs = seconds_since(t0);
  const double dist = std::max(std::abs(traj.x_final[0] - 1.0), std::abs(traj.x_final[1]));
  o.detail << " x=(" << fmt(traj.x_final[0]) << "," << fmt(traj.x_final[1]) << ") S_b="
           << fmt(traj.load_final[1]) << " t=" << fmt(traj.final_time()) << " runtime=" << fmt(secs) << "s";
  o.require(traj.converged(), "converged");
  o.require(dist < 1e-3, "|x - (1,0)| < 1e-3");
  o.require(std::abs(traj.load_final[1] - 0.9) <= 1e-3, "S_b = 0.9 +- 1e-3");
  o.require(rep.nodes[1] == OverloadClass::Uncontrollable, "node b UNCONTROLLABLE");
  o.require(secs < 1.0, "runtime < 1 s");
  report(1, o);
}

void criterion_2() {
  Outcome o;
  const auto inst = two_node_example();
  const auto t0 = Clock::now();
  DualConfig cfg;
  cfg.epsilon = 0.01;
  const DualSolution sol = dual(inst, cfg);
  const OracleResult grid = primal_grid_solve(inst, 1e-3);
  const double secs = seconds_since(t0);
  double over = -1.0;
  for (std::size_t i = 0; i < 2; ++i) over = std::max(over, sol.s_obs[i] - inst.thresholds[i]);
  const double diff = std::abs(grid.objective - sol.best_dual);
  o.detail << " iters=" << sol.iterations << " best_dual=" << fmt(sol.best_dual)
           << " grid_opt=" << fmt(grid.objective) << " grid_err=" << fmt(grid.error_bound)
           << " max(s-T)=" << fmt(over) << " runtime=" << fmt(secs) << "s";
  o.require(sol.converged, "terminated by the stopping rule");
  o.require(over <= cfg.epsilon, "s_i <= T_i + eps");
  o.require(diff <= cfg.epsilon + grid.error_bound, "|opt - best_dual| <= eps + grid error");
  o.require(secs < 30.0, "runtime < 30 s");
  report(2, o);
}

void criterion_4() {
  Outcome o;
  std::mt19937_64 rng(404);
  const double eps = 0.1;
  int ok_instances = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  double worst_final = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = random_instance(2, rng, 0.2, 2.0);
    const double opt =
        std::min(primal_grid_solve(inst, 1e-3).objective, primal_projected_descent(inst).objective);
    DualConfig cfg;
    cfg.epsilon = eps;
    cfg.max_iters = 2'000'000;
    const DualSolution sol = dual(inst, cfg);
    auto gap_at = [&](std::size_t k) { return opt - sol.history.at(k - 1).best_dual; };
    bool ok = sol.iterations >= 1600;
    double r1 = 0.0, r2 = 0.0;
    if (ok) {
      r1 = gap_at(100) / gap_at(400);
      r2 = gap_at(400) / gap_at(1600);
      ok = r1 >= 1.5 && r2 >= 1.5;
      worst_ratio = std::min({worst_ratio, r1, r2});
    }
    const double final_gap = opt - sol.best_dual;
    worst_final = std::max(worst_final, final_gap);
    ok = ok && sol.converged && final_gap <= eps;
    if (ok) ++ok_instances;
    else
      o.detail << " [instance " << trial << ": ratios " << fmt(r1) << "," << fmt(r2) << " final gap "
               << fmt(final_gap) << " converged " << sol.converged << "]";
  }
  o.detail << " instances_ok=" << ok_instances << "/10 min_ratio=" << fmt(worst_ratio)
           << " max_final_gap=" << fmt(worst_final) << " eps=" << fmt(eps);
  o.require(ok_instances == 10, "gap shrinks >= 1.5x per 4x iterations and ends <= eps");
  report(4, o);
}

void criterion_5() {
  Outcome o;
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> mu_draw(0.5, 2.0);

  double max_rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_instance(2 + trial % 15, rng, 0.2, 3.0);
    Vector mu(inst.size());
    for (double& m : mu) m = mu_draw(rng);
    ChannelConfig ch;
    const Vector got = channel_beta(inst, mu, ch);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      double ref = 0.0;  // plain sum, independent of the exact path
      for (std::size_t j = 0; j < inst.size(); ++j) ref += inst.corr(i, j) * mu[j];
      max_rel = std::max(max_rel, std::abs(got[i] - ref) / std::max(1.0, std::abs(ref)));
    }
  }
  o.detail << " deterministic_max_rel_err=" << fmt(max_rel);
  o.require(max_rel <= 1e-12, "deterministic beta within 1e-12");

  const auto inst = random_instance(8, rng, 0.2, 3.0);
  Vector mu(8);
  for (double& m : mu) m = mu_draw(rng);
  const Vector exact = compute_beta_exact(inst, mu);
  int good_windows = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ChannelConfig ch;
    ch.mode = ChannelMode::Poisson;
    ch.gamma_rate = 10.0;
    ch.window = 1e3;
    ch.seed = seed;
    const Vector est = channel_beta(inst, mu, ch);
    bool ok = true;
    for (std::size_t i = 0; i < 8; ++i)
      if (std::abs(exact[i]) >= 0.1 && std::abs(est[i] - exact[i]) > 0.05 * std::abs(exact[i])) ok = false;
    good_windows += ok;
  }
  o.detail << " poisson_windows_ok=" << good_windows << "/100";
  o.require(good_windows >= 95, ">= 95 of 100 Poisson windows within 5%");

  bool identical = true;
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst2 = random_instance(2 + 2 * trial, rng, 0.2, 3.0);
    DualConfig a;
    a.epsilon = 0.01;
    a.max_iters = 5000;
    DualConfig b = a;
    b.beta_mode = BetaMode::FastControl;
    const DualSolution sa = dual(inst2, a);
    const DualSolution sb = dual(inst2, b);
    identical = identical && sa.history == sb.history && sa.mu == sb.mu && sa.x == sb.x &&
                sa.iterations == sb.iterations;
  }
  o.detail << " fastcontrol_vs_exact_bitwise=" << (identical ? "identical" : "DIFFERENT");
  o.require(identical, "fastcontrol-deterministic dual trajectories bit-identical to exact");
  report(5, o);
}

void criterion_7() {
  Outcome o;
  const auto inst = two_node_instance(0.8, 0.8, 5.0, 5.0);
  const Trajectory steady = greedy(inst, Vector{0.5, 0.5}, GreedyConfig{});
  double dev = 0.0;
  for (std::size_t i = 0; i < 2; ++i) dev = std::max(dev, std::abs(steady.load_final[i] - inst.thresholds[i]));
  o.detail << " steady S=(" << fmt(steady.load_final[0]) << "," << fmt(steady.load_final[1])
           << ") dev=" << fmt(dev);
  o.require(steady.converged(), "steady run converged");
  o.require(dev <= 1e-6, "steady S = T +- 1e-6");

  const double period = 10.0;
  const ArrivalSchedule schedule = [&](double t, std::span<double> a) {
    const double w = 2.0 * std::numbers::pi * t / period;
    a[0] = 5.0 * (1.0 + 0.3 * std::sin(w));
    a[1] = 5.0 * (1.0 + 0.2 * std::sin(w + 1.0));
  };
  GreedyConfig cfg;
  cfg.horizon = 400.0;
  cfg.step = 1e-3;
  cfg.sample_stride = 1;
  const Trajectory forced = greedy(inst, Vector{0.5, 0.5}, cfg, schedule);
  const auto lag = detect_period(forced, 0.5 * period, 1.5 * period, 1e-6);
  // Whole periods from t = 300 on.
  const TimeAverage avg = time_average_check(inst, forced, 300.0, 400.0);
  double pdev = 0.0;
  for (std::size_t i = 0; i < 2; ++i) pdev = std::max(pdev, std::abs(avg.deviation[i]));
  o.detail << " forced period=" << (lag ? fmt(*lag) : std::string("none")) << " mean S=("
           << fmt(avg.mean_load[0]) << "," << fmt(avg.mean_load[1]) << ") dev=" << fmt(pdev);
  o.require(lag.has_value() && std::abs(*lag - period) < 1e-2, "periodic response at the forcing period");
  o.require(avg.hypothesis_ok, "response stays interior");
  o.require(pdev <= 1e-3, "period-averaged S = T +- 1e-3");
  report(7, o);
}

void criterion_8() {
  Outcome o;
  int runs = 0, bad = 0;
  for (double a : {0.55, 0.7, 0.9})
    for (double b : {0.55, 0.7, 0.9})
      for (double arr : {1.0, 10.0, 100.0}) {
        const auto inst = two_node_instance(a, b, arr, arr);
        GreedyConfig cfg;
        cfg.horizon = 5000.0;
        const Trajectory traj = greedy(inst, Vector{0.5, 0.5}, cfg);
        const OverloadReport rep = detect_uncontrollable(traj, inst);
        ++runs;
        // No node may settle on x = 0; a node at x = 1 must be under its threshold.
        bool ok = traj.converged() && rep.uncontrollable_count() == 0;
        for (std::size_t i = 0; i < 2; ++i) {
          if (traj.states[i] == NodeState::AtZero) ok = false;
          if (traj.states[i] == NodeState::AtOne && traj.load_final[i] > inst.thresholds[i]) ok = false;
        }
        if (!ok) {
          ++bad;
          o.detail << " [a=" << a << " b=" << b << " A=" << arr << " x=(" << fmt(traj.x_final[0]) << ","
                   << fmt(traj.x_final[1]) << ")]";
        }
      }
  o.detail << " part2 runs=" << runs << " failing=" << bad;
  o.require(bad == 0, "self-correlation > 1/2: no uncontrollable node, convergence away from x = 0");

  const auto low = two_node_instance(0.3, 0.3, 0.9, 0.9);
  const auto high = two_node_instance(0.3, 0.3, 1.5, 1.5);
  GreedyConfig cfg;
  cfg.horizon = 5000.0;
  const Vector x0{0.6, 0.4};
  const Trajectory tl = greedy(low, x0, cfg);
  const Trajectory th = greedy(high, x0, cfg);
  const std::size_t ul = detect_uncontrollable(tl, low).uncontrollable_count();
  const std::size_t uh = detect_uncontrollable(th, high).uncontrollable_count();
  o.detail << " part3 A=0.9: uncontrollable=" << ul << " A=1.5: uncontrollable=" << uh;
  o.require(tl.converged() && ul == 0, "A = (0.9, 0.9) controllable");
  o.require(th.converged() && uh >= 1, "A = (1.5, 1.5) has an uncontrollable node");
  report(8, o);
}

void criterion_9() {
  Outcome o;
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  std::size_t total_unc = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 7;
    SystemInstance inst = random_instance(n, rng, 0.0, 1.0);
    // Random direction, scaled to a random point inside the polytope.
    double scale = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      double inflow = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) inflow += inst.corr(j, i) * inst.arrivals[j];
      if (inflow > 0.0) scale = std::min(scale, inst.thresholds[i] / inflow);
    }
    const double f = scale * (0.05 + 0.95 * u(rng));
    for (double& a : inst.arrivals) a *= f;
    if (!polytope_contains(inst).contained) {
      ++bad;
      continue;
    }
    Vector x0(n);
    for (double& v : x0) v = 0.05 + 0.9 * u(rng);
    GreedyConfig cfg;
    cfg.horizon = 2000.0;
    const Trajectory traj = greedy(inst, x0, cfg);
    const std::size_t unc = detect_uncontrollable(traj, inst).uncontrollable_count();
    total_unc += unc;
    if (unc != 0) ++bad;
  }
  const PolytopeReport ex = polytope_contains(two_node_example());
  o.detail << " inside-polytope runs with uncontrollable nodes=" << bad << "/100 (total " << total_unc
           << ") example contained=" << ex.contained << " slack_b=" << fmt(ex.slack[1]);
  o.require(bad == 0, "zero uncontrollable nodes inside the polytope");
  o.require(!ex.contained && std::abs(ex.slack[1] + 0.2) < 1e-12, "example outside with slack -0.2 at node b");
  report(9, o);
}

void criterion_10() {
  Outcome o;
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_instance(2 + trial % 9, rng, 0.1, 5.0);
    Vector x(inst.size());
    for (double& v : x) v = u(rng);
    const double sens = 0.5 + 2.0 * u(rng);
    const Matrix ja = jacobian_at(inst, x, sens);
    const Matrix jf = finite_diff_jacobian(inst, x, sens);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ja.data().size(); ++k) {
      num = std::max(num, std::abs(ja.data()[k] - jf.data()[k]));
      den = std::max(den, std::abs(ja.data()[k]));
    }
    worst = std::max(worst, num / den);
  }
  o.detail << " max_rel_err=" << fmt(worst);
  o.require(worst < 1e-6, "relative error < 1e-6");
  report(10, o);
}

void criterion_11() {
  Outcome o;
  ExperimentConfig cfg;
  cfg.n = 48;
  cfg.trials = 100;
  cfg.load_grid = {0.1, 0.3, 1.0, 3.0, 10.0};
  cfg.corr_gen.self_corr = 0.3;
  cfg.algorithm = Algorithm::Both;
  const auto t0 = Clock::now();
  const SweepResult r = run_sweep(cfg);
  const double secs = seconds_since(t0);

  bool monotone = true;
  std::size_t sentinels = 0, failed = 0;
  for (std::size_t k = 0; k < r.rows.size(); ++k) {
    const auto& row = r.rows[k];
    o.detail << " [Abar=" << fmt(row.mean_load) << " cost=" << fmt(row.mean_cost)
             << " unc=" << fmt(row.mean_uncontrollable) << " ovl=" << fmt(row.overload_rate) << "]";
    failed += row.failed_trials;
    if (k > 0 && !(row.mean_cost >= r.rows[k - 1].mean_cost)) monotone = false;
    for (const auto& t : row.trials) {
      if (t.dual_ran) {
        ++ledger.dual_runs;
        ledger.dual_iterations += t.dual_iterations;
        ledger.bound_violations += t.dual_bound_violations;
        if (t.cost.is_overload()) ++sentinels;
      }
      if (t.greedy_ran) {
        ++ledger.greedy_runs;
        ledger.max_excursion = std::max(ledger.max_excursion, t.greedy_max_excursion);
      }
    }
  }
  o.detail << " runtime=" << fmt(secs) << "s";
  o.require(failed == 0, "no failed trials");
  o.require(monotone, "dual mean cost nondecreasing in Abar");
  o.require(sentinels == 0, "zero overload sentinels");
  o.require(r.rows.front().mean_uncontrollable == 0.0, "uncontrollable count 0 at Abar = 0.1");
  o.require(r.rows.back().mean_uncontrollable >= 1.0, "uncontrollable count >= 1 at Abar = 10");
  o.require(secs < 600.0, "sweep runtime < 10 min");
  report(11, o);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion_1();
  criterion_2();
  criterion_4();
  criterion_5();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();

  {
    Outcome o;
    o.detail << " dual_runs=" << ledger.dual_runs << " iterations=" << ledger.dual_iterations
             << " violations=" << ledger.bound_violations << " max |g|^2/bound=" << fmt(ledger.max_bound_ratio);
    o.require(ledger.bound_violations == 0, "|g|^2 <= A_max^2 + N T_max^2 at every iteration");
    report(3, o);
  }
  {
    Outcome o;
    o.detail << " greedy_runs=" << ledger.greedy_runs << " max pre-clamp excursion=" << fmt(ledger.max_excursion);
    o.require(ledger.max_excursion <= 1e-12, "x within [-1e-12, 1 + 1e-12] before clamping");
    report(6, o);
  }
  {
    Outcome& o = outcomes[8];
    o.detail << " dulac: two-node converged runs=" << ledger.two_node_converged
             << " max tail variation=" << fmt(ledger.max_tail_variation);
    o.require(ledger.two_node_converged > 0 && ledger.max_tail_variation < 1e-6,
              "tail variation < 1e-6 on every converged two-node run");
  }
  int failures = 0;
  for (int id = 1; id <= 11; ++id) {
    std::printf("%s criterion %d:%s\n", outcomes[id].pass ? "PASS" : "FAIL", id, outcomes[id].detail.str().c_str());
    if (!outcomes[id].pass) ++failures;
  }
  std::printf("total runtime %.1f s, %d failing\n", seconds_since(t0), failures);
  return failures == 0 ? 0 : 1;
}
