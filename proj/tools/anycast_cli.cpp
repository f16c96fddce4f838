// anycast: command-line front end for the load-management library.
//
// Exit codes: 0 success (dual converged), 1 invalid input, 2 dual reached
// max-iters, 3 control channel needs strictly positive routing.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anycast/anycast.hpp"

namespace {

using namespace anycast;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitMaxIters = 2;
constexpr int kExitChannel = 3;

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path);
  out << text;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_file(path, text);
}

SystemInstance load_instance(const std::string& path) {
  LoadedInstance li = read_instance(path);
  for (const auto& adj : li.adjustments)
    std::cerr << "note: corr row " << adj.row << " summed to " << format_double(adj.original_sum)
              << "; rescaled to 1\n";
  require_valid(li.instance);
  return std::move(li.instance);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("not a number: \"" + item + "\"");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos)
      throw std::invalid_argument("not a number: \"" + item + "\"");
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> parse_indices(const std::string& text) {
  std::vector<std::size_t> out;
  for (double v : parse_list(text)) {
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw std::invalid_argument("partition entries must be node indices");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// --- solve-dual -------------------------------------------------------------

struct DualArgs {
  std::string instance;
  double epsilon = 0.01;
  std::string beta_mode = "exact";
  std::string channel = "deterministic";
  double gamma_rate = 10.0;
  double window = 1e3;
  std::uint64_t seed = 0;
  std::size_t max_iters = 1'000'000;
  bool with_oracle = false;
  std::string out;
  std::string history;
};

int run_solve_dual(const DualArgs& a) {
  const SystemInstance inst = load_instance(a.instance);
  DualConfig cfg;
  cfg.epsilon = a.epsilon;
  cfg.max_iters = a.max_iters;
  cfg.beta_mode = a.beta_mode == "fastcontrol" ? BetaMode::FastControl : BetaMode::Exact;
  cfg.channel.gamma_rate = a.gamma_rate;
  cfg.channel.mode = a.channel == "poisson" ? ChannelMode::Poisson : ChannelMode::Deterministic;
  cfg.channel.window = a.window;
  cfg.channel.seed = a.seed;

  std::optional<OracleResult> oracle;
  if (a.with_oracle) {
    oracle = inst.size() <= 3 ? primal_grid_solve(inst) : primal_projected_descent(inst);
    cfg.reference_optimum = oracle->objective;
  }
  const DualSolution sol = run_dual(inst, cfg);

  Json j = dual_solution_to_json(sol);
  j["epsilon"] = a.epsilon;
  j["metadata"] = {{"beta_mode", a.beta_mode},
                   {"channel", a.channel},
                   {"gamma_rate", a.gamma_rate},
                   {"window", a.window},
                   {"seed", a.seed},
                   {"max_iters", a.max_iters}};
  if (oracle) {
    j["oracle"] = oracle_to_json(*oracle);
    j["gap"] = oracle->objective - sol.best_dual;
  }
  emit(a.out, j.dump(2) + "\n");
  if (!a.history.empty()) {
    std::ostringstream csv;
    write_history_csv(csv, sol.history);
    write_file(a.history, csv.str());
  }
  return sol.converged ? kExitOk : kExitMaxIters;
}

// --- simulate-greedy --------------------------------------------------------

struct GreedyArgs {
  std::string instance;
  std::string x0 = "default";
  double sensitivity = 1.0;
  double horizon = 2000.0;
  double step = 0.0;
  double conv_tol = 1e-8;
  std::size_t vector_field = 0;
  std::string out = "greedy";
};

int run_simulate_greedy(const GreedyArgs& a) {
  const SystemInstance inst = load_instance(a.instance);
  const std::size_t n = inst.size();
  Vector x0 = a.x0 == "default" ? Vector(n, 0.5) : parse_list(a.x0);
  if (x0.size() != n) throw std::invalid_argument("--x0 needs " + std::to_string(n) + " values");
  if (a.vector_field > 0 && n != 2)
    throw std::invalid_argument("--vector-field is available for two-node instances only");

  GreedyConfig cfg;
  cfg.sensitivity = a.sensitivity;
  cfg.horizon = a.horizon;
  cfg.conv_tol = a.conv_tol;
  if (a.step > 0.0) cfg.step = a.step;
  const Trajectory traj = integrate(inst, x0, cfg);
  const OverloadReport rep = detect_uncontrollable(traj, inst, cfg.boundary_eps);

  Json j = trajectory_verdict_json(traj, rep);
  j["metadata"] = {{"x0", x0}, {"sensitivity", a.sensitivity}, {"horizon", a.horizon}};
  write_file(a.out + ".json", j.dump(2) + "\n");
  std::ostringstream csv;
  write_trajectory_csv(csv, traj);
  write_file(a.out + ".trajectory.csv", csv.str());
  if (a.vector_field > 0) {
    std::ostringstream field;
    write_field_csv(field, vector_field_grid(inst, a.vector_field, a.sensitivity));
    write_file(a.out + ".field.csv", field.str());
  }
  return kExitOk;
}

// --- analyze ----------------------------------------------------------------

struct AnalyzeArgs {
  std::string instance;
  std::string partition;
  double sensitivity = 1.0;
  std::string out;
};

int run_analyze(const AnalyzeArgs& a) {
  const SystemInstance inst = load_instance(a.instance);
  StabilityReport rep = analyze(inst, a.sensitivity);
  if (!a.partition.empty()) {
    const auto bar = a.partition.find('|');
    if (bar == std::string::npos) throw std::invalid_argument("--partition expects \"i,j,...|k,l,...\"");
    rep.partition = effective_self_correlation(inst, parse_indices(a.partition.substr(0, bar)),
                                               parse_indices(a.partition.substr(bar + 1)));
  }
  emit(a.out, stability_to_json(rep).dump(2) + "\n");
  return kExitOk;
}

// --- experiment -------------------------------------------------------------

struct ExperimentArgs {
  std::string config;
  std::string out = "-";
  std::string summary;
};

int run_experiment(const ExperimentArgs& a) {
  const ExperimentConfig cfg = read_experiment_config(a.config);
  const SweepResult res = run_sweep(cfg);
  std::ostringstream csv;
  write_sweep_csv(csv, res);
  emit(a.out, csv.str());
  const std::string summary =
      !a.summary.empty() ? a.summary : (a.out.empty() || a.out == "-" ? "" : a.out + ".meta.json");
  if (!summary.empty()) write_file(summary, sweep_summary_json(res, cfg).dump(2) + "\n");
  for (const auto& row : res.rows)
    for (const auto& t : row.trials)
      if (t.failed) std::cerr << "trial seed " << t.seed << " failed: " << t.error << "\n";
  return kExitOk;
}

// --- gen-instance -----------------------------------------------------------

struct GenArgs {
  std::size_t n = 48;
  double abar = 1.0;
  double self_corr = 0.7;
  double spread = 0.1;
  double concentration = 0.5;
  std::uint64_t seed = 1;
  std::string out = "-";
};

int run_gen_instance(const GenArgs& a) {
  ExperimentConfig cfg;
  cfg.n = a.n;
  cfg.corr_gen = {a.self_corr, a.spread, a.concentration};
  if (a.n == 0) throw std::invalid_argument("--n must be >= 1");
  if (!(a.self_corr > 0.0 && a.self_corr < 1.0)) throw std::invalid_argument("--self-corr must be in (0, 1)");
  if (!(a.concentration > 0.0)) throw std::invalid_argument("--concentration must be > 0");
  const SystemInstance inst = generate_instance(cfg, a.abar, a.seed);
  require_valid(inst);
  Json j = instance_to_json(inst);
  j["metadata"] = {{"generator", "synthetic"}, {"abar", a.abar},         {"self_corr", a.self_corr},
                   {"spread", a.spread},       {"concentration", a.concentration}, {"seed", a.seed}};
  emit(a.out, j.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anycast CDN load management: dual solver, greedy dynamics, stability analysis"};
  app.require_subcommand(1);

  DualArgs dual;
  auto* sd = app.add_subcommand("solve-dual", "Run the distributed dual algorithm");
  sd->add_option("--instance", dual.instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  sd->add_option("--epsilon", dual.epsilon, "Target accuracy; sets the step size")->check(CLI::PositiveNumber);
  sd->add_option("--beta-mode", dual.beta_mode, "exact | fastcontrol")
      ->check(CLI::IsMember({"exact", "fastcontrol"}));
  sd->add_option("--channel", dual.channel, "Control channel model: deterministic | poisson")
      ->check(CLI::IsMember({"deterministic", "poisson"}));
  sd->add_option("--gamma-rate", dual.gamma_rate, "Control packet rate scale")->check(CLI::PositiveNumber);
  sd->add_option("--window", dual.window, "Poisson observation window")->check(CLI::PositiveNumber);
  sd->add_option("--seed", dual.seed, "Channel RNG seed");
  sd->add_option("--max-iters", dual.max_iters, "Iteration cap")->check(CLI::PositiveNumber);
  sd->add_flag("--with-oracle", dual.with_oracle, "Solve the primal directly and report the gap");
  sd->add_option("--out", dual.out, "Solution JSON (default stdout)");
  sd->add_option("--history", dual.history, "Per-iteration CSV");

  GreedyArgs greedy;
  auto* sg = app.add_subcommand("simulate-greedy", "Integrate the greedy offload dynamics");
  sg->add_option("--instance", greedy.instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  sg->add_option("--x0", greedy.x0, "Start point as a comma list, or \"default\" (all 0.5)");
  sg->add_option("--sensitivity", greedy.sensitivity, "Sensitivity scalar")->check(CLI::PositiveNumber);
  sg->add_option("--horizon", greedy.horizon, "Maximum integration time")->check(CLI::PositiveNumber);
  sg->add_option("--step", greedy.step, "Fixed integrator step (default from the instance)")
      ->check(CLI::PositiveNumber);
  sg->add_option("--conv-tol", greedy.conv_tol, "Derivative norm for convergence")->check(CLI::PositiveNumber);
  sg->add_option("--vector-field", greedy.vector_field, "Vector-field grid resolution (two nodes)");
  sg->add_option("--out", greedy.out, "Output prefix: PREFIX.json, PREFIX.trajectory.csv, PREFIX.field.csv");

  AnalyzeArgs an;
  auto* sa = app.add_subcommand("analyze", "Stability report");
  sa->add_option("--instance", an.instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  sa->add_option("--partition", an.partition, "Two node groups, e.g. \"0,1|2,3\"");
  sa->add_option("--sensitivity", an.sensitivity, "Sensitivity scalar")->check(CLI::PositiveNumber);
  sa->add_option("--out", an.out, "Report JSON (default stdout)");

  ExperimentArgs ex;
  auto* se = app.add_subcommand("experiment", "Monte-Carlo sweep over the mean arrival rate");
  se->add_option("--config", ex.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  se->add_option("--out", ex.out, "Sweep CSV (default stdout)");
  se->add_option("--summary", ex.summary, "Run summary JSON (default OUT.meta.json)");

  GenArgs gen;
  auto* gi = app.add_subcommand("gen-instance", "Generate a synthetic instance");
  gi->add_option("--n", gen.n, "Number of nodes");
  gi->add_option("--abar", gen.abar, "Mean arrival rate")->check(CLI::PositiveNumber);
  gi->add_option("--self-corr", gen.self_corr, "Target self-correlation");
  gi->add_option("--spread", gen.spread, "Half-width of the self-correlation draw");
  gi->add_option("--concentration", gen.concentration, "Dirichlet shape of the off-diagonal split");
  gi->add_option("--seed", gen.seed, "RNG seed");
  gi->add_option("--out", gen.out, "Instance JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*sd) return run_solve_dual(dual);
    if (*sg) return run_simulate_greedy(greedy);
    if (*sa) return run_analyze(an);
    if (*se) return run_experiment(ex);
    if (*gi) return run_gen_instance(gen);
  } catch (const ChannelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitChannel;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
