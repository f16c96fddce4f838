#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "anycast/greedy.hpp"
#include "support.hpp"

using namespace anycast;

TEST(GreedyDerivative, MatchesDefinition) {
  const auto inst = two_node_example();
  const Vector x{0.3, 0.6};
  const Vector d = greedy_derivative(inst, x, 2.0);
  const double s0 = 0.1 * 0.3 + 0.5 * 0.6;
  const double s1 = 0.9 * 0.3 + 0.5 * 0.6;
  EXPECT_DOUBLE_EQ(d[0], -2.0 * 0.3 * 0.7 * (s0 - 0.7));
  EXPECT_DOUBLE_EQ(d[1], -2.0 * 0.6 * 0.4 * (s1 - 0.7));
  EXPECT_THROW(greedy_derivative(inst, Vector{1.2, 0.5}, 1.0), std::invalid_argument);
}

TEST(GreedyDerivative, VanishesOnFaces) {
  std::mt19937_64 rng(3);
  const auto inst = test_support::random_instance(4, rng);
  const Vector d = greedy_derivative(inst, Vector{0.0, 1.0, 0.0, 1.0}, 1.0);
  for (double v : d) EXPECT_EQ(v, 0.0);
}

TEST(Integrate, ExampleReachesUncontrollableCorner) {
  const auto inst = two_node_example();
  GreedyConfig cfg;
  const Trajectory traj = integrate(inst, Vector{0.5, 0.5}, cfg);
  ASSERT_TRUE(traj.converged());
  EXPECT_LT(std::abs(traj.x_final[0] - 1.0), 1e-3);
  EXPECT_LT(std::abs(traj.x_final[1]), 1e-3);
  EXPECT_NEAR(traj.load_final[1], 0.9, 1e-3);
  EXPECT_EQ(traj.states[0], NodeState::AtOne);
  EXPECT_EQ(traj.states[1], NodeState::AtZero);
  const OverloadReport rep = detect_uncontrollable(traj, inst);
  EXPECT_EQ(rep.nodes[0], OverloadClass::Ok);
  EXPECT_EQ(rep.nodes[1], OverloadClass::Uncontrollable);
  EXPECT_EQ(rep.uncontrollable_count(), 1u);
  EXPECT_TRUE(rep.determinate);
}

TEST(Integrate, StaysInsideHypercube) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = test_support::random_instance(2 + trial % 5, rng, 20.0);
    Vector x0(inst.size());
    for (double& v : x0) v = u(rng);
    GreedyConfig cfg;
    cfg.horizon = 50.0;
    cfg.sensitivity = 0.5 + trial % 3;
    const Trajectory traj = integrate(inst, x0, cfg);
    EXPECT_LE(traj.max_excursion, 1e-12);
    for (const auto& s : traj.samples)
      for (double v : s.x) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
  }
}

TEST(Integrate, SymmetricInteriorEquilibriumBalancesLoad) {
  const auto inst = two_node_instance(0.8, 0.8, 5.0, 5.0);
  GreedyConfig cfg;
  const Trajectory traj = integrate(inst, Vector{0.5, 0.5}, cfg);
  ASSERT_TRUE(traj.converged());
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(traj.load_final[i], 0.7, 1e-6);
    EXPECT_NEAR(traj.x_final[i], 0.14, 1e-6);
  }
  EXPECT_LT(tail_variation(traj), 1e-6);
}

TEST(Integrate, PeriodicForcingAveragesToThreshold) {
  const auto inst = two_node_instance(0.8, 0.8, 5.0, 5.0);
  const double period = 10.0;
  const ArrivalSchedule schedule = [&](double t, std::span<double> a) {
    const double f = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * t / period);
    a[0] = 5.0 * f;
    a[1] = 5.0 * (1.0 + 0.2 * std::sin(2.0 * std::numbers::pi * t / period + 1.0));
  };
  GreedyConfig cfg;
  cfg.horizon = 400.0;
  cfg.step = 1e-3;
  cfg.sample_stride = 1;
  const Trajectory traj = integrate(inst, Vector{0.5, 0.5}, cfg, schedule);
  EXPECT_FALSE(traj.converged());
  const auto lag = detect_period(traj, 0.5 * period, 1.5 * period, 1e-6);
  ASSERT_TRUE(lag.has_value());
  EXPECT_NEAR(*lag, period, 1e-3);
  const TimeAverage avg = time_average_check(inst, traj, 300.0, 400.0);
  EXPECT_TRUE(avg.hypothesis_ok);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(avg.mean_load[i], 0.7, 1e-3);
}

TEST(Integrate, SampleStrideAndEndpoints) {
  const auto inst = two_node_instance(0.8, 0.8, 5.0, 5.0);
  GreedyConfig cfg;
  cfg.horizon = 1.0;
  cfg.step = 0.01;
  cfg.sample_stride = std::numeric_limits<std::size_t>::max();
  const Trajectory traj = integrate(inst, Vector{0.5, 0.5}, cfg);
  ASSERT_EQ(traj.samples.size(), 2u);
  EXPECT_EQ(traj.samples.front().t, 0.0);
  EXPECT_NEAR(traj.samples.back().t, 1.0, 1e-12);
  EXPECT_EQ(traj.samples.back().x, traj.x_final);
}

TEST(Integrate, LoadIntegralMatchesQuadrature) {
  const auto inst = two_node_instance(0.8, 0.8, 5.0, 5.0);
  GreedyConfig cfg;
  cfg.horizon = 5.0;
  cfg.step = 1e-3;
  cfg.sample_stride = 1;
  const Trajectory traj = integrate(inst, Vector{0.3, 0.6}, cfg);
  for (int i = 0; i < 2; ++i) {
    double trap = 0.0;
    for (std::size_t k = 1; k < traj.samples.size(); ++k)
      trap += 0.5 * (traj.samples[k].load[i] + traj.samples[k - 1].load[i]) *
              (traj.samples[k].t - traj.samples[k - 1].t);
    EXPECT_NEAR(traj.samples.back().load_integral[i], trap, 1e-6);
  }
}

TEST(Integrate, RejectsBadInput) {
  const auto inst = two_node_example();
  GreedyConfig cfg;
  EXPECT_THROW(integrate(inst, Vector{0.0, 0.5}, cfg), std::invalid_argument);
  EXPECT_THROW(integrate(inst, Vector{0.5}, cfg), std::invalid_argument);
  cfg.sensitivity = 0.0;
  EXPECT_THROW(integrate(inst, Vector{0.5, 0.5}, cfg), std::invalid_argument);
  cfg = GreedyConfig{};
  cfg.step = -1.0;
  EXPECT_THROW(integrate(inst, Vector{0.5, 0.5}, cfg), std::invalid_argument);
}

TEST(DetectUncontrollable, ControllableOverloadAndIndeterminate) {
  const auto inst = two_node_example();
  Trajectory traj;
  traj.verdict = Verdict::HorizonReached;
  traj.x_final = {0.5, 0.0005};
  traj.load_final = {0.8, 0.9};
  const OverloadReport rep = detect_uncontrollable(traj, inst);
  EXPECT_FALSE(rep.determinate);
  EXPECT_EQ(rep.nodes[0], OverloadClass::OverloadedControllable);
  EXPECT_EQ(rep.nodes[1], OverloadClass::Uncontrollable);
}

TEST(VectorField, GridShapeAndValues) {
  const auto inst = two_node_example();
  const auto grid = vector_field_grid(inst, 4, 1.0);
  ASSERT_EQ(grid.size(), 16u);
  for (const auto& p : grid) {
    const Vector d = greedy_derivative(inst, Vector{p.x1, p.x2}, 1.0);
    EXPECT_EQ(d[0], p.dx1);
    EXPECT_EQ(d[1], p.dx2);
  }
  EXPECT_DOUBLE_EQ(grid.front().x1, 0.125);
  std::mt19937_64 rng(1);
  EXPECT_THROW(vector_field_grid(test_support::random_instance(3, rng), 4, 1.0), std::invalid_argument);
}

TEST(Damping, CustomDampingIsUsed) {
  struct Unit {
    double operator()(double) const noexcept { return 1.0; }
  };
  const auto inst = two_node_example();
  const Vector d = greedy_derivative(routing_matrix(inst), inst.thresholds, Vector{0.5, 0.5}, 1.0, Unit{});
  EXPECT_DOUBLE_EQ(d[0], -(0.05 + 0.25 - 0.7));
}
