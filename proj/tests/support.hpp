#pragma once

// Random instances for property tests, built independently of the harness
// generator.

#include <random>

#include "anycast/model.hpp"

namespace anycast::test_support {

inline Matrix random_stochastic(std::size_t n, std::mt19937_64& rng, bool strictly_positive = true) {
  std::uniform_real_distribution<double> u(strictly_positive ? 0.05 : 0.0, 1.0);
  Matrix c(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += (c(i, j) = u(rng));
    if (sum == 0.0) {
      c(i, i) = sum = 1.0;
    }
    double row = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) row += (c(i, j) /= sum);
    c(i, n - 1) = 1.0 - row;  // exact row sum up to one rounding
    if (c(i, n - 1) < 0.0) c(i, n - 1) = 0.0;
  }
  return c;
}

inline SystemInstance random_instance(std::size_t n, std::mt19937_64& rng, double max_arrival = 3.0,
                                      bool strictly_positive = true) {
  std::uniform_real_distribution<double> a(0.0, max_arrival);
  std::uniform_real_distribution<double> t(0.3, 1.5);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  SystemInstance inst;
  inst.corr = random_stochastic(n, rng, strictly_positive);
  for (std::size_t i = 0; i < n; ++i) {
    inst.arrivals.push_back(a(rng));
    inst.thresholds.push_back(t(rng));
    inst.eta.push_back(1.0);
    inst.gamma_cost.push_back(10.0);
    inst.latency.push_back(d(rng));
  }
  return inst;
}

}  // namespace anycast::test_support
