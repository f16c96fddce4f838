#pragma once

// Emulated anycast control-packet channel.
//
// Node i emits category-j control packets at rate r(i, j) = gamma * mu_i *
// C(j, i) / C(i, j). Packets travel over the same anycast routes as user
// traffic, so node i receives its own category at rate
//   R_i = sum_j r(j, i) * C(j, i) = gamma * sum_j C(i, j) mu_j = gamma * beta_i,
// and recovers beta_i = R_i / gamma without any explicit message exchange.
//
// DETERMINISTIC mode evaluates expected rates in exact rational arithmetic
// and rounds once, so the recovered beta is the correctly rounded coupling
// factor. POISSON mode samples packet counts over an observation window.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "anycast/exact.hpp"
#include "anycast/model.hpp"

namespace anycast {

enum class ChannelMode { Deterministic, Poisson };

struct ChannelConfig {
  double gamma_rate = 10.0;
  ChannelMode mode = ChannelMode::Deterministic;
  double window = 1e3;
  std::uint64_t seed = 0;
};

class ChannelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EmissionMatrix {
  Matrix rates;                // r(i, j), packets per unit time
  std::vector<Rational> exact;  // row-major exact rates
};

struct Reception {
  Vector rates;                     // R_i, received category-i rate at node i
  std::vector<Rational> exact;      // filled in DETERMINISTIC mode only
  std::vector<bool> low_confidence;  // POISSON: nothing arrived in the window
};

namespace detail {

inline void check_channel(const SystemInstance& inst, const ChannelConfig& cfg) {
  if (!(cfg.gamma_rate > 0.0)) throw ChannelError("control channel: gamma_rate must be > 0");
  if (!(cfg.window > 0.0)) throw ChannelError("control channel: window must be > 0");
  const std::size_t n = inst.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (!(inst.corr(i, j) > 0.0))
        throw ChannelError("control channel needs strictly positive routing; corr(" +
                           std::to_string(i) + "," + std::to_string(j) + ") = 0");
}

}  // namespace detail

inline EmissionMatrix emit_rates(const SystemInstance& inst, std::span<const double> mu,
                                 const ChannelConfig& cfg) {
  detail::check_channel(inst, cfg);
  const std::size_t n = inst.size();
  if (mu.size() != n) throw std::invalid_argument("emit_rates: multiplier length mismatch");
  EmissionMatrix em{Matrix(n, n), std::vector<Rational>(n * n)};
  const Rational gamma = to_rational(cfg.gamma_rate);
  for (std::size_t i = 0; i < n; ++i) {
    if (mu[i] < 0.0) throw std::invalid_argument("emit_rates: negative multiplier");
    const Rational scale = gamma * to_rational(mu[i]);
    for (std::size_t j = 0; j < n; ++j) {
      em.rates(i, j) = cfg.gamma_rate * mu[i] * inst.corr(j, i) / inst.corr(i, j);
      em.exact[i * n + j] = scale * to_rational(inst.corr(j, i)) / to_rational(inst.corr(i, j));
    }
  }
  return em;
}

/// Routes every node's control packets through the anycast matrix and reports
/// what each node sees of its own category.
///
/// POISSON: node j emits category-i packets as a Poisson process of rate
/// r(j, i); each packet lands at node l with probability C(j, l). Node i
/// counts its category over the window and reports count / window.
inline Reception route_and_receive(const SystemInstance& inst, const EmissionMatrix& em,
                                   const ChannelConfig& cfg) {
  detail::check_channel(inst, cfg);
  const std::size_t n = inst.size();
  Reception rx;
  rx.rates.assign(n, 0.0);
  rx.low_confidence.assign(n, false);
  if (cfg.mode == ChannelMode::Deterministic) {
    rx.exact.assign(n, Rational(0));
    for (std::size_t i = 0; i < n; ++i) {
      Rational acc(0);
      for (std::size_t j = 0; j < n; ++j) acc += em.exact[j * n + i] * to_rational(inst.corr(j, i));
      rx.exact[i] = acc;
      rx.rates[i] = to_double_rounded(acc);
    }
    return rx;
  }

  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32)};
  std::mt19937_64 rng(seq);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t received = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double mean = em.rates(j, i) * cfg.window;
      if (!(mean > 0.0)) continue;
      const auto emitted = std::poisson_distribution<std::int64_t>(mean)(rng);
      if (emitted == 0) continue;
      received += std::binomial_distribution<std::int64_t>(emitted, inst.corr(j, i))(rng);
    }
    rx.rates[i] = static_cast<double>(received) / cfg.window;
    rx.low_confidence[i] = received == 0;
  }
  return rx;
}

/// beta_i = R_i / gamma.
inline Vector recover_beta(const Reception& rx, const ChannelConfig& cfg) {
  const std::size_t n = rx.rates.size();
  Vector beta(n, 0.0);
  if (!rx.exact.empty()) {
    const Rational gamma = to_rational(cfg.gamma_rate);
    for (std::size_t i = 0; i < n; ++i) beta[i] = to_double_rounded(rx.exact[i] / gamma);
    return beta;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (rx.rates[i] < 0.0) throw std::invalid_argument("recover_beta: negative rate");
    beta[i] = rx.low_confidence[i] ? 0.0 : rx.rates[i] / cfg.gamma_rate;
  }
  return beta;
}

/// One full channel round: emit, route, recover.
inline Vector channel_beta(const SystemInstance& inst, std::span<const double> mu,
                           const ChannelConfig& cfg) {
  return recover_beta(route_and_receive(inst, emit_rates(inst, mu, cfg), cfg), cfg);
}

}  // namespace anycast
