#pragma once

// Synchronous cellular automata and their noisy (probabilistic) versions.

#include <cmath>
#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "toomdtc/ca_rule.hpp"
#include "toomdtc/rng.hpp"
#include "toomdtc/spin_config.hpp"

namespace toomdtc {

/// Per-cell override noise: after the rule is applied each cell is set to
/// state s with probability eps[s], independently, and is otherwise left alone.
struct NoiseModel {
  std::vector<Spin> states = binary_states();
  std::vector<double> eps = {0.0, 0.0};  // aligned with `states`

  static NoiseModel none() { return {}; }

  /// Biased binary noise: eps_plus overrides to +1, eps_minus to -1.
  static NoiseModel biased(double eps_plus, double eps_minus) {
    NoiseModel m;
    m.eps = {eps_minus, eps_plus};
    m.validate();
    return m;
  }

  /// Symmetric binary noise whose per-cell error probability is exactly p.
  static NoiseModel symmetric(double p) { return biased(p, p); }

  void validate() const {
    if (states.size() != eps.size() || states.empty())
      throw std::invalid_argument("NoiseModel: one probability per state required");
    double total = 0.0;
    for (double e : eps) {
      if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("NoiseModel: probability outside [0,1]");
      total += e;
    }
    if (total > 1.0 + 1e-12) throw std::invalid_argument("NoiseModel: probabilities sum above 1");
  }

  bool silent() const noexcept {
    return std::all_of(eps.begin(), eps.end(), [](double e) { return e == 0.0; });
  }

  double total() const noexcept { return std::accumulate(eps.begin(), eps.end(), 0.0); }

  /// Probability that a cell whose rule output is `out` ends in a different state.
  double error_probability(Spin out) const {
    double p = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i] != out) p += eps[i];
    return p;
  }

  /// Distribution of the updated cell given the rule output (aligned with `states`).
  std::vector<double> cell_update_distribution(Spin out) const {
    std::vector<double> dist(eps);
    const double keep = 1.0 - total();
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i] == out) dist[i] += keep;
    return dist;
  }
};

inline void check_rule_fits(const SpinConfig& config, const CARule& rule) {
  if (rule.states() != config.states()) throw std::invalid_argument("apply_rule: state sets differ");
  if (config.boundary() == Boundary::fixed) {
    for (const auto& o : rule.neighborhood())
      if (std::abs(o.dx) >= config.width() || std::abs(o.dy) >= config.height())
        throw std::invalid_argument("apply_rule: neighborhood of " + rule.name() +
                                    " exceeds lattice extent under fixed boundaries");
  }
}

/// One synchronous update. Every output cell reads only the input grid.
inline SpinConfig apply_rule(const SpinConfig& config, const CARule& rule) {
  check_rule_fits(config, rule);
  const auto& nbhd = rule.neighborhood();
  const std::size_t d = rule.states().size();
  std::vector<Spin> out(config.size());
  const bool binary = rule.is_binary();
  for (int y = 0; y < config.height(); ++y) {
    for (int x = 0; x < config.width(); ++x) {
      std::size_t idx = 0;
      for (std::size_t i = nbhd.size(); i-- > 0;) {
        Spin s = config.neighbor(x + nbhd[i].dx, y + nbhd[i].dy);
        idx = idx * d + (binary ? static_cast<std::size_t>(s > 0) : rule.state_index(s));
      }
      out[config.index(x, y)] = rule.by_index(idx);
    }
  }
  return config.with_cells(std::move(out));
}

inline SpinConfig apply_noise(const SpinConfig& config, const NoiseModel& noise, Stream& rng) {
  noise.validate();
  if (noise.states != config.states()) throw std::invalid_argument("apply_noise: state sets differ");
  if (noise.silent()) return config;
  auto cells = config.cells();
  for (auto& cell : cells) {
    double u = rng.uniform();
    for (std::size_t i = 0; i < noise.states.size(); ++i) {
      if (u < noise.eps[i]) {
        cell = noise.states[i];
        break;
      }
      u -= noise.eps[i];
    }
  }
  return config.with_cells(std::move(cells));
}

inline SpinConfig pca_step(const SpinConfig& config, const CARule& rule, const NoiseModel& noise, Stream& rng) {
  return apply_noise(apply_rule(config, rule), noise, rng);
}

inline double magnetization(const SpinConfig& config) {
  if (!config.is_binary()) throw std::invalid_argument("magnetization: binary state set required");
  long long sum = 0;
  for (Spin s : config.cells()) sum += s;
  return static_cast<double>(sum) / static_cast<double>(config.size());
}

struct PcaTrajectory {
  std::vector<SpinConfig> configs;
  std::vector<double> magnetizations;

  std::size_t size() const noexcept { return configs.size(); }
  void push(SpinConfig c) {
    magnetizations.push_back(c.is_binary() ? magnetization(c) : 0.0);
    configs.push_back(std::move(c));
  }
};

/// Runs `steps` updates; step t (1-based) uses schedule[(t - 1) % schedule.size()].
inline PcaTrajectory run_pca(const SpinConfig& initial, std::span<const CARule> schedule, const NoiseModel& noise,
                             int steps, Stream& rng) {
  if (steps < 0) throw std::invalid_argument("run_pca: negative step count");
  if (schedule.empty()) throw std::invalid_argument("run_pca: empty rule schedule");
  PcaTrajectory traj;
  traj.configs.reserve(static_cast<std::size_t>(steps) + 1);
  traj.push(initial);
  for (int t = 1; t <= steps; ++t)
    traj.push(pca_step(traj.configs.back(), schedule[static_cast<std::size_t>(t - 1) % schedule.size()], noise, rng));
  return traj;
}

inline PcaTrajectory run_pca(const SpinConfig& initial, const CARule& rule, const NoiseModel& noise, int steps,
                             Stream& rng) {
  return run_pca(initial, std::span<const CARule>(&rule, 1), noise, steps, rng);
}

}  // namespace toomdtc
