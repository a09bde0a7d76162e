#pragma once

// Space-time error fields: where a decoded trajectory departs from the
// noiseless rule applied to its own previous step.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "toomdtc/ca_rule.hpp"
#include "toomdtc/langevin.hpp"
#include "toomdtc/pca.hpp"
#include "toomdtc/spin_config.hpp"

namespace toomdtc {

/// Binary indicator E(t, x, y) for t = 1 .. steps (stored 0-based in t).
class ErrorField {
 public:
  ErrorField() = default;
  ErrorField(int steps, int width, int height)
      : steps_(steps), width_(width), height_(height), bits_(std::size_t(steps) * width * height, 0) {
    if (steps <= 0 || width <= 0 || height <= 0) throw std::invalid_argument("ErrorField: dimensions must be positive");
  }

  int steps() const noexcept { return steps_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  std::size_t index(int t, int x, int y) const noexcept {
    return (std::size_t(t) * height_ + y) * width_ + x;
  }
  std::uint8_t at(int t, int x, int y) const noexcept { return bits_[index(t, x, y)]; }
  void set(int t, int x, int y, bool e) noexcept { bits_[index(t, x, y)] = e ? 1 : 0; }

  /// Spatially periodic access; t must be in range.
  std::uint8_t wrapped(int t, int x, int y) const noexcept {
    x %= width_;
    if (x < 0) x += width_;
    y %= height_;
    if (y < 0) y += height_;
    return bits_[index(t, x, y)];
  }

  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }
  std::vector<std::uint8_t>& bits() noexcept { return bits_; }

  /// Rule that produced step t (0-based).
  std::vector<std::string> rule_used;

  /// Keeps steps [first, last).
  ErrorField slice(int first, int last) const {
    if (first < 0 || last > steps_ || first >= last) throw std::invalid_argument("ErrorField::slice: bad range");
    ErrorField out(last - first, width_, height_);
    const std::size_t plane = std::size_t(width_) * height_;
    std::copy(bits_.begin() + first * plane, bits_.begin() + last * plane, out.bits_.begin());
    if (!rule_used.empty()) out.rule_used.assign(rule_used.begin() + first, rule_used.begin() + last);
    return out;
  }

 private:
  int steps_ = 0;
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Stroboscopic CA trajectory of a Langevin run: the initial decode, then for
/// each cycle the B read after the following relaxation and the A read after
/// the next cycle's first relaxation (or the closing relaxation).
inline std::vector<SpinConfig> extract_discrete(const LangevinTrajectory& traj) {
  if (traj.reads.empty()) throw std::invalid_argument("extract_discrete: trajectory has no read points");
  std::vector<SpinConfig> out;
  const auto& first = traj.reads.front();
  if (first.sub_step != -1 || !first.a) throw std::invalid_argument("extract_discrete: missing initial read");
  out.push_back(*first.a);
  for (std::size_t i = 1; i < traj.reads.size(); ++i) {
    const auto& r = traj.reads[i];
    if (!r.a || !r.b) throw std::invalid_argument("extract_discrete: reads were stored without configurations");
    if (r.sub_step == 2) out.push_back(*r.b);
    else if (r.sub_step == 0 && r.cycle > 0) out.push_back(*r.a);
  }
  return out;
}

/// Per-step rule list for `steps` updates of a cyclic schedule.
inline std::vector<CARule> expand_schedule(std::span<const CARule> cycle, int steps) {
  if (cycle.empty()) throw std::invalid_argument("expand_schedule: empty schedule");
  std::vector<CARule> out;
  out.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  for (int t = 0; t < steps; ++t) out.push_back(cycle[static_cast<std::size_t>(t) % cycle.size()]);
  return out;
}

/// E(x, t) = 1 iff state(x, t) differs from rule_t applied to step t - 1.
inline ErrorField detect_errors(std::span<const SpinConfig> trajectory, std::span<const CARule> per_step_rules) {
  if (trajectory.size() < 2) throw std::invalid_argument("detect_errors: need at least two configurations");
  if (per_step_rules.size() != trajectory.size() - 1)
    throw std::invalid_argument("detect_errors: schedule has " + std::to_string(per_step_rules.size()) +
                                " rules for " + std::to_string(trajectory.size() - 1) + " steps");
  const int w = trajectory.front().width();
  const int h = trajectory.front().height();
  ErrorField field(static_cast<int>(trajectory.size()) - 1, w, h);
  for (std::size_t t = 1; t < trajectory.size(); ++t) {
    if (trajectory[t].width() != w || trajectory[t].height() != h)
      throw std::invalid_argument("detect_errors: configuration dimensions change");
    const SpinConfig predicted = apply_rule(trajectory[t - 1], per_step_rules[t - 1]);
    const auto& actual = trajectory[t].cells();
    const auto& expect = predicted.cells();
    auto* bits = field.bits().data() + (t - 1) * std::size_t(w) * h;
    for (std::size_t i = 0; i < actual.size(); ++i) bits[i] = actual[i] != expect[i] ? 1 : 0;
    field.rule_used.push_back(per_step_rules[t - 1].name());
  }
  return field;
}

inline ErrorField detect_errors(const PcaTrajectory& trajectory, std::span<const CARule> cycle) {
  const auto rules = expand_schedule(cycle, static_cast<int>(trajectory.size()) - 1);
  return detect_errors(trajectory.configs, rules);
}

struct RateEstimate {
  double value = 0.0;
  double error = 0.0;
};

/// Mean of E with a batched standard error: time is cut into up to 20
/// contiguous batches; one batch falls back to the binomial error.
inline RateEstimate error_rate(const ErrorField& field) {
  if (field.size() == 0) throw std::invalid_argument("error_rate: empty field");
  const std::size_t plane = std::size_t(field.width()) * field.height();
  std::uint64_t total = 0;
  for (auto b : field.bits()) total += b;
  const double p = static_cast<double>(total) / static_cast<double>(field.size());
  const int batches = std::min(field.steps(), 20);
  if (batches < 2) return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(field.size()))};
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    const int t0 = b * field.steps() / batches;
    const int t1 = (b + 1) * field.steps() / batches;
    std::uint64_t c = 0;
    for (std::size_t i = t0 * plane; i < t1 * plane; ++i) c += field.bits()[i];
    means.push_back(static_cast<double>(c) / static_cast<double>((t1 - t0) * plane));
  }
  double m = 0.0;
  for (double x : means) m += x;
  m /= batches;
  double var = 0.0;
  for (double x : means) var += (x - m) * (x - m);
  var /= (batches - 1);
  return {p, std::sqrt(var / batches)};
}

/// Pooled over several fields: total errors over total cells, standard error
/// across fields when there are at least two.
inline RateEstimate error_rate(std::span<const ErrorField> fields) {
  if (fields.empty()) throw std::invalid_argument("error_rate: no fields");
  if (fields.size() == 1) return error_rate(fields.front());
  std::uint64_t errors = 0, cells = 0;
  std::vector<double> per;
  for (const auto& f : fields) {
    std::uint64_t c = 0;
    for (auto b : f.bits()) c += b;
    errors += c;
    cells += f.size();
    per.push_back(static_cast<double>(c) / static_cast<double>(f.size()));
  }
  double m = 0.0;
  for (double x : per) m += x;
  m /= static_cast<double>(per.size());
  double var = 0.0;
  for (double x : per) var += (x - m) * (x - m);
  var /= static_cast<double>(per.size() - 1);
  return {static_cast<double>(errors) / static_cast<double>(cells), std::sqrt(var / static_cast<double>(per.size()))};
}

/// Boltzmann estimate of the switch-over error: (1/2) erfc(sqrt(v_I / 2T)).
inline double pe_equilibrium(double v_interaction, double T) {
  if (v_interaction < 0.0 || T < 0.0) throw std::invalid_argument("pe_equilibrium: negative argument");
  if (v_interaction == 0.0) return 0.5;
  if (T == 0.0) return 0.0;
  return 0.5 * std::erfc(std::sqrt(v_interaction / (2.0 * T)));
}

}  // namespace toomdtc
