#pragma once

// Floquet-Langevin emulation of a two-step cellular automaton.
//
// Each CA cell owns two oscillators A and B. One Floquet period (tau = 4) is
//   sub-step 0: both sublattices relax in the pinning double well
//   sub-step 1: A stays pinned, B is driven toward rule_2(A neighborhood)
//   sub-step 2: both relax
//   sub-step 3: B stays pinned, A is driven toward rule_4(B neighborhood)
// Potentials switch instantaneously at integer times. Integration is explicit
// first-order Euler-Maruyama with friction -gamma p and kicks of variance
// 2 gamma m T dt.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "toomdtc/ca_rule.hpp"
#include "toomdtc/pca.hpp"
#include "toomdtc/rng.hpp"
#include "toomdtc/spin_config.hpp"

namespace toomdtc {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kFloquetPeriod = 4.0;
inline constexpr int kSubSteps = 4;

inline double encode_q(Spin s) { return static_cast<double>(s); }

/// Nearest code point; the tie at q = 0 goes to +1.
inline Spin decode_s(double q) {
  if (!std::isfinite(q)) throw std::domain_error("decode_s: non-finite position");
  return q >= 0.0 ? Spin{+1} : Spin{-1};
}

struct FloquetParams {
  double v = 50.0;         // v_pin = v, v_I = v / 4
  double F = 1e-4;         // symmetry-breaking field inside V_pin
  double T = 0.0;          // bath temperature
  double kappa_f = 1.0;    // damping ratio relative to the critical values
  double dt = 1e-3;
  double mass = 0.5;
  std::string step2_rule = "TOOM";
  std::string step4_rule = "PI_TOOM";
  double divergence_guard = 1e6;
  double ramp_time = 0.0;  // 0: instantaneous pinning switch-on

  double v_pin() const noexcept { return v; }
  double v_interaction() const noexcept { return v / 4.0; }
  double gamma_interaction() const noexcept { return kappa_f * 2.0 * std::sqrt(v_interaction()); }
  double gamma_relax() const noexcept { return kappa_f * 4.0 * std::sqrt(2.0 * v_pin()); }

  int steps_per_unit() const {
    const double n = std::round(1.0 / dt);
    if (!(dt > 0.0) || n < 1.0 || std::abs(n * dt - 1.0) > 1e-9)
      throw std::invalid_argument("FloquetParams: dt must divide 1 exactly");
    return static_cast<int>(n);
  }

  void validate() const {
    if (!(v > 0.0)) throw std::invalid_argument("FloquetParams: v must be positive");
    if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("FloquetParams: T must be non-negative");
    if (!(kappa_f > 0.0)) throw std::invalid_argument("FloquetParams: kappa_f must be positive");
    if (!(mass > 0.0)) throw std::invalid_argument("FloquetParams: mass must be positive");
    if (!std::isfinite(F)) throw std::invalid_argument("FloquetParams: F must be finite");
    if (!(divergence_guard > 0.0)) throw std::invalid_argument("FloquetParams: divergence_guard must be positive");
    if (!(ramp_time >= 0.0 && ramp_time <= 1.0)) throw std::invalid_argument("FloquetParams: ramp_time in [0,1]");
    if (!rules::is_known(step2_rule)) throw std::invalid_argument("FloquetParams: unknown step2_rule " + step2_rule);
    if (!rules::is_known(step4_rule)) throw std::invalid_argument("FloquetParams: unknown step4_rule " + step4_rule);
    (void)steps_per_unit();
  }

  friend bool operator==(const FloquetParams&, const FloquetParams&) = default;
};

struct EnergyForce {
  double energy;
  double force;
};

/// V_pin(q) = v_pin (q^2 - 1)^2 + F q and its force -dV/dq.
inline EnergyForce pin_potential(double q, double v_pin, double field) noexcept {
  const double w = q * q - 1.0;
  return {v_pin * w * w + field * q, -4.0 * v_pin * q * w - field};
}

inline EnergyForce pin_potential(double q, const FloquetParams& params) noexcept {
  return pin_potential(q, params.v_pin(), params.F);
}

/// Multilinear extension of a binary rule over [-1, 1]^k, written in the
/// Walsh basis: f(x) = sum_S c_S prod_{i in S} x_i. Coordinates are clamped to
/// [-1, 1] first; the gradient along a clamped-away coordinate is zero.
class SmoothedRule {
 public:
  static constexpr std::size_t kMaxArity = 8;

  explicit SmoothedRule(const CARule& rule) : arity_(rule.arity()) {
    if (!rule.is_binary()) throw std::invalid_argument("SmoothedRule: binary rule required");
    if (arity_ > kMaxArity) throw std::invalid_argument("SmoothedRule: neighborhood too large");
    const unsigned corners = 1u << arity_;
    for (unsigned mask = 0; mask < corners; ++mask) {
      double c = 0.0;
      for (unsigned corner = 0; corner < corners; ++corner) {
        double term = encode_q(rule.by_index(corner));
        for (std::size_t i = 0; i < arity_; ++i)
          if (mask & (1u << i)) term *= (corner & (1u << i)) ? 1.0 : -1.0;
        c += term;
      }
      c /= static_cast<double>(corners);
      if (mask < dense_.size()) dense_[mask] = c;
      if (std::abs(c) < 1e-15) continue;
      Term t{c, 0, {}};
      for (std::size_t i = 0; i < arity_; ++i)
        if (mask & (1u << i)) t.vars[t.count++] = static_cast<std::uint8_t>(i);
      terms_.push_back(t);
    }
  }

  std::size_t arity() const noexcept { return arity_; }

  /// Value at x; gradient written to `grad` when non-null.
  double evaluate(const double* x_raw, double* grad) const noexcept {
    if (arity_ <= 3) return evaluate_small(x_raw, grad);
    std::array<double, kMaxArity> x{};
    std::array<double, kMaxArity> live{};  // 1 inside [-1, 1], 0 where clamped
    for (std::size_t i = 0; i < arity_; ++i) {
      const double xi = x_raw[i];
      live[i] = (xi >= -1.0 && xi <= 1.0) ? 1.0 : 0.0;
      x[i] = xi < -1.0 ? -1.0 : (xi > 1.0 ? 1.0 : xi);
      if (grad) grad[i] = 0.0;
    }
    double value = 0.0;
    for (const auto& t : terms_) {
      double prod = t.coefficient;
      for (std::size_t l = 0; l < t.count; ++l) prod *= x[t.vars[l]];
      value += prod;
      if (!grad) continue;
      for (std::size_t j = 0; j < t.count; ++j) {
        double partial = t.coefficient;
        for (std::size_t l = 0; l < t.count; ++l)
          if (l != j) partial *= x[t.vars[l]];
        grad[t.vars[j]] += partial;
      }
    }
    if (grad)
      for (std::size_t i = 0; i < arity_; ++i) grad[i] *= live[i];
    return value;
  }

 private:
  // Arity <= 3: dense Walsh coefficients, absent coordinates read as 0.
  static double clamp_unit(double v, double& live) noexcept {
    live = (v >= -1.0 && v <= 1.0) ? 1.0 : 0.0;
    return std::min(1.0, std::max(-1.0, v));
  }

  double evaluate_small(const double* x_raw, double* grad) const noexcept {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0;
    const double x0 = clamp_unit(x_raw[0], l0);
    const double x1 = arity_ > 1 ? clamp_unit(x_raw[1], l1) : 0.0;
    const double x2 = arity_ > 2 ? clamp_unit(x_raw[2], l2) : 0.0;
    const auto& c = dense_;
    const double x01 = x0 * x1, x02 = x0 * x2, x12 = x1 * x2;
    if (grad) {
      grad[0] = l0 * (c[1] + c[3] * x1 + c[5] * x2 + c[7] * x12);
      if (arity_ > 1) grad[1] = l1 * (c[2] + c[3] * x0 + c[6] * x2 + c[7] * x02);
      if (arity_ > 2) grad[2] = l2 * (c[4] + c[5] * x0 + c[6] * x1 + c[7] * x01);
    }
    return c[0] + c[1] * x0 + c[2] * x1 + c[3] * x01 + c[4] * x2 + c[5] * x02 + c[6] * x12 + c[7] * x01 * x2;
  }

  struct Term {
    double coefficient;
    std::size_t count;
    std::array<std::uint8_t, kMaxArity> vars;
  };
  std::size_t arity_;
  std::vector<Term> terms_;
  std::array<double, 8> dense_{};
};

inline double interaction_target(std::span<const double> neighbor_positions, const CARule& rule) {
  if (neighbor_positions.size() != rule.arity())
    throw std::invalid_argument("interaction_target: one position per neighbor required");
  return SmoothedRule(rule).evaluate(neighbor_positions.data(), nullptr);
}

struct InteractionEnergy {
  double energy = 0.0;
  double force_on_driven = 0.0;
  std::vector<double> forces_on_neighbors;
};

/// V_I = (v_I / 2) (target(neighbors) - q_driven)^2 with exact gradients.
inline InteractionEnergy interaction_potential(double q_driven, std::span<const double> neighbor_q,
                                               double v_interaction, const CARule& rule) {
  if (neighbor_q.size() != rule.arity())
    throw std::invalid_argument("interaction_potential: one position per neighbor required");
  SmoothedRule smooth(rule);
  std::vector<double> grad(rule.arity());
  const double target = smooth.evaluate(neighbor_q.data(), grad.data());
  const double r = target - q_driven;
  InteractionEnergy out;
  out.energy = 0.5 * v_interaction * r * r;
  out.force_on_driven = v_interaction * r;
  out.forces_on_neighbors.resize(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) out.forces_on_neighbors[i] = -v_interaction * r * grad[i];
  return out;
}

inline InteractionEnergy interaction_potential(double q_driven, std::span<const double> neighbor_q,
                                               const FloquetParams& params, const CARule& rule) {
  return interaction_potential(q_driven, neighbor_q, params.v_interaction(), rule);
}

/// Positions and momenta of both sublattices, row-major like SpinConfig.
struct OscillatorLattice {
  int width = 0;
  int height = 0;
  double mass = 0.5;
  std::vector<double> qA, pA, qB, pB;

  OscillatorLattice() = default;
  OscillatorLattice(int w, int h, double m = 0.5)
      : width(w), height(h), mass(m), qA(std::size_t(w) * h), pA(std::size_t(w) * h), qB(std::size_t(w) * h),
        pB(std::size_t(w) * h) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("OscillatorLattice: dimensions must be positive");
    if (!(m > 0.0)) throw std::invalid_argument("OscillatorLattice: mass must be positive");
  }

  /// (q, p) = (Q(eta), 0) on both sublattices.
  static OscillatorLattice from_config(const SpinConfig& c, double mass = 0.5) {
    if (!c.is_binary()) throw std::invalid_argument("OscillatorLattice: binary configuration required");
    OscillatorLattice lat(c.width(), c.height(), mass);
    for (std::size_t i = 0; i < c.size(); ++i) lat.qA[i] = lat.qB[i] = encode_q(c.cells()[i]);
    return lat;
  }

  std::size_t sites() const noexcept { return qA.size(); }

  SpinConfig decode_a() const { return decode(qA); }
  SpinConfig decode_b() const { return decode(qB); }

  friend bool operator==(const OscillatorLattice&, const OscillatorLattice&) = default;

 private:
  SpinConfig decode(const std::vector<double>& q) const {
    SpinConfig c(width, height);
    for (std::size_t i = 0; i < q.size(); ++i) c.cells()[i] = decode_s(q[i]);
    return c;
  }
};

struct SublatticeForces {
  std::vector<double> A, B;
};

struct Friction {
  double A = 0.0;
  double B = 0.0;
};

/// One Euler-Maruyama step for every oscillator. `potential` fills forces from
/// the current state; all forces read the pre-step state. Kick i for site s
/// uses the normal pair at index s of the stream keyed by `noise_key`
/// (first -> A, second -> B).
template <class Potential>
void langevin_step(OscillatorLattice& lat, Potential&& potential, Friction gamma, double T, double dt,
                   std::uint64_t noise_key, double guard, SublatticeForces& scratch) {
  if (!(dt > 0.0)) throw std::invalid_argument("langevin_step: dt must be positive");
  const std::size_t n = lat.sites();
  scratch.A.assign(n, 0.0);
  scratch.B.assign(n, 0.0);
  potential(static_cast<const OscillatorLattice&>(lat), scratch);
  const double inv_m = 1.0 / lat.mass;
  const double sigma_a = std::sqrt(2.0 * gamma.A * lat.mass * T * dt);
  const double sigma_b = std::sqrt(2.0 * gamma.B * lat.mass * T * dt);
  const bool noisy = T > 0.0 && (sigma_a > 0.0 || sigma_b > 0.0);
  bool blown = false;
  for (std::size_t s = 0; s < n; ++s) {
    const double pa = lat.pA[s];
    const double pb = lat.pB[s];
    lat.qA[s] += pa * inv_m * dt;
    lat.qB[s] += pb * inv_m * dt;
    double na = pa + (scratch.A[s] - gamma.A * pa) * dt;
    double nb = pb + (scratch.B[s] - gamma.B * pb) * dt;
    if (noisy) {
      const auto xi = normal_pair_at(noise_key, s);
      na += sigma_a * xi.first;
      nb += sigma_b * xi.second;
    }
    lat.pA[s] = na;
    lat.pB[s] = nb;
    blown |= !(std::abs(lat.qA[s]) <= guard && std::abs(lat.qB[s]) <= guard && std::abs(na) <= guard &&
               std::abs(nb) <= guard);
  }
  if (blown) throw DivergenceError("langevin_step: oscillator left the divergence guard");
}

template <class Potential>
void langevin_step(OscillatorLattice& lat, Potential&& potential, Friction gamma, double T, double dt,
                   std::uint64_t noise_key, double guard = 1e6) {
  SublatticeForces scratch;
  langevin_step(lat, std::forward<Potential>(potential), gamma, T, dt, noise_key, guard, scratch);
}

/// Decoded state of both sublattices at the end of a relaxation sub-step.
struct Read {
  int cycle = 0;
  int sub_step = 0;  // -1 marks the initial decode at t = 0
  double time = 0.0;
  double m_a = 0.0;
  double m_b = 0.0;
  std::optional<SpinConfig> a;
  std::optional<SpinConfig> b;
};

struct Snapshot {
  double time = 0.0;
  OscillatorLattice lattice;
};

struct LangevinTrajectory {
  std::vector<Snapshot> snapshots;
  std::vector<Read> reads;
  int cycles = 0;
  bool closing_relaxation = false;
};

struct FloquetRunOptions {
  bool store_configs = true;
  /// Append one relaxation sub-step after the last cycle so the final
  /// A update also gets a post-relaxation read.
  bool closing_relaxation = true;
  std::vector<double> strobe_times;
  /// Called every `observe_every` integrator steps (and at t = 0).
  std::function<void(double, const OscillatorLattice&)> observer;
  int observe_every = 0;
};

/// Integrates the Floquet schedule on a periodic lattice.
class FloquetEngine {
 public:
  FloquetEngine(FloquetParams params, int width, int height)
      : params_(std::move(params)), width_(width), height_(height),
        rule2_(rules::by_name(params_.step2_rule)), rule4_(rules::by_name(params_.step4_rule)),
        smooth2_(rule2_), smooth4_(rule4_) {
    params_.validate();
    spu_ = params_.steps_per_unit();
    if (width <= 0 || height <= 0) throw std::invalid_argument("FloquetEngine: dimensions must be positive");
    neighbors2_ = neighbor_table(rule2_);
    neighbors4_ = neighbor_table(rule4_);
  }

  const FloquetParams& params() const noexcept { return params_; }
  int steps_per_unit() const noexcept { return spu_; }
  const CARule& rule2() const noexcept { return rule2_; }
  const CARule& rule4() const noexcept { return rule4_; }

  Friction friction(int sub_step) const noexcept {
    const double gr = params_.gamma_relax();
    const double gi = params_.gamma_interaction();
    switch (sub_step) {
      case 1: return {gr, gi};
      case 3: return {gi, gr};
      default: return {gr, gr};
    }
  }

  /// Forces of the sub-step potential; `elapsed` is the time since the sub-step began.
  void forces(const OscillatorLattice& lat, int sub_step, double elapsed, SublatticeForces& f) const {
    const double vp = params_.v_pin();
    const double field = params_.F;
    const std::size_t n = lat.sites();
    double ramp_a = 1.0, ramp_b = 1.0;
    if (params_.ramp_time > 0.0 && elapsed < params_.ramp_time) {
      const double r = elapsed / params_.ramp_time;
      if (sub_step == 0) ramp_a = r;
      if (sub_step == 2) ramp_b = r;
    }
    switch (sub_step) {
      case 0:
      case 2:
        for (std::size_t s = 0; s < n; ++s) {
          f.A[s] += ramp_a * pin_potential(lat.qA[s], vp, field).force;
          f.B[s] += ramp_b * pin_potential(lat.qB[s], vp, field).force;
        }
        break;
      case 1:
        for (std::size_t s = 0; s < n; ++s) f.A[s] += pin_potential(lat.qA[s], vp, field).force;
        drive(lat.qA, lat.qB, f.A, f.B, smooth2_, neighbors2_);
        break;
      case 3:
        for (std::size_t s = 0; s < n; ++s) f.B[s] += pin_potential(lat.qB[s], vp, field).force;
        drive(lat.qB, lat.qA, f.B, f.A, smooth4_, neighbors4_);
        break;
      default:
        throw std::invalid_argument("FloquetEngine: sub-step out of range");
    }
  }

  /// Integrates one unit-length sub-step of cycle `cycle`.
  void run_substep(OscillatorLattice& lat, int cycle, int sub_step, std::uint64_t trajectory_key,
                   const FloquetRunOptions* options = nullptr, LangevinTrajectory* traj = nullptr) {
    check_lattice(lat);
    const Friction gamma = friction(sub_step);
    const double t0 = static_cast<double>(cycle) * kFloquetPeriod + sub_step;
    const std::uint64_t base = (static_cast<std::uint64_t>(cycle) * kSubSteps + sub_step) * spu_;
    for (int n = 0; n < spu_; ++n) {
      const double elapsed = static_cast<double>(n) * params_.dt;
      const std::uint64_t noise_key = combine_key(trajectory_key, base + n);
      langevin_step(
          lat, [&](const OscillatorLattice& l, SublatticeForces& f) { forces(l, sub_step, elapsed, f); }, gamma,
          params_.T, params_.dt, noise_key, params_.divergence_guard, scratch_);
      if (options) after_step(lat, t0 + static_cast<double>(n + 1) * params_.dt, *options, traj);
    }
  }

  /// One Floquet period. Returns the reads taken at the end of sub-steps 0 and 2.
  std::vector<Read> run_cycle(OscillatorLattice& lat, int cycle, std::uint64_t trajectory_key,
                              const FloquetRunOptions* options = nullptr, LangevinTrajectory* traj = nullptr) {
    std::vector<Read> reads;
    const bool store = options ? options->store_configs : true;
    for (int k = 0; k < kSubSteps; ++k) {
      run_substep(lat, cycle, k, trajectory_key, options, traj);
      if (k == 0 || k == 2) reads.push_back(make_read(lat, cycle, k, cycle * kFloquetPeriod + k + 1.0, store));
    }
    return reads;
  }

  /// Observer call and strobes due at t = 0.
  void start_run(const OscillatorLattice& lat, const FloquetRunOptions& options, LangevinTrajectory& traj) {
    steps_taken_ = 0;
    next_strobe_ = 0;
    if (options.observer) options.observer(0.0, lat);
    while (next_strobe_ < options.strobe_times.size() && options.strobe_times[next_strobe_] <= 0.0) {
      traj.snapshots.push_back({0.0, lat});
      ++next_strobe_;
    }
  }

  static Read make_read(const OscillatorLattice& lat, int cycle, int sub_step, double time, bool store) {
    Read r;
    r.cycle = cycle;
    r.sub_step = sub_step;
    r.time = time;
    SpinConfig a = lat.decode_a();
    SpinConfig b = lat.decode_b();
    r.m_a = magnetization(a);
    r.m_b = magnetization(b);
    if (store) {
      r.a = std::move(a);
      r.b = std::move(b);
    }
    return r;
  }

 private:
  // table[s * arity + i]: site index of neighbor i of site s
  std::vector<std::uint32_t> neighbor_table(const CARule& rule) const {
    const std::size_t k = rule.arity();
    std::vector<std::uint32_t> table(std::size_t(width_) * height_ * k);
    for (std::size_t i = 0; i < rule.arity(); ++i) {
      const auto o = rule.neighborhood()[i];
      for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x) {
          const int nx = ((x + o.dx) % width_ + width_) % width_;
          const int ny = ((y + o.dy) % height_ + height_) % height_;
          table[(std::size_t(y) * width_ + x) * k + i] = static_cast<std::uint32_t>(ny * width_ + nx);
        }
    }
    return table;
  }

  // Drive `moving` toward the smoothed rule of `memory`; accumulate both forces.
  void drive(const std::vector<double>& memory, const std::vector<double>& moving, std::vector<double>& f_memory,
             std::vector<double>& f_moving, const SmoothedRule& smooth,
             const std::vector<std::uint32_t>& nbrs) const {
    const double vi = params_.v_interaction();
    const std::size_t k = smooth.arity();
    std::array<double, SmoothedRule::kMaxArity> x{}, grad{};
    for (std::size_t s = 0; s < moving.size(); ++s) {
      const std::uint32_t* nb = &nbrs[s * k];
      for (std::size_t i = 0; i < k; ++i) x[i] = memory[nb[i]];
      const double target = smooth.evaluate(x.data(), grad.data());
      const double r = target - moving[s];
      f_moving[s] += vi * r;
      for (std::size_t i = 0; i < k; ++i) f_memory[nb[i]] -= vi * r * grad[i];
    }
  }

  void check_lattice(const OscillatorLattice& lat) const {
    if (lat.width != width_ || lat.height != height_)
      throw std::invalid_argument("FloquetEngine: lattice dimensions differ from engine");
  }

  void after_step(const OscillatorLattice& lat, double t, const FloquetRunOptions& options,
                  LangevinTrajectory* traj) {
    ++steps_taken_;
    if (options.observer && options.observe_every > 0 && steps_taken_ % options.observe_every == 0)
      options.observer(t, lat);
    if (traj) {
      while (next_strobe_ < options.strobe_times.size() &&
             options.strobe_times[next_strobe_] <= t + 0.5 * params_.dt) {
        traj->snapshots.push_back({t, lat});
        ++next_strobe_;
      }
    }
  }

  FloquetParams params_;
  int width_;
  int height_;
  CARule rule2_;
  CARule rule4_;
  SmoothedRule smooth2_;
  SmoothedRule smooth4_;
  std::vector<std::uint32_t> neighbors2_;
  std::vector<std::uint32_t> neighbors4_;
  int spu_ = 0;
  SublatticeForces scratch_;
  std::uint64_t steps_taken_ = 0;
  std::size_t next_strobe_ = 0;
};

struct CycleResult {
  OscillatorLattice lattice;
  std::vector<Read> reads;
};

/// One Floquet period starting at cycle index `cycle`. Draws the trajectory key from `rng`.
inline CycleResult run_floquet_cycle(OscillatorLattice lattice, const FloquetParams& params, Stream& rng,
                                     int cycle = 0) {
  FloquetEngine engine(params, lattice.width, lattice.height);
  const std::uint64_t key = rng();
  auto reads = engine.run_cycle(lattice, cycle, key);
  return {std::move(lattice), std::move(reads)};
}

/// Initializes (q, p) = (Q(eta), 0) and runs `cycles` periods.
inline LangevinTrajectory run_floquet(const SpinConfig& initial, const FloquetParams& params, int cycles, Stream& rng,
                                      const FloquetRunOptions& options = {}) {
  if (cycles < 0) throw std::invalid_argument("run_floquet: negative cycle count");
  if (initial.boundary() != Boundary::periodic)
    throw std::invalid_argument("run_floquet: the oscillator lattice is periodic");
  FloquetEngine engine(params, initial.width(), initial.height());
  OscillatorLattice lat = OscillatorLattice::from_config(initial, params.mass);
  const std::uint64_t key = rng();
  LangevinTrajectory traj;
  traj.cycles = cycles;
  engine.start_run(lat, options, traj);
  traj.reads.push_back(FloquetEngine::make_read(lat, 0, -1, 0.0, options.store_configs));
  for (int c = 0; c < cycles; ++c) {
    auto reads = engine.run_cycle(lat, c, key, &options, &traj);
    for (auto& r : reads) traj.reads.push_back(std::move(r));
  }
  if (cycles > 0 && options.closing_relaxation) {
    engine.run_substep(lat, cycles, 0, key, &options, &traj);
    traj.reads.push_back(FloquetEngine::make_read(lat, cycles, 0, cycles * kFloquetPeriod + 1.0, options.store_configs));
    traj.closing_relaxation = true;
  }
  return traj;
}

// ---- outputs ----

/// Strobe CSV: cycle, sub_step, time, M_A, M_B.
inline void write_strobe_csv(std::ostream& os, const LangevinTrajectory& traj) {
  os << "cycle,sub_step,time,M_A,M_B\n";
  const auto old = os.precision(17);
  for (const auto& r : traj.reads) os << r.cycle << ',' << r.sub_step << ',' << r.time << ',' << r.m_a << ',' << r.m_b << '\n';
  os.precision(old);
}

namespace detail {
inline void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  os.write(b.data(), 8);
}
inline double get_f64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw std::runtime_error("read_lattice: truncated data");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{b[i]} << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}
}  // namespace detail

/// Full-lattice dump: "OSC1", width, height (u32 LE), then qA, pA, qB, pB as f64 LE.
inline void write_lattice(std::ostream& os, const OscillatorLattice& lat) {
  os.write("OSC1", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(lat.width));
  detail::put_u32(os, static_cast<std::uint32_t>(lat.height));
  for (const auto* grid : {&lat.qA, &lat.pA, &lat.qB, &lat.pB})
    for (double v : *grid) detail::put_f64(os, v);
}

inline OscillatorLattice read_lattice(std::istream& is, double mass = 0.5) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::string(magic.data(), 4) != "OSC1")
    throw std::runtime_error("read_lattice: bad magic");
  const auto w = detail::get_u32(is);
  const auto h = detail::get_u32(is);
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) throw std::runtime_error("read_lattice: bad dimensions");
  OscillatorLattice lat(static_cast<int>(w), static_cast<int>(h), mass);
  for (auto* grid : {&lat.qA, &lat.pA, &lat.qB, &lat.pB})
    for (double& v : *grid) v = detail::get_f64(is);
  return lat;
}

}  // namespace toomdtc
