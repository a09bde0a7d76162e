#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <sstream>
#include <vector>

#include "toomdtc/langevin.hpp"
#include "toomdtc/pca.hpp"

using namespace toomdtc;

namespace {

// Multilinear interpolation written as a sum over corners weighted by prod (1 + s_i x_i) / 2.
double corner_sum(const CARule& rule, const std::vector<double>& x) {
  const std::size_t k = rule.arity();
  double total = 0.0;
  for (unsigned corner = 0; corner < (1u << k); ++corner) {
    std::vector<Spin> tuple(k);
    double w = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      const Spin s = (corner >> i) & 1u ? Spin{+1} : Spin{-1};
      tuple[i] = s;
      const double xi = std::clamp(x[i], -1.0, 1.0);
      w *= 0.5 * (1.0 + s * xi);
    }
    total += w * static_cast<double>(rule(tuple));
  }
  return total;
}

SpinConfig random_config(int w, int h, Stream& s) {
  SpinConfig c(w, h);
  for (auto& cell : c.cells()) cell = (s() & 1) ? Spin{+1} : Spin{-1};
  return c;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); }

FloquetRunOptions reads_only() {
  FloquetRunOptions o;
  o.store_configs = true;
  return o;
}

}  // namespace

TEST(Encoding, RoundTripAndTie) {
  EXPECT_EQ(encode_q(+1), 1.0);
  EXPECT_EQ(encode_q(-1), -1.0);
  EXPECT_EQ(decode_s(0.3), +1);
  EXPECT_EQ(decode_s(-0.01), -1);
  EXPECT_EQ(decode_s(0.0), +1);
  EXPECT_EQ(decode_s(-0.0), +1);
  for (Spin s : {Spin{-1}, Spin{+1}}) EXPECT_EQ(decode_s(encode_q(s)), s);
  EXPECT_THROW(decode_s(std::nan("")), std::domain_error);
}

TEST(PinPotential, Values) {
  EXPECT_DOUBLE_EQ(pin_potential(1.0, 50.0, 0.0).energy, 0.0);
  EXPECT_DOUBLE_EQ(pin_potential(-1.0, 50.0, 0.0).energy, 0.0);
  EXPECT_DOUBLE_EQ(pin_potential(0.0, 50.0, 0.0).energy, 50.0);
  EXPECT_DOUBLE_EQ(pin_potential(1.0, 50.0, 1e-4).energy, 1e-4);
  EXPECT_DOUBLE_EQ(pin_potential(-1.0, 50.0, 1e-4).energy, -1e-4);
  EXPECT_DOUBLE_EQ(pin_potential(1.0, 50.0, 0.0).force, 0.0);
}

TEST(PinPotential, ForceMatchesFiniteDifference) {
  Stream s(1);
  for (int i = 0; i < 100; ++i) {
    const double q = -1.8 + 3.6 * s.uniform();
    const double h = 1e-6;
    const double fd = -(pin_potential(q + h, 73.0, 0.3).energy - pin_potential(q - h, 73.0, 0.3).energy) / (2 * h);
    EXPECT_LT(rel_diff(pin_potential(q, 73.0, 0.3).force, fd), 1e-5) << q;
  }
}

TEST(InteractionTarget, CornerValues) {
  const std::vector<double> up{1, 1, 1};
  EXPECT_DOUBLE_EQ(interaction_target(up, rules::toom()), 1.0);
  EXPECT_DOUBLE_EQ(interaction_target(up, rules::pi_toom()), -1.0);
  for (const auto& rule : {rules::toom(), rules::pi_toom(), rules::flip(), rules::do_nothing()})
    for (unsigned c = 0; c < (1u << rule.arity()); ++c) {
      std::vector<double> x(rule.arity());
      std::vector<Spin> t(rule.arity());
      for (std::size_t i = 0; i < x.size(); ++i) {
        t[i] = (c >> i) & 1u ? Spin{+1} : Spin{-1};
        x[i] = t[i];
      }
      EXPECT_EQ(interaction_target(x, rule), static_cast<double>(rule(t)));
    }
}

TEST(InteractionTarget, HalfwayPointFrozen) {
  // votes (+, +, 0): both completions have a + majority
  const std::vector<double> x{1, 1, 0};
  EXPECT_DOUBLE_EQ(corner_sum(rules::toom(), x), 1.0);
  EXPECT_DOUBLE_EQ(interaction_target(x, rules::toom()), 1.0);
  const std::vector<double> y{1, -1, 0};
  EXPECT_DOUBLE_EQ(interaction_target(y, rules::toom()), 0.0);
}

TEST(InteractionTarget, MatchesCornerSumEverywhere) {
  Stream s(2);
  for (const auto& rule : {rules::toom(), rules::pi_toom()})
    for (int i = 0; i < 200; ++i) {
      std::vector<double> x(3);
      for (auto& v : x) v = -1.5 + 3.0 * s.uniform();
      EXPECT_NEAR(interaction_target(x, rule), corner_sum(rule, x), 1e-14);
    }
  EXPECT_THROW(interaction_target(std::vector<double>{1, 1}, rules::toom()), std::invalid_argument);
}

TEST(InteractionPotential, Values) {
  const std::vector<double> up{1, 1, 1};
  const auto e = interaction_potential(0.0, up, 12.5, rules::toom());
  EXPECT_DOUBLE_EQ(e.energy, 6.25);
  EXPECT_DOUBLE_EQ(e.force_on_driven, 12.5);
  const auto z = interaction_potential(1.0, up, 12.5, rules::toom());
  EXPECT_EQ(z.energy, 0.0);
  EXPECT_EQ(z.force_on_driven, 0.0);
  for (double f : z.forces_on_neighbors) EXPECT_EQ(f, 0.0);
  FloquetParams p;
  p.v = 50.0;
  EXPECT_DOUBLE_EQ(interaction_potential(0.0, up, p, rules::toom()).energy, 6.25);
}

TEST(InteractionPotential, ForcesMatchFiniteDifferences) {
  Stream s(3);
  const double vi = 12.5, h = 1e-6;
  for (const auto& rule : {rules::toom(), rules::pi_toom()})
    for (int i = 0; i < 100; ++i) {
      std::vector<double> x(3);
      for (auto& v : x) v = -0.95 + 1.9 * s.uniform();
      const double qb = -1.5 + 3.0 * s.uniform();
      const auto e = interaction_potential(qb, x, vi, rule);
      const double fd_b =
          -(interaction_potential(qb + h, x, vi, rule).energy - interaction_potential(qb - h, x, vi, rule).energy) /
          (2 * h);
      EXPECT_LT(rel_diff(e.force_on_driven, fd_b), 1e-5);
      for (std::size_t j = 0; j < 3; ++j) {
        auto xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const double fd =
            -(interaction_potential(qb, xp, vi, rule).energy - interaction_potential(qb, xm, vi, rule).energy) / (2 * h);
        EXPECT_LT(rel_diff(e.forces_on_neighbors[j], fd), 1e-5);
      }
    }
}

TEST(InteractionPotential, ClampedNeighboursFeelNoForce) {
  const std::vector<double> x{1.3, -0.2, 0.4};
  const auto e = interaction_potential(0.1, x, 12.5, rules::toom());
  EXPECT_EQ(e.forces_on_neighbors[0], 0.0);
}

TEST(LangevinStep, FreeStreaming) {
  OscillatorLattice lat(1, 1, 0.5);
  lat.pA[0] = 1.0;
  lat.pB[0] = 1.0;
  langevin_step(lat, [](const OscillatorLattice&, SublatticeForces&) {}, Friction{0, 0}, 0.0, 1e-3, 0);
  EXPECT_DOUBLE_EQ(lat.qA[0], 2e-3);
  EXPECT_DOUBLE_EQ(lat.qB[0], 2e-3);
  EXPECT_EQ(lat.pA[0], 1.0);
  EXPECT_THROW(langevin_step(lat, [](const OscillatorLattice&, SublatticeForces&) {}, Friction{}, 0.0, 0.0, 0),
               std::invalid_argument);
}

TEST(LangevinStep, CriticallyDampedWell) {
  // unit mass, k = v_I = 25, gamma = 2 sqrt(k)
  const double k = 25.0, dt = 1e-4;
  OscillatorLattice lat(1, 1, 1.0);
  lat.qA[0] = lat.qB[0] = 1.0;
  auto well = [k](const OscillatorLattice& l, SublatticeForces& f) {
    f.A[0] = -k * l.qA[0];
    f.B[0] = -k * l.qB[0];
  };
  for (int n = 0; n < 10'000; ++n) langevin_step(lat, well, Friction{10.0, 10.0}, 0.0, dt, 0);
  const double exact = 6.0 * std::exp(-5.0);
  EXPECT_NEAR(exact, 0.0404, 1e-4);
  EXPECT_NEAR(lat.qA[0], exact, 1e-3);
  EXPECT_NEAR(lat.qB[0], exact, 1e-3);
}

TEST(LangevinStep, DivergenceGuard) {
  OscillatorLattice lat(1, 1);
  lat.pA[0] = 10.0;
  EXPECT_THROW(langevin_step(lat, [](const OscillatorLattice&, SublatticeForces&) {}, Friction{}, 0.0, 1e-3, 0, 5.0),
               DivergenceError);
}

namespace {

struct Moments {
  double p2 = 0.0, dq2 = 0.0;
};

template <class Force>
Moments equilibrate(double gamma, double T, double q0, Force force, int burn, int steps, std::uint64_t seed) {
  OscillatorLattice lat(8, 8, 0.5);
  std::fill(lat.qA.begin(), lat.qA.end(), q0);
  std::fill(lat.qB.begin(), lat.qB.end(), q0);
  auto pot = [&](const OscillatorLattice& l, SublatticeForces& f) {
    for (std::size_t s = 0; s < l.sites(); ++s) {
      f.A[s] = force(l.qA[s]);
      f.B[s] = force(l.qB[s]);
    }
  };
  SublatticeForces scratch;
  Moments m;
  double n = 0;
  for (int t = 0; t < burn + steps; ++t) {
    langevin_step(lat, pot, Friction{gamma, gamma}, T, 1e-4, combine_key(seed, t), 1e6, scratch);
    if (t < burn) continue;
    for (std::size_t s = 0; s < lat.sites(); ++s) {
      m.p2 += lat.pA[s] * lat.pA[s] + lat.pB[s] * lat.pB[s];
      m.dq2 += (lat.qA[s] - q0) * (lat.qA[s] - q0) + (lat.qB[s] - q0) * (lat.qB[s] - q0);
      n += 2;
    }
  }
  m.p2 /= n;
  m.dq2 /= n;
  return m;
}

}  // namespace

TEST(LangevinStep, EquilibriumInPinningWell) {
  // v_pin = 50, T = 2: <p^2> = m T, <(q - 1)^2> ~ T / V''(1) = T / (8 v_pin)
  const double v = 50.0, T = 2.0;
  const auto m = equilibrate(
      4.0 * std::sqrt(2.0 * v), T, 1.0, [v](double q) { return pin_potential(q, v, 0.0).force; }, 5'000, 80'000, 11);
  EXPECT_NEAR(m.p2, 0.5 * T, 0.05 * 0.5 * T);
  EXPECT_NEAR(m.dq2, T / (8 * v), 0.05 * T / (8 * v));
}

TEST(LangevinStep, FluctuationDissipationInQuadraticWells) {
  struct Case {
    double k, gamma, T;
  };
  for (const auto& c : {Case{400.0, 20.0, 2.0}, Case{100.0, 60.0, 0.5}}) {
    const auto m = equilibrate(
        c.gamma, c.T, 0.0, [k = c.k](double q) { return -k * q; }, 5'000, 80'000, 12);
    EXPECT_NEAR(m.p2, 0.5 * c.T, 0.05 * 0.5 * c.T) << c.k;
    EXPECT_NEAR(m.dq2, c.T / c.k, 0.05 * c.T / c.k) << c.k;
  }
}

TEST(LangevinStep, SeedDeterminism) {
  auto run = [](std::uint64_t key) {
    OscillatorLattice lat(4, 4);
    for (int t = 0; t < 100; ++t)
      langevin_step(
          lat, [](const OscillatorLattice&, SublatticeForces&) {}, Friction{1, 2}, 1.0, 1e-3, combine_key(key, t));
    return lat;
  };
  EXPECT_EQ(run(5), run(5));
  EXPECT_NE(run(5), run(6));
}

TEST(FloquetParams, CriticalValues) {
  FloquetParams p;
  p.v = 100.0;
  EXPECT_DOUBLE_EQ(p.v_interaction(), 25.0);
  EXPECT_DOUBLE_EQ(p.gamma_interaction(), 10.0);
  EXPECT_DOUBLE_EQ(p.gamma_relax(), 40.0 * std::sqrt(2.0));
  p.kappa_f = 0.5;
  EXPECT_DOUBLE_EQ(p.gamma_interaction(), 5.0);
  FloquetEngine e(p, 2, 2);
  EXPECT_EQ(e.friction(1).A, p.gamma_relax());
  EXPECT_EQ(e.friction(1).B, p.gamma_interaction());
  EXPECT_EQ(e.friction(3).A, p.gamma_interaction());
  EXPECT_EQ(e.friction(2).B, p.gamma_relax());
}

TEST(FloquetParams, Validation) {
  FloquetParams p;
  p.dt = 0.3;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.T = -1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.step2_rule = "MAJORITY";
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.steps_per_unit(), 1000);
}

TEST(RunFloquet, ZeroCycles) {
  Stream s(4);
  const auto t = run_floquet(SpinConfig(4, 4), FloquetParams{}, 0, s);
  ASSERT_EQ(t.reads.size(), 1u);
  EXPECT_EQ(t.reads[0].sub_step, -1);
  EXPECT_EQ(*t.reads[0].a, SpinConfig(4, 4));
  EXPECT_THROW(run_floquet(SpinConfig(4, 4), FloquetParams{}, -1, s), std::invalid_argument);
}

TEST(RunFloquet, ZeroTemperatureMatchesComposedRule) {
  Stream g(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = random_config(16, 16, g);
    Stream s(trial);
    const auto t = run_floquet(c, FloquetParams{}, 1, s, reads_only());
    ASSERT_EQ(t.reads.size(), 4u);
    const auto toom = apply_rule(c, rules::toom());
    EXPECT_EQ(*t.reads[1].a, c);  // A pinned through the first relaxation
    EXPECT_EQ(*t.reads[2].b, toom);
    EXPECT_EQ(*t.reads[3].a, apply_rule(toom, rules::pi_toom()));
  }
}

TEST(RunFloquet, ZeroTemperaturePeriodDoubling) {
  Stream s(6);
  const auto t = run_floquet(SpinConfig(6, 6, +1), FloquetParams{}, 10, s);
  double expect = 1.0;
  for (const auto& r : t.reads) {
    if (r.sub_step == 2) continue;
    if (r.sub_step == 0 && r.cycle > 0) expect = -expect;
    if (r.sub_step == 0 && r.cycle == 0) continue;
    EXPECT_EQ(r.m_a, expect) << r.cycle;
  }
  EXPECT_EQ(t.reads.back().cycle, 10);
  EXPECT_EQ(t.reads.back().m_a, 1.0);
}

TEST(RunFloquet, SingleErrorCorrectedWithinOneCycle) {
  SpinConfig c(8, 8, +1);
  c.set(3, 5, -1);
  FloquetParams p;
  p.v = 50.0;
  std::vector<double> q_a, q_b;
  FloquetRunOptions o;
  o.observe_every = 100;
  const std::size_t site = c.index(3, 5);
  o.observer = [&](double, const OscillatorLattice& l) {
    q_a.push_back(l.qA[site]);
    q_b.push_back(l.qB[site]);
  };
  Stream s(7);
  const auto t = run_floquet(c, p, 1, s, o);
  EXPECT_EQ(*t.reads[2].b, SpinConfig(8, 8, +1));
  EXPECT_EQ(*t.reads[3].a, SpinConfig(8, 8, -1));
  // during sub-step 1 (t in [1, 2]) A stays near -1 while B moves to +1
  ASSERT_GE(q_a.size(), 41u);
  for (std::size_t i = 11; i <= 20; ++i) EXPECT_LT(q_a[i], -0.9);
  EXPECT_LT(q_b[10], 0.0);
  EXPECT_GT(q_b[20], 0.9);
}

TEST(RunFloquet, LowTemperaturePlateau) {
  FloquetParams p;
  p.v = 50.0;
  p.T = 2.0;
  Stream s(8);
  FloquetRunOptions o;
  o.store_configs = false;
  const auto t = run_floquet(SpinConfig(32, 32, +1), p, 8, s, o);
  for (const auto& r : t.reads) {
    if (r.sub_step == 0) {
      EXPECT_GT(std::abs(r.m_a), 0.9);
    }
  }
}

TEST(RunFloquet, SeedDeterminism) {
  FloquetParams p;
  p.T = 5.0;
  Stream g(9);
  const auto c = random_config(6, 6, g);
  Stream a(10), b(10), d(11);
  const auto ra = run_floquet_cycle(OscillatorLattice::from_config(c), p, a);
  const auto rb = run_floquet_cycle(OscillatorLattice::from_config(c), p, b);
  const auto rd = run_floquet_cycle(OscillatorLattice::from_config(c), p, d);
  EXPECT_EQ(ra.lattice, rb.lattice);
  EXPECT_NE(ra.lattice, rd.lattice);
}

TEST(RunFloquet, FirstOrderInDt) {
  Stream g(12);
  OscillatorLattice start(4, 4);
  for (std::size_t i = 0; i < start.sites(); ++i) {
    start.qA[i] = -1.2 + 2.4 * g.uniform();
    start.qB[i] = -1.2 + 2.4 * g.uniform();
  }
  std::vector<OscillatorLattice> ends;
  for (double dt : {2e-3, 1e-3, 5e-4}) {
    FloquetParams p;
    p.dt = dt;
    FloquetEngine e(p, 4, 4);
    OscillatorLattice lat = start;
    e.run_substep(lat, 0, 1, 0);
    e.run_substep(lat, 0, 3, 0);
    ends.push_back(lat);
  }
  auto dist = [](const OscillatorLattice& x, const OscillatorLattice& y) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.sites(); ++i) d = std::max({d, std::abs(x.qA[i] - y.qA[i]), std::abs(x.qB[i] - y.qB[i])});
    return d;
  };
  const double d1 = dist(ends[0], ends[1]), d2 = dist(ends[1], ends[2]);
  ASSERT_GT(d2, 0.0);
  EXPECT_GT(d1 / d2, 1.6);
  EXPECT_LT(d1 / d2, 2.5);
}

TEST(RunFloquet, DivergenceReported) {
  FloquetParams p;
  p.divergence_guard = 0.5;
  Stream s(13);
  EXPECT_THROW(run_floquet(SpinConfig(4, 4), p, 1, s), DivergenceError);
}

TEST(LatticeIo, RoundTrip) {
  Stream g(14);
  OscillatorLattice lat(3, 5);
  for (auto* v : {&lat.qA, &lat.pA, &lat.qB, &lat.pB})
    for (double& x : *v) x = g.gaussian() * 1e3;
  lat.qA[2] = -0.0;
  lat.pB[4] = 1e-300;
  std::stringstream ss;
  write_lattice(ss, lat);
  EXPECT_EQ(ss.str().size(), 12u + 4 * 15 * 8);
  EXPECT_EQ(read_lattice(ss), lat);
  std::stringstream bad("OSC2");
  EXPECT_THROW(read_lattice(bad), std::runtime_error);
  std::string cut;
  {
    std::stringstream full;
    write_lattice(full, lat);
    cut = full.str().substr(0, 40);
  }
  std::stringstream truncated(cut);
  EXPECT_THROW(read_lattice(truncated), std::runtime_error);
}

TEST(StrobeCsv, Header) {
  Stream s(15);
  const auto t = run_floquet(SpinConfig(4, 4), FloquetParams{}, 1, s);
  std::stringstream ss;
  write_strobe_csv(ss, t);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "cycle,sub_step,time,M_A,M_B");
  int rows = 0;
  while (std::getline(ss, line)) ++rows;
  EXPECT_EQ(rows, 4);
}
