#pragma once

// Experiment scenarios: initial states, the DTC order parameter, simulation
// drivers, and the subcommand runner that writes CSV files plus a JSON manifest.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "toomdtc/ca_rule.hpp"
#include "toomdtc/config.hpp"
#include "toomdtc/error_statistics.hpp"
#include "toomdtc/errors.hpp"
#include "toomdtc/langevin.hpp"
#include "toomdtc/pca.hpp"
#include "toomdtc/rng.hpp"
#include "toomdtc/spin_config.hpp"

#ifndef TOOMDTC_GIT_REVISION
#define TOOMDTC_GIT_REVISION "unknown"
#endif

namespace toomdtc {

inline constexpr const char* kVersion = "0.1.0";

// ---- initial states ----

inline SpinConfig build_initial(const InitialSpec& spec, int width, int height) {
  SpinConfig c(width, height, +1);
  switch (spec.kind) {
    case InitialKind::uniform:
      break;
    case InitialKind::island: {
      if (spec.island_width < 1 || spec.island_height < 1 || spec.island_width > width || spec.island_height > height)
        throw std::invalid_argument("build_initial: island does not fit the lattice");
      const int x0 = (width - spec.island_width) / 2;
      const int y0 = (height - spec.island_height) / 2;
      for (int y = y0; y < y0 + spec.island_height; ++y)
        for (int x = x0; x < x0 + spec.island_width; ++x) c.set(x, y, -1);
      break;
    }
    case InitialKind::stripes: {
      if (spec.stripe_period < 1 || spec.stripe_width < 0 || spec.stripe_width > spec.stripe_period)
        throw std::invalid_argument("build_initial: stripe width must lie in [0, period]");
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
          if ((x + y) % spec.stripe_period < spec.stripe_width) c.set(x, y, -1);
      break;
    }
    case InitialKind::file: {
      std::ifstream in(spec.file);
      if (!in) throw std::invalid_argument("build_initial: cannot read " + spec.file);
      c = read_text(in);
      if (c.width() != width || c.height() != height)
        throw std::invalid_argument("build_initial: file dimensions differ from the lattice");
      break;
    }
  }
  return c;
}

/// All +1 except a single -1 at (x, y).
inline SpinConfig single_error(int width, int height, int x, int y) {
  SpinConfig c(width, height, +1);
  c.set(x, y, -1);
  return c;
}

// ---- order parameter ----

struct Plateau {
  double value = 0.0;
  double error = 0.0;
  int samples = 0;
};

/// Window mean of (-1)^c m[c] for c in [start, start + length).
inline Plateau dtc_order_parameter(std::span<const double> m_a, int start, int length) {
  if (length <= 0) throw std::invalid_argument("dtc_order_parameter: empty window");
  if (start < 0 || static_cast<std::size_t>(start) + length > m_a.size())
    throw std::invalid_argument("dtc_order_parameter: window outside the series");
  double sum = 0.0, sum2 = 0.0;
  for (int c = start; c < start + length; ++c) {
    const double s = (c % 2 == 0 ? 1.0 : -1.0) * m_a[c];
    sum += s;
    sum2 += s * s;
  }
  Plateau p;
  p.samples = length;
  p.value = sum / length;
  if (length > 1) p.error = std::sqrt(std::max(0.0, (sum2 - length * p.value * p.value) / (length - 1)) / length);
  return p;
}

/// Mean over realizations, standard error across realizations.
inline Plateau dtc_order_parameter(const std::vector<std::vector<double>>& series, int start, int length) {
  if (series.empty()) throw std::invalid_argument("dtc_order_parameter: no realizations");
  if (series.size() == 1) return dtc_order_parameter(series.front(), start, length);
  std::vector<double> means;
  for (const auto& s : series) means.push_back(dtc_order_parameter(s, start, length).value);
  double m = 0.0;
  for (double x : means) m += x;
  m /= static_cast<double>(means.size());
  double var = 0.0;
  for (double x : means) var += (x - m) * (x - m);
  var /= static_cast<double>(means.size() - 1);
  return {m, std::sqrt(var / static_cast<double>(means.size())), static_cast<int>(means.size())};
}

// ---- drivers ----

/// Runs fn(i) for i in [0, n) on up to `threads` workers. The first
/// exception is rethrown after all workers finish.
template <class F>
void parallel_for(std::size_t n, int threads, F&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!first) first = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

inline std::uint64_t bits_of(double x) noexcept {
  std::uint64_t b;
  std::memcpy(&b, &x, sizeof b);
  return b;
}

/// Stream for realization r of the grid point (v, control) of a scenario tag.
/// Labels are values, not list positions, so grid order never matters.
inline Stream point_stream(std::uint64_t seed, std::uint64_t tag, double v, double control, std::uint64_t r) {
  return Stream(derive_key(seed, {tag, bits_of(v), bits_of(control), r}));
}

inline std::vector<CARule> floquet_schedule(const FloquetParams& p) {
  return {rules::by_name(p.step2_rule), rules::by_name(p.step4_rule)};
}

inline std::vector<CARule> rule_list(const std::vector<std::string>& names) {
  std::vector<CARule> out;
  for (const auto& n : names) out.push_back(rules::by_name(n));
  return out;
}

/// M_A during cycle c, c = 0 .. cycles (read after the cycle's first relaxation).
inline std::vector<double> a_series(const LangevinTrajectory& traj) {
  std::vector<double> m;
  for (const auto& r : traj.reads)
    if (r.sub_step == 0) m.push_back(r.m_a);
  return m;
}

/// M_A at the start of each cycle of a PCA run whose cycle is `period` steps.
inline std::vector<double> a_series(const PcaTrajectory& traj, std::size_t period) {
  std::vector<double> m;
  for (std::size_t t = 0; t < traj.magnetizations.size(); t += period) m.push_back(traj.magnetizations[t]);
  return m;
}

/// Errors of the CA steps belonging to cycles [first_cycle, first_cycle + count).
inline ErrorField langevin_error_field(const LangevinTrajectory& traj, const FloquetParams& p, int first_cycle,
                                       int count) {
  const auto configs = extract_discrete(traj);
  const auto schedule = floquet_schedule(p);
  const auto field = detect_errors(configs, expand_schedule(schedule, static_cast<int>(configs.size()) - 1));
  return field.slice(2 * first_cycle, 2 * (first_cycle + count));
}

inline ErrorField pca_error_field(const PcaTrajectory& traj, std::span<const CARule> schedule, int first_cycle,
                                  int count) {
  const int k = static_cast<int>(schedule.size());
  return detect_errors(traj, schedule).slice(k * first_cycle, k * (first_cycle + count));
}

/// Error fields of `trajectories` independent runs at the config's operating
/// point, each measured over `measure` cycles after `warmup` cycles.
inline std::vector<ErrorField> simulate_error_fields(const RunConfig& cfg, int trajectories, int warmup, int measure,
                                                     std::uint64_t tag = 0x57A75) {
  std::vector<ErrorField> fields(static_cast<std::size_t>(trajectories));
  const SpinConfig init = build_initial(cfg.scenario.initial, cfg.width, cfg.height);
  if (cfg.engine == Engine::langevin) {
    const FloquetParams p = cfg.floquet;
    FloquetRunOptions opt;
    parallel_for(fields.size(), cfg.threads, [&](std::size_t r) {
      Stream s = point_stream(cfg.seed, tag, p.v, p.T, r);
      const auto traj = run_floquet(init, p, warmup + measure, s, opt);
      fields[r] = langevin_error_field(traj, p, warmup, measure);
    });
  } else {
    const auto schedule = rule_list(cfg.pca_rules);
    const auto noise = NoiseModel::biased(cfg.eps_plus, cfg.eps_minus);
    const int k = static_cast<int>(schedule.size());
    parallel_for(fields.size(), cfg.threads, [&](std::size_t r) {
      Stream s = point_stream(cfg.seed, tag, cfg.eps_plus, cfg.eps_minus, r);
      const auto traj = run_pca(init, schedule, noise, k * (warmup + measure), s);
      fields[r] = pca_error_field(traj, schedule, warmup, measure);
    });
  }
  return fields;
}

struct TracePoint {
  double time = 0.0;
  double q_a = 0.0;
  double q_b = 0.0;
};

/// Dense (q_A, q_B) time series at site (x, y), sampled every `every` integrator steps.
inline std::vector<TracePoint> correction_trace(const FloquetParams& p, const SpinConfig& initial, int x, int y,
                                                int cycles, int every, Stream& rng,
                                                LangevinTrajectory* reads_out = nullptr) {
  if (x < 0 || x >= initial.width() || y < 0 || y >= initial.height())
    throw std::invalid_argument("correction_trace: site outside the lattice");
  std::vector<TracePoint> trace;
  const std::size_t idx = initial.index(x, y);
  FloquetRunOptions opt;
  opt.observe_every = every;
  opt.observer = [&](double t, const OscillatorLattice& lat) { trace.push_back({t, lat.qA[idx], lat.qB[idx]}); };
  auto traj = run_floquet(initial, p, cycles, rng, opt);
  if (reads_out) *reads_out = std::move(traj);
  return trace;
}

/// Whether the B read at t = 3 is uniform +1 and the A read at t = 5 uniform -1,
/// i.e. the single error was removed within the first period.
inline bool corrected_in_first_period(const LangevinTrajectory& traj) {
  bool b_ok = false, a_ok = false;
  for (const auto& r : traj.reads) {
    if (r.cycle == 0 && r.sub_step == 2) b_ok = r.m_b == 1.0;
    if (r.cycle == 1 && r.sub_step == 0) a_ok = r.m_a == -1.0;
  }
  return b_ok && a_ok;
}

// ---- output helpers ----

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  CsvWriter& operator<<(double x) { return cell(format_real(x)); }
  CsvWriter& operator<<(int x) { return cell(std::to_string(x)); }
  CsvWriter& operator<<(long long x) { return cell(std::to_string(x)); }
  CsvWriter& operator<<(std::uint64_t x) { return cell(std::to_string(x)); }
  CsvWriter& operator<<(const std::string& s) { return cell(s); }
  CsvWriter& operator<<(const char* s) { return cell(s); }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& cell(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }

  std::ofstream out_;
  bool first_ = true;
};

struct GridOutcome {
  std::string label;
  bool ok = true;
  std::string error;
};

struct ScenarioResult {
  int exit_code = 0;
  std::vector<std::string> files;
  std::vector<GridOutcome> points;
  nlohmann::json summary = nlohmann::json::object();
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"pca-run", "langevin-run", "phase-scan", "error-bench",
                                                 "cumulants", "correlations", "scgf", "correct-trace"};
  return names;
}

namespace detail {

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

inline std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

struct Context {
  const RunConfig& cfg;
  std::filesystem::path dir;
  ScenarioResult& result;

  std::filesystem::path file(const std::string& name) {
    result.files.push_back(name);
    return dir / name;
  }
  template <class F>
  bool point(const std::string& label, F&& body) {
    try {
      body();
      result.points.push_back({label, true, ""});
      return true;
    } catch (const std::exception& e) {
      result.points.push_back({label, false, e.what()});
      return false;
    }
  }
};

inline std::uint64_t fnv1a(const std::string& s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ULL;
  return h;
}

// ---- subcommands ----

inline void pca_run(Context& ctx) {
  const auto& cfg = ctx.cfg;
  ctx.point("pca-run", [&] {
    const auto schedule = rule_list(cfg.pca_rules);
    const auto noise = NoiseModel::biased(cfg.eps_plus, cfg.eps_minus);
    SpinConfig init = build_initial(cfg.scenario.initial, cfg.width, cfg.height);
    if (cfg.boundary == Boundary::fixed)
      init = SpinConfig(cfg.width, cfg.height, +1, Boundary::fixed, static_cast<Spin>(cfg.boundary_value))
                 .with_cells(init.cells());
    Stream s = point_stream(cfg.seed, 0x9CA, cfg.eps_plus, cfg.eps_minus, 0);
    const int k = static_cast<int>(schedule.size());
    const int steps = cfg.scenario.cycles * k;
    const auto traj = run_pca(init, schedule, noise, steps, s);
    CsvWriter m(ctx.file("magnetization.csv"), {"step", "rule", "M"});
    for (std::size_t t = 0; t < traj.size(); ++t) {
      m << static_cast<int>(t) << (t == 0 ? std::string("initial") : schedule[(t - 1) % schedule.size()].name())
        << traj.magnetizations[t];
      m.end_row();
    }
    {
      std::ofstream bin(ctx.file("final.pca1"), std::ios::binary);
      write_binary(bin, traj.configs.back(), static_cast<std::uint32_t>(steps));
      std::ofstream txt(ctx.file("final.txt"));
      write_text(txt, traj.configs.back());
    }
    if (steps > 0) {
      const auto rate = error_rate(detect_errors(traj, schedule));
      ctx.result.summary["P_E"] = rate.value;
      ctx.result.summary["P_E_stderr"] = rate.error;
    }
    const auto& sc = cfg.scenario;
    if (sc.window_start + sc.window_cycles <= sc.cycles) {
      const auto series = a_series(traj, schedule.size());
      const auto plateau = dtc_order_parameter(series, sc.window_start, sc.window_cycles);
      ctx.result.summary["plateau"] = plateau.value;
      ctx.result.summary["plateau_stderr"] = plateau.error;
    }
  });
}

inline void langevin_run(Context& ctx) {
  const auto& cfg = ctx.cfg;
  ctx.point("langevin-run", [&] {
    const auto& p = cfg.floquet;
    const SpinConfig init = build_initial(cfg.scenario.initial, cfg.width, cfg.height);
    Stream s = point_stream(cfg.seed, 0x1A6, p.v, p.T, 0);
    FloquetRunOptions opt;
    const int cycles = cfg.scenario.cycles;
    const double t_end = cycles > 0 ? cycles * kFloquetPeriod + 1.0 : 0.0;
    opt.strobe_times = {t_end};
    const auto traj = run_floquet(init, p, cycles, s, opt);
    {
      std::ofstream os(ctx.file("strobe.csv"));
      os << "cycle,sub_step,time,M_A,M_B\n";
      for (const auto& r : traj.reads)
        os << r.cycle << ',' << r.sub_step << ',' << format_real(r.time) << ',' << format_real(r.m_a) << ','
           << format_real(r.m_b) << '\n';
    }
    if (!traj.snapshots.empty()) {
      std::ofstream bin(ctx.file("final.osc1"), std::ios::binary);
      write_lattice(bin, traj.snapshots.back().lattice);
    }
    if (cycles > 0) {
      const auto field = langevin_error_field(traj, p, 0, cycles);
      const auto rate = error_rate(field);
      CsvWriter pe(ctx.file("pe.csv"), {"rule", "v", "T", "v_over_T", "P_E", "stderr", "pe_equilibrium"});
      pe << (p.step2_rule + "/" + p.step4_rule) << p.v << p.T << (p.T > 0 ? p.v / p.T : INFINITY) << rate.value
         << rate.error << pe_equilibrium(p.v_interaction(), p.T);
      pe.end_row();
      const auto series = a_series(traj);
      const auto& sc = cfg.scenario;
      if (sc.window_start + sc.window_cycles <= cycles) {
        const auto plateau = dtc_order_parameter(series, sc.window_start, sc.window_cycles);
        ctx.result.summary["plateau"] = plateau.value;
        ctx.result.summary["plateau_stderr"] = plateau.error;
      }
    }
  });
}

struct ScanJob {
  double v = 0.0;
  double control = 0.0;
  int realization = 0;
};

struct ScanSample {
  std::vector<double> series;
  std::uint64_t errors = 0;
  std::uint64_t cells = 0;
  std::string error;
};

inline void phase_scan(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& sc = cfg.scenario;
  const bool pca = cfg.engine == Engine::pca;
  std::vector<std::pair<double, double>> grid;  // (v, control)
  if (pca)
    for (double p : sc.pe_values) grid.emplace_back(0.0, p);
  else
    for (double v : sc.v_values)
      for (double T : sc.temperatures) grid.emplace_back(v, T);

  std::vector<ScanJob> jobs;
  for (const auto& [v, c] : grid)
    for (int r = 0; r < sc.realizations; ++r) jobs.push_back({v, c, r});
  std::vector<ScanSample> samples(jobs.size());
  const SpinConfig init = build_initial(sc.initial, cfg.width, cfg.height);
  const auto pca_schedule = rule_list(cfg.pca_rules);

  parallel_for(jobs.size(), cfg.threads, [&](std::size_t j) {
    const auto& job = jobs[j];
    auto& out = samples[j];
    try {
      Stream s = point_stream(cfg.seed, 0x5CA7, job.v, job.control, static_cast<std::uint64_t>(job.realization));
      ErrorField field;
      if (pca) {
        const int k = static_cast<int>(pca_schedule.size());
        const auto traj = run_pca(init, pca_schedule, NoiseModel::symmetric(job.control), k * sc.cycles, s);
        out.series = a_series(traj, pca_schedule.size());
        field = pca_error_field(traj, pca_schedule, sc.window_start, sc.window_cycles);
      } else {
        FloquetParams p = cfg.floquet;
        p.v = job.v;
        p.T = job.control;
        const auto traj = run_floquet(init, p, sc.cycles, s);
        out.series = a_series(traj);
        field = langevin_error_field(traj, p, sc.window_start, sc.window_cycles);
      }
      for (auto b : field.bits()) out.errors += b;
      out.cells = field.size();
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  });

  CsvWriter csv(ctx.file("phase.csv"), {"engine", "v", "control", "P_E", "P_E_stderr", "plateau", "stderr",
                                        "realizations"});
  std::optional<CsvWriter> calib;
  if (!pca) calib.emplace(ctx.file("calibration.csv"), std::vector<std::string>{"v", "T", "P_E", "stderr"});
  std::size_t j = 0;
  for (const auto& [v, c] : grid) {
    std::vector<std::vector<double>> series;
    std::vector<double> rates;
    std::uint64_t errors = 0, cells = 0;
    std::string failure;
    for (int r = 0; r < sc.realizations; ++r, ++j) {
      if (!samples[j].error.empty()) {
        failure = samples[j].error;
        continue;
      }
      series.push_back(std::move(samples[j].series));
      errors += samples[j].errors;
      cells += samples[j].cells;
      rates.push_back(static_cast<double>(samples[j].errors) / static_cast<double>(samples[j].cells));
    }
    const std::string label = pca ? "P_E=" + format_real(c) : "v=" + format_real(v) + ",T=" + format_real(c);
    ctx.point(label, [&] {
      if (!failure.empty()) throw std::runtime_error(failure);
      const auto plateau = dtc_order_parameter(series, sc.window_start, sc.window_cycles);
      const double pe = static_cast<double>(errors) / static_cast<double>(cells);
      double var = 0.0;
      for (double x : rates) var += (x - pe) * (x - pe);
      const double pe_err = rates.size() > 1 ? std::sqrt(var / (rates.size() - 1) / rates.size()) : 0.0;
      csv << to_string(cfg.engine) << v << c << pe << pe_err << plateau.value << plateau.error << plateau.samples;
      csv.end_row();
      if (calib) {
        *calib << v << c << pe << pe_err;
        calib->end_row();
      }
    });
  }
}

inline void error_bench(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& sc = cfg.scenario;
  struct Point {
    std::string rule;
    double v, x;
  };
  std::vector<Point> grid;
  for (const auto& rule : sc.bench_rules)
    for (double v : sc.v_values)
      for (double x : sc.v_over_T) grid.push_back({rule, v, x});
  const int R = sc.bench_realizations;
  std::vector<std::optional<ErrorField>> fields(grid.size() * R);
  std::vector<std::string> failures(fields.size());
  const SpinConfig init = build_initial(sc.initial, cfg.width, cfg.height);
  parallel_for(fields.size(), cfg.threads, [&](std::size_t j) {
    const auto& g = grid[j / R];
    try {
      FloquetParams p = cfg.floquet;
      p.v = g.v;
      p.T = g.v / g.x;
      p.step2_rule = p.step4_rule = g.rule;
      Stream s = point_stream(cfg.seed, 0xBE7C ^ fnv1a(g.rule), g.v, g.x, j % R);
      const auto traj = run_floquet(init, p, sc.warmup_cycles + sc.measure_cycles, s);
      fields[j] = langevin_error_field(traj, p, sc.warmup_cycles, sc.measure_cycles);
    } catch (const std::exception& e) {
      failures[j] = e.what();
    }
  });
  CsvWriter pe(ctx.file("pe.csv"), {"rule", "v", "T", "v_over_T", "P_E", "stderr", "pe_equilibrium"});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& g = grid[i];
    ctx.point(g.rule + ",v=" + format_real(g.v) + ",v/T=" + format_real(g.x), [&] {
      std::vector<ErrorField> fs;
      for (int r = 0; r < R; ++r) {
        if (!failures[i * R + r].empty()) throw std::runtime_error(failures[i * R + r]);
        fs.push_back(std::move(*fields[i * R + r]));
      }
      const auto rate = error_rate(fs);
      const double T = g.v / g.x;
      pe << g.rule << g.v << T << g.x << rate.value << rate.error << pe_equilibrium(g.v / 4.0, T);
      pe.end_row();
    });
  }
}

inline std::vector<ErrorField> stats_fields(Context& ctx) {
  const auto& sc = ctx.cfg.scenario;
  return simulate_error_fields(ctx.cfg, sc.trajectories, sc.stats_warmup_cycles, sc.stats_measure_cycles);
}

inline void write_rate(Context& ctx, const std::vector<ErrorField>& fields) {
  const auto& cfg = ctx.cfg;
  const auto rate = error_rate(fields);
  CsvWriter pe(ctx.file("pe.csv"), {"rule", "v", "T", "v_over_T", "P_E", "stderr", "pe_equilibrium"});
  if (cfg.engine == Engine::langevin) {
    const auto& p = cfg.floquet;
    pe << (p.step2_rule + "/" + p.step4_rule) << p.v << p.T << (p.T > 0 ? p.v / p.T : INFINITY) << rate.value
       << rate.error << pe_equilibrium(p.v_interaction(), p.T);
  } else {
    pe << join(cfg.pca_rules, "/") << NAN << NAN << NAN << rate.value << rate.error << NAN;
  }
  pe.end_row();
  ctx.result.summary["P_E"] = rate.value;
  ctx.result.summary["P_E_stderr"] = rate.error;
}

inline SamplingPlan stats_plan(const RunConfig& cfg) {
  SamplingPlan plan;
  plan.blocks_per_field = cfg.scenario.blocks_per_field;
  plan.seed = derive_key(cfg.seed, {0xB10C});
  return plan;
}

inline void cumulants(Context& ctx) {
  const auto& cfg = ctx.cfg;
  std::vector<ErrorField> fields;
  if (!ctx.point("simulate", [&] { fields = stats_fields(ctx); })) return;
  write_rate(ctx, fields);
  const auto plan = stats_plan(cfg);
  std::vector<std::vector<CumulantRow>> by_order(4);
  const bool lang = cfg.engine == Engine::langevin;
  CsvWriter csv(ctx.file("cumulants.csv"), {"T", "v", "n", "L", "scaled_cumulant", "stderr"});
  for (int L : cfg.scenario.box_sizes) {
    ctx.point("L=" + std::to_string(L), [&] {
      for (const auto& row : box_cumulants(fields, L, 4, plan)) {
        csv << (lang ? cfg.floquet.T : NAN) << (lang ? cfg.floquet.v : NAN) << row.order << L << row.scaled << row.error;
        csv.end_row();
        by_order[row.order - 1].push_back(row);
      }
    });
  }
  CsvWriter fits(ctx.file("fits.csv"), {"n", "c_n", "b_n", "eta_n", "residual"});
  for (int n = 1; n <= 4; ++n) {
    if (by_order[n - 1].size() < 4) continue;
    ctx.point("fit n=" + std::to_string(n), [&] {
      const auto f = fit_cumulant_scaling(by_order[n - 1]);
      fits << n << f.c << f.b << f.eta << f.residual;
      fits.end_row();
      ctx.result.summary["fit_converged_n" + std::to_string(n)] = f.converged;
    });
  }
}

inline void correlations(Context& ctx) {
  const auto& cfg = ctx.cfg;
  std::vector<ErrorField> fields;
  if (!ctx.point("simulate", [&] { fields = stats_fields(ctx); })) return;
  write_rate(ctx, fields);
  const int r = cfg.scenario.corr_radius;
  std::vector<Displacement> offsets;
  for (int dt = 0; dt <= cfg.scenario.corr_max_dt; ++dt)
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) offsets.push_back({dt, dx, dy});
  ctx.point("correlations", [&] {
    const auto values = connected_correlations(fields, offsets);
    CsvWriter csv(ctx.file("corr.csv"), {"dt", "dx", "dy", "corr_over_PE"});
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      csv << offsets[i].dt << offsets[i].dx << offsets[i].dy << values[i];
      csv.end_row();
    }
  });
}

inline void scgf(Context& ctx) {
  const auto& cfg = ctx.cfg;
  std::vector<ErrorField> fields;
  if (!ctx.point("simulate", [&] { fields = stats_fields(ctx); })) return;
  write_rate(ctx, fields);
  std::vector<double> k;
  for (int i = 0; i * cfg.scenario.k_step <= cfg.scenario.k_max + 1e-12; ++i) k.push_back(i * cfg.scenario.k_step);
  std::vector<BoxGeometry> geoms;
  const auto& f0 = fields.front();
  for (const auto& g : default_scgf_geometries())
    if (g.lt <= f0.steps() && g.lx <= f0.width() && g.ly <= f0.height()) geoms.push_back(g);
  ctx.point("scgf", [&] {
    const auto rep = scgf_bound(fields, geoms, k, stats_plan(cfg));
    CsvWriter csv(ctx.file("scgf.csv"), {"geometry", "k", "lambda", "bound", "trusted"});
    for (const auto& c : rep.curves)
      for (std::size_t i = 0; i < k.size(); ++i) {
        csv << c.geometry.label() << k[i] << c.lambda[i] << c.bound << (c.trusted[i] ? 1 : 0);
        csv.end_row();
      }
    auto& s = ctx.result.summary;
    s["bound"] = finite_or_null(rep.bound);
    s["ratios_c_n_over_P_E"] = nlohmann::json::array();
    for (double x : rep.ratios) s["ratios_c_n_over_P_E"].push_back(finite_or_null(x));
    for (const auto& c : rep.curves) s["slope_at_zero"][c.geometry.label()] = c.slope_at_zero;
  });
}

inline void correct_trace(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& sc = cfg.scenario;
  CsvWriter csv(ctx.file("trace.csv"), {"kappa_f", "T", "time", "q_A", "q_B"});
  CsvWriter sum(ctx.file("trace_summary.csv"), {"kappa_f", "T", "corrected_first_period"});
  const SpinConfig init = single_error(cfg.width, cfg.height, sc.trace_x, sc.trace_y);
  for (double kappa : sc.trace_kappas)
    for (double T : sc.trace_temperatures) {
      ctx.point("kappa_f=" + format_real(kappa) + ",T=" + format_real(T), [&] {
        FloquetParams p = cfg.floquet;
        p.kappa_f = kappa;
        p.T = T;
        Stream s = point_stream(cfg.seed, 0x7ACE, kappa, T, 0);
        LangevinTrajectory traj;
        const auto trace = correction_trace(p, init, sc.trace_x, sc.trace_y, sc.trace_cycles, sc.trace_every, s, &traj);
        for (const auto& t : trace) {
          csv << kappa << T << t.time << t.q_a << t.q_b;
          csv.end_row();
        }
        sum << kappa << T << (corrected_in_first_period(traj) ? 1 : 0);
        sum.end_row();
      });
    }
}

}  // namespace detail

inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j;
  j["engine"] = to_string(c.engine);
  j["seed"] = c.seed;
  j["tier"] = to_string(c.tier);
  j["lattice"] = {{"width", c.width}, {"height", c.height}};
  const auto& f = c.floquet;
  j["floquet"] = {{"v", f.v},         {"v_pin", f.v_pin()},          {"v_I", f.v_interaction()},
                  {"F", f.F},         {"T", f.T},                    {"kappa_f", f.kappa_f},
                  {"dt", f.dt},       {"mass", f.mass},              {"gamma_I", f.gamma_interaction()},
                  {"gamma_r", f.gamma_relax()}, {"step2_rule", f.step2_rule}, {"step4_rule", f.step4_rule}};
  j["pca"] = {{"rules", c.pca_rules}, {"eps_plus", c.eps_plus}, {"eps_minus", c.eps_minus}};
  return j;
}

/// Runs one subcommand, writing its files and manifest.json into cfg.out.
/// Exit code 0 on success, 2 if any grid point failed.
inline ScenarioResult run_scenario(const std::string& command, const RunConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = detail::utc_now();
  ScenarioResult result;
  std::filesystem::create_directories(cfg.out);
  detail::Context ctx{cfg, std::filesystem::path(cfg.out), result};
  if (command == "pca-run") detail::pca_run(ctx);
  else if (command == "langevin-run") detail::langevin_run(ctx);
  else if (command == "phase-scan") detail::phase_scan(ctx);
  else if (command == "error-bench") detail::error_bench(ctx);
  else if (command == "cumulants") detail::cumulants(ctx);
  else if (command == "correlations") detail::correlations(ctx);
  else if (command == "scgf") detail::scgf(ctx);
  else if (command == "correct-trace") detail::correct_trace(ctx);
  else throw ConfigError("unknown subcommand '" + command + "'");

  for (const auto& p : result.points)
    if (!p.ok) result.exit_code = 2;

  nlohmann::json m;
  m["tool"] = "toomdtc";
  m["version"] = kVersion;
  m["git_revision"] = TOOMDTC_GIT_REVISION;
  m["command"] = command;
  m["seed"] = cfg.seed;
  m["threads"] = cfg.threads;
  m["config_toml"] = to_toml(cfg);
  m["parameters"] = config_json(cfg);
  m["conventions"] = {{"error_clock", "one space-time cell per CA step; both sub-steps of a cycle count"},
                      {"order_parameter", "(-1)^cycle M_A, M_A read after the first relaxation of each cycle"},
                      {"noise_variance", "2 gamma m T dt per integrator step"}};
  m["files"] = result.files;
  m["grid"] = nlohmann::json::array();
  for (const auto& p : result.points)
    m["grid"].push_back({{"point", p.label}, {"ok", p.ok}, {"error", p.error}});
  m["summary"] = result.summary;
  m["exit_code"] = result.exit_code;
  m["started_at"] = started_at;
  m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::ofstream(std::filesystem::path(cfg.out) / "manifest.json") << m.dump(2) << '\n';
  result.files.push_back("manifest.json");
  return result;
}

}  // namespace toomdtc
