#pragma once

// Box cumulants, finite-size fits, connected correlations and the SCGF
// min-max bound for binary space-time error fields.
//
// Box counts N_V are accumulated as exact integer power sums, so block order
// never changes an estimate.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "toomdtc/errors.hpp"
#include "toomdtc/rng.hpp"

namespace toomdtc {

struct BoxGeometry {
  int lt = 1;
  int lx = 1;
  int ly = 1;

  static BoxGeometry cube(int l) { return {l, l, l}; }
  long long volume() const noexcept { return static_cast<long long>(lt) * lx * ly; }
  std::string label() const {
    return std::to_string(lt) + "x" + std::to_string(lx) + "x" + std::to_string(ly);
  }
  friend bool operator==(const BoxGeometry&, const BoxGeometry&) = default;
};

struct SamplingPlan {
  enum class Mode { random, exhaustive };
  Mode mode = Mode::random;
  int blocks_per_field = 1000;
  std::uint64_t seed = 0;
  int bootstrap_resamples = 200;
  /// Exhaustive mode only: let boxes wrap in time as well as space.
  bool time_periodic = false;
};

/// Summed-volume table over the field tiled twice in x and y, so a spatially
/// wrapped box is a plain box in the extended grid.
class BoxCounter {
 public:
  explicit BoxCounter(const ErrorField& f, bool time_periodic = false)
      : T_(f.steps()), W_(f.width()), H_(f.height()), TT_(time_periodic ? 2 * f.steps() : f.steps()) {
    const int ew = 2 * W_, eh = 2 * H_;
    sums_.assign(std::size_t(TT_ + 1) * (eh + 1) * (ew + 1), 0);
    for (int t = 0; t < TT_; ++t)
      for (int y = 0; y < eh; ++y)
        for (int x = 0; x < ew; ++x) {
          const std::int64_t e = f.at(t % T_, x % W_, y % H_);
          at(t + 1, y + 1, x + 1) = e + at(t, y + 1, x + 1) + at(t + 1, y, x + 1) + at(t + 1, y + 1, x) -
                                    at(t, y, x + 1) - at(t, y + 1, x) - at(t + 1, y, x) + at(t, y, x);
        }
  }

  std::int64_t count(int t0, int x0, int y0, const BoxGeometry& g) const noexcept {
    const int t1 = t0 + g.lt, x1 = x0 + g.lx, y1 = y0 + g.ly;
    return at(t1, y1, x1) - at(t0, y1, x1) - at(t1, y0, x1) - at(t1, y1, x0) + at(t0, y0, x1) + at(t0, y1, x0) +
           at(t1, y0, x0) - at(t0, y0, x0);
  }

 private:
  std::int64_t& at(int t, int y, int x) noexcept { return sums_[(std::size_t(t) * (2 * H_ + 1) + y) * (2 * W_ + 1) + x]; }
  std::int64_t at(int t, int y, int x) const noexcept {
    return sums_[(std::size_t(t) * (2 * H_ + 1) + y) * (2 * W_ + 1) + x];
  }

  int T_, W_, H_, TT_;
  std::vector<std::int64_t> sums_;
};

/// Exact power sums of the block counts of one field.
struct PowerSums {
  using u128 = unsigned __int128;
  std::uint64_t n = 0;
  std::array<u128, 5> s{};  // s[j] = sum N^j, j = 0..4

  void add(std::uint64_t count) noexcept {
    u128 p = 1;
    for (auto& sj : s) {
      sj += p;
      p *= count;
    }
    ++n;
  }
  PowerSums& operator+=(const PowerSums& o) noexcept {
    n += o.n;
    for (std::size_t j = 0; j < s.size(); ++j) s[j] += o.s[j];
    return *this;
  }
};

/// Block counts for one geometry. `groups` are the bootstrap units: one per
/// field, or one per block when there is a single field.
struct BlockSample {
  BoxGeometry geometry;
  std::vector<PowerSums> groups;
  std::vector<std::uint64_t> histogram;  // histogram[N] over all fields
  bool exhaustive = false;

  PowerSums pooled() const {
    PowerSums p;
    for (const auto& g : groups) p += g;
    return p;
  }
  std::uint64_t blocks() const { return pooled().n; }
};

inline void check_geometry(const ErrorField& f, const BoxGeometry& g) {
  if (g.lt <= 0 || g.lx <= 0 || g.ly <= 0) throw std::invalid_argument("box geometry must be positive");
  if (g.lx > f.width() || g.ly > f.height() || g.lt > f.steps())
    throw std::invalid_argument("box " + g.label() + " does not fit the error field");
}

inline BlockSample sample_blocks(std::span<const ErrorField> fields, const BoxGeometry& g, const SamplingPlan& plan) {
  if (fields.empty()) throw std::invalid_argument("sample_blocks: no fields");
  const bool exhaustive = plan.mode == SamplingPlan::Mode::exhaustive;
  if (!exhaustive && plan.blocks_per_field <= 0) throw std::invalid_argument("sample_blocks: no blocks requested");
  BlockSample out;
  out.geometry = g;
  out.exhaustive = exhaustive;
  out.histogram.assign(static_cast<std::size_t>(g.volume()) + 1, 0);
  const bool per_block = fields.size() == 1;
  const std::uint64_t geom_label = (std::uint64_t(g.lt) << 42) ^ (std::uint64_t(g.lx) << 21) ^ std::uint64_t(g.ly);
  for (std::size_t fi = 0; fi < fields.size(); ++fi) {
    const auto& f = fields[fi];
    const bool wrap_t = exhaustive && plan.time_periodic;
    check_geometry(f, g);
    BoxCounter counter(f, wrap_t);
    PowerSums ps;
    auto take = [&](int t0, int x0, int y0) {
      const auto c = static_cast<std::uint64_t>(counter.count(t0, x0, y0, g));
      if (per_block) {
        PowerSums one;
        one.add(c);
        out.groups.push_back(one);
      }
      ps.add(c);
      ++out.histogram[c];
    };
    if (exhaustive) {
      const int t_origins = wrap_t ? f.steps() : f.steps() - g.lt + 1;
      for (int t0 = 0; t0 < t_origins; ++t0)
        for (int y0 = 0; y0 < f.height(); ++y0)
          for (int x0 = 0; x0 < f.width(); ++x0) take(t0, x0, y0);
    } else {
      const Stream s(derive_key(plan.seed, {fi, geom_label}));
      const auto t_range = static_cast<std::uint64_t>(f.steps() - g.lt + 1);
      for (int b = 0; b < plan.blocks_per_field; ++b) {
        const auto base = static_cast<std::uint64_t>(b) * 3;
        take(static_cast<int>(s.at(base) % t_range), static_cast<int>(s.at(base + 1) % std::uint64_t(f.width())),
             static_cast<int>(s.at(base + 2) % std::uint64_t(f.height())));
      }
    }
    if (!per_block) out.groups.push_back(ps);
  }
  return out;
}

/// Cumulants 1..n_max of the block count. `unbiased` selects k-statistics;
/// otherwise population cumulants.
inline std::vector<double> cumulants_from_sums(const PowerSums& ps, int n_max, bool unbiased) {
  if (n_max < 1 || n_max > 4) throw std::invalid_argument("cumulants: order must be in 1..4");
  const auto n = static_cast<long double>(ps.n);
  const auto S1 = static_cast<long double>(ps.s[1]);
  const auto S2 = static_cast<long double>(ps.s[2]);
  const auto S3 = static_cast<long double>(ps.s[3]);
  const auto S4 = static_cast<long double>(ps.s[4]);
  const long double m = S1 / n;
  const long double m2 = S2 / n - m * m;
  const long double m3 = S3 / n - 3 * m * S2 / n + 2 * m * m * m;
  const long double m4 = S4 / n - 4 * m * S3 / n + 6 * m * m * S2 / n - 3 * m * m * m * m;
  std::vector<double> k(static_cast<std::size_t>(n_max));
  k[0] = static_cast<double>(m);
  if (n_max >= 2) k[1] = static_cast<double>(unbiased ? n / (n - 1) * m2 : m2);
  if (n_max >= 3) k[2] = static_cast<double>(unbiased ? n * n / ((n - 1) * (n - 2)) * m3 : m3);
  if (n_max >= 4)
    k[3] = static_cast<double>(unbiased ? n * n * ((n + 1) * m4 - 3 * (n - 1) * m2 * m2) / ((n - 1) * (n - 2) * (n - 3))
                                        : m4 - 3 * m2 * m2);
  return k;
}

struct CumulantRow {
  BoxGeometry geometry;
  int order = 1;
  double scaled = 0.0;  // <N_V^n>_c / |V|
  double error = 0.0;   // bootstrap standard error
  std::uint64_t blocks = 0;
};

/// Scaled cumulants of one block sample with bootstrap standard errors.
inline std::vector<CumulantRow> cumulants_of(const BlockSample& sample, int n_max, const SamplingPlan& plan) {
  if (n_max < 1 || n_max > 4) throw std::invalid_argument("box_cumulants: order must be in 1..4");
  const PowerSums pooled = sample.pooled();
  const bool unbiased = !sample.exhaustive;
  const std::uint64_t needed = unbiased ? static_cast<std::uint64_t>(std::max(n_max, 1)) + 1 : 1;
  if (pooled.n < needed)
    throw std::runtime_error("box_cumulants: insufficient samples for order " + std::to_string(n_max));
  const double vol = static_cast<double>(sample.geometry.volume());
  auto k = cumulants_from_sums(pooled, n_max, unbiased);
  // first order as one correctly rounded division of exact integers
  k[0] = static_cast<double>(static_cast<long double>(pooled.s[1])) /
         static_cast<double>(static_cast<long double>(pooled.n) * vol);

  std::vector<double> se(static_cast<std::size_t>(n_max), 0.0);
  const std::size_t nf = sample.groups.size();
  if (nf >= 2 && plan.bootstrap_resamples > 1) {
    std::vector<double> sum(n_max, 0.0), sum2(n_max, 0.0);
    int used = 0;
    const Stream s(derive_key(plan.seed, {0xB007u, std::uint64_t(sample.geometry.volume())}));
    std::uint64_t draw = 0;
    for (int r = 0; r < plan.bootstrap_resamples; ++r) {
      PowerSums boot;
      for (std::size_t i = 0; i < nf; ++i) boot += sample.groups[s.at(draw++) % nf];
      if (boot.n < needed) continue;
      auto kb = cumulants_from_sums(boot, n_max, unbiased);
      for (int j = 0; j < n_max; ++j) {
        const double v = kb[j] / vol;
        sum[j] += v;
        sum2[j] += v * v;
      }
      ++used;
    }
    if (used > 1)
      for (int j = 0; j < n_max; ++j) {
        const double mean = sum[j] / used;
        se[j] = std::sqrt(std::max(0.0, (sum2[j] - used * mean * mean) / (used - 1)));
      }
  }
  std::vector<CumulantRow> rows;
  for (int j = 0; j < n_max; ++j)
    rows.push_back({sample.geometry, j + 1, j == 0 ? k[0] : k[j] / vol, se[j], pooled.n});
  return rows;
}

/// Scaled cumulants <N_V^n>_c / L^3 for n = 1..n_max over L x L x L boxes.
inline std::vector<CumulantRow> box_cumulants(std::span<const ErrorField> fields, int L, int n_max,
                                              const SamplingPlan& plan = {}) {
  return cumulants_of(sample_blocks(fields, BoxGeometry::cube(L), plan), n_max, plan);
}

inline std::vector<CumulantRow> box_cumulants(const ErrorField& field, int L, int n_max, const SamplingPlan& plan = {}) {
  return box_cumulants(std::span<const ErrorField>(&field, 1), L, n_max, plan);
}

// ---- finite-size fit  y(L) = c - b L^{-eta} ----

struct ScalingPoint {
  double L = 0.0;
  double value = 0.0;
  double error = 0.0;
};

struct ScalingFit {
  int order = 0;
  double c = 0.0;
  double b = 0.0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double residual = 0.0;  // weighted sum of squared residuals
  bool converged = true;
};

namespace detail {

struct LinearFit {
  double c = 0.0, b = 0.0, chi2 = 0.0;
};

// Weighted least squares for y = c - b x.
inline LinearFit fit_linear(std::span<const ScalingPoint> pts, std::span<const double> w, double eta) {
  double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = std::pow(pts[i].L, -eta);
    S += w[i];
    Sx += w[i] * x;
    Sy += w[i] * pts[i].value;
    Sxx += w[i] * x * x;
    Sxy += w[i] * x * pts[i].value;
  }
  const double det = S * Sxx - Sx * Sx;
  LinearFit f;
  if (std::abs(det) < 1e-300) {
    f.c = Sy / S;
  } else {
    const double slope = (S * Sxy - Sx * Sy) / det;  // y = c + slope x
    f.c = (Sy - slope * Sx) / S;
    f.b = -slope;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double r = pts[i].value - (f.c - f.b * std::pow(pts[i].L, -eta));
    f.chi2 += w[i] * r * r;
  }
  return f;
}

}  // namespace detail

/// Weighted (1/sigma^2) least squares; eta > 0 is profiled by a log grid scan
/// followed by golden-section refinement. Order 1 fixes b = 0.
inline ScalingFit fit_cumulant_scaling(std::span<const ScalingPoint> points, int order) {
  std::vector<double> Ls;
  for (const auto& p : points) Ls.push_back(p.L);
  std::sort(Ls.begin(), Ls.end());
  if (std::unique(Ls.begin(), Ls.end()) - Ls.begin() < 4)
    throw std::invalid_argument("fit_cumulant_scaling: need at least 4 distinct L values");
  for (const auto& p : points)
    if (!(p.L > 0.0) || !std::isfinite(p.value)) throw std::invalid_argument("fit_cumulant_scaling: bad data point");

  std::vector<double> w(points.size(), 1.0);
  const bool weighted = std::all_of(points.begin(), points.end(), [](const ScalingPoint& p) { return p.error > 0.0; });
  if (weighted)
    for (std::size_t i = 0; i < points.size(); ++i) w[i] = 1.0 / (points[i].error * points[i].error);

  ScalingFit out;
  out.order = order;
  double W = 0, Wy = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    W += w[i];
    Wy += w[i] * points[i].value;
  }
  const double mean = Wy / W;
  double chi2_const = 0;
  for (std::size_t i = 0; i < points.size(); ++i) chi2_const += w[i] * (points[i].value - mean) * (points[i].value - mean);

  if (order == 1) {
    out.c = mean;
    out.residual = chi2_const;
    return out;
  }

  constexpr double lo = 1e-3, hi = 20.0;
  constexpr int grid = 400;
  auto chi2_at = [&](double eta) { return detail::fit_linear(points, w, eta).chi2; };
  int best = 0;
  double best_chi2 = std::numeric_limits<double>::infinity();
  std::vector<double> etas(grid);
  for (int i = 0; i < grid; ++i) {
    etas[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (grid - 1));
    const double c2 = chi2_at(etas[i]);
    if (c2 < best_chi2) {
      best_chi2 = c2;
      best = i;
    }
  }
  double a = etas[std::max(best - 1, 0)], b = etas[std::min(best + 1, grid - 1)];
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = chi2_at(x1), f2 = chi2_at(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-12 * (1.0 + std::abs(a)); ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = chi2_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = chi2_at(x2);
    }
  }
  const double eta = 0.5 * (a + b);
  const auto fit = detail::fit_linear(points, w, eta);
  const double scale = std::max(chi2_const, 1e-300);
  if (chi2_const - fit.chi2 <= 1e-10 * scale + 1e-30) {
    out.c = mean;
    out.b = 0.0;
    out.residual = chi2_const;
    return out;
  }
  out.c = fit.c;
  out.b = fit.b;
  out.eta = eta;
  out.residual = fit.chi2;
  out.converged = best > 0 && best < grid - 1;
  return out;
}

inline ScalingFit fit_cumulant_scaling(std::span<const CumulantRow> rows) {
  if (rows.empty()) throw std::invalid_argument("fit_cumulant_scaling: no rows");
  std::vector<ScalingPoint> pts;
  for (const auto& r : rows) {
    if (r.order != rows.front().order) throw std::invalid_argument("fit_cumulant_scaling: mixed orders");
    pts.push_back({static_cast<double>(r.geometry.lx), r.scaled, r.error});
  }
  return fit_cumulant_scaling(pts, rows.front().order);
}

// ---- connected two-point correlations ----

struct Displacement {
  int dt = 0;
  int dx = 0;
  int dy = 0;
};

/// (<E_{u+d} E_u> - P_E^2) / P_E, averaged over all u with u + d inside the
/// field (space periodic; time periodic on request), pooled over fields.
/// NaN when the fields contain no errors.
inline std::vector<double> connected_correlations(std::span<const ErrorField> fields,
                                                  std::span<const Displacement> offsets, bool time_periodic = false) {
  if (fields.empty()) throw std::invalid_argument("connected_correlation: no fields");
  std::uint64_t errors = 0, cells = 0;
  for (const auto& f : fields) {
    for (auto b : f.bits()) errors += b;
    cells += f.size();
  }
  const double pe = static_cast<double>(errors) / static_cast<double>(cells);
  std::vector<double> out;
  for (const auto& d : offsets) {
    std::uint64_t pairs = 0, hits = 0;
    for (const auto& f : fields) {
      if (std::abs(d.dt) >= f.steps() && !time_periodic)
        throw std::invalid_argument("connected_correlation: time offset exceeds field");
      const int t_lo = time_periodic ? 0 : std::max(0, -d.dt);
      const int t_hi = time_periodic ? f.steps() : std::min(f.steps(), f.steps() - d.dt);
      pairs += std::uint64_t(t_hi - t_lo) * f.width() * f.height();
      for (int t = t_lo; t < t_hi; ++t) {
        int t2 = t + d.dt;
        if (time_periodic) t2 = ((t2 % f.steps()) + f.steps()) % f.steps();
        for (int y = 0; y < f.height(); ++y)
          for (int x = 0; x < f.width(); ++x)
            if (f.at(t, x, y)) hits += f.wrapped(t2, x + d.dx, y + d.dy);
      }
    }
    if (errors == 0) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    out.push_back((static_cast<double>(hits) / static_cast<double>(pairs) - pe * pe) / pe);
  }
  return out;
}

inline double connected_correlation(std::span<const ErrorField> fields, int dt, int dx, int dy,
                                    bool time_periodic = false) {
  const Displacement d{dt, dx, dy};
  return connected_correlations(fields, std::span<const Displacement>(&d, 1), time_periodic).front();
}

inline double connected_correlation(const ErrorField& field, int dt, int dx, int dy, bool time_periodic = false) {
  return connected_correlation(std::span<const ErrorField>(&field, 1), dt, dx, dy, time_periodic);
}

// ---- scaled cumulant generating function ----

struct ScgfCurve {
  BoxGeometry geometry;
  std::vector<double> lambda;       // lambda_V(k) per grid point
  std::vector<bool> trusted;        // largest single block below half the sum
  double bound = 0.0;               // max over trusted k of k - lambda_V(k)
  double slope_at_zero = 0.0;       // <N_V> / |V|
  std::vector<double> scaled_cumulants;  // c_n(V), n = 1..4
  std::uint64_t blocks = 0;
};

struct ScgfReport {
  std::vector<double> k;
  std::vector<ScgfCurve> curves;
  double bound = 0.0;  // min over geometries; +inf when no errors at all
  double pe = 0.0;
  /// c_n / P_E for n = 1..4, from the largest-volume geometry.
  std::vector<double> ratios;
};

inline std::vector<double> default_k_grid() {
  std::vector<double> k;
  for (int i = 0; i <= 30; ++i) k.push_back(0.1 * i);
  return k;
}

inline std::vector<BoxGeometry> default_scgf_geometries() {
  return {BoxGeometry::cube(2), BoxGeometry::cube(4), BoxGeometry::cube(8), {2, 8, 8}, {8, 8, 2}};
}

inline ScgfCurve scgf_curve(const BlockSample& sample, std::span<const double> k_grid) {
  ScgfCurve c;
  c.geometry = sample.geometry;
  const double vol = static_cast<double>(sample.geometry.volume());
  const auto pooled = sample.pooled();
  c.blocks = pooled.n;
  const double n = static_cast<double>(pooled.n);
  c.slope_at_zero = static_cast<double>(static_cast<long double>(pooled.s[1])) / (n * vol);
  std::size_t n_max = 0;
  for (std::size_t N = 0; N < sample.histogram.size(); ++N)
    if (sample.histogram[N]) n_max = N;
  for (double k : k_grid) {
    // log-sum-exp over the histogram
    const double top = k * static_cast<double>(n_max);
    double acc = 0.0;
    for (std::size_t N = 0; N < sample.histogram.size(); ++N)
      if (sample.histogram[N]) acc += static_cast<double>(sample.histogram[N]) * std::exp(k * static_cast<double>(N) - top);
    const double log_mean = top + std::log(acc) - std::log(n);
    c.lambda.push_back(log_mean / vol);
    const double largest_single = 1.0 / acc;  // one block at N_max relative to the sum
    c.trusted.push_back(k == 0.0 || largest_single < 0.5);
  }
  if (n_max == 0) {
    c.bound = std::numeric_limits<double>::infinity();
  } else {
    c.bound = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k_grid.size(); ++i)
      if (k_grid[i] >= 0.0 && c.trusted[i]) c.bound = std::max(c.bound, k_grid[i] - c.lambda[i]);
  }
  auto kc = cumulants_from_sums(pooled, 4, !sample.exhaustive);
  for (auto& v : kc) v /= vol;
  c.scaled_cumulants = kc;
  return c;
}

inline ScgfReport scgf_bound(std::span<const ErrorField> fields, std::span<const BoxGeometry> geometries,
                             std::span<const double> k_grid, const SamplingPlan& plan = {}) {
  if (geometries.empty() || k_grid.empty()) throw std::invalid_argument("scgf_bound: empty geometry list or k grid");
  ScgfReport r;
  r.k.assign(k_grid.begin(), k_grid.end());
  r.pe = error_rate(fields).value;
  r.bound = std::numeric_limits<double>::infinity();
  const ScgfCurve* largest = nullptr;
  for (const auto& g : geometries) {
    r.curves.push_back(scgf_curve(sample_blocks(fields, g, plan), k_grid));
    r.bound = std::min(r.bound, r.curves.back().bound);
  }
  for (const auto& c : r.curves)
    if (!largest || c.geometry.volume() > largest->geometry.volume()) largest = &c;
  for (double cn : largest->scaled_cumulants)
    r.ratios.push_back(r.pe > 0.0 ? cn / r.pe : std::numeric_limits<double>::quiet_NaN());
  return r;
}

}  // namespace toomdtc
