#pragma once

// Counter-based random streams.
//
// Every stream is identified by a 64-bit key derived from the run seed and a
// tuple of labels (grid point, realization, step, site ...). Draw i of a stream
// is a pure function of (key, i), so any parallel schedule reproduces the
// serial result bit for bit.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace toomdtc {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine_key(std::uint64_t key, std::uint64_t label) noexcept {
  return mix64(key ^ mix64(label + kGolden));
}

constexpr std::uint64_t derive_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> labels) noexcept {
  std::uint64_t key = mix64(seed + 0x6A09E667F3BCC909ULL);
  for (auto label : labels) key = combine_key(key, label);
  return key;
}

inline double to_unit_open(std::uint64_t bits) noexcept {
  // (0, 1]: safe for log()
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

namespace detail {

// Marsaglia-Tsang ziggurat tables, 128 layers.
struct ZigguratTables {
  std::array<std::uint32_t, 128> k{};
  std::array<double, 128> w{};
  std::array<double, 128> f{};

  ZigguratTables() {
    constexpr double m1 = 2147483648.0;
    constexpr double vn = 9.91256303526217e-3;
    double dn = 3.442619855899;
    double tn = dn;
    const double q = vn / std::exp(-0.5 * dn * dn);
    k[0] = static_cast<std::uint32_t>((dn / q) * m1);
    k[1] = 0;
    w[0] = q / m1;
    w[127] = dn / m1;
    f[0] = 1.0;
    f[127] = std::exp(-0.5 * dn * dn);
    for (int i = 126; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
      k[i + 1] = static_cast<std::uint32_t>((dn / tn) * m1);
      tn = dn;
      f[i] = std::exp(-0.5 * dn * dn);
      w[i] = dn / m1;
    }
  }
};

inline const ZigguratTables& ziggurat() {
  static const ZigguratTables tables;
  return tables;
}

}  // namespace detail

/// A reproducible random stream. Satisfies UniformRandomBitGenerator so it
/// can also feed the <random> distributions.
class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr Stream() noexcept = default;
  constexpr explicit Stream(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr std::uint64_t key() const noexcept { return key_; }
  constexpr std::uint64_t position() const noexcept { return counter_; }

  /// Random access: the i-th raw draw of this stream.
  constexpr std::uint64_t at(std::uint64_t i) const noexcept { return mix64(key_ + (i + 1) * kGolden); }

  constexpr result_type operator()() noexcept { return at(counter_++); }

  double uniform() noexcept { return to_unit_open((*this)()) - 0x1.0p-53; }  // [0, 1)

  /// Standard normal (ziggurat). Layer index and value come from disjoint bits of one draw.
  double gaussian() noexcept {
    const auto& z = detail::ziggurat();
    constexpr double tail = 3.442619855899;
    for (;;) {
      const std::uint64_t bits = (*this)();
      const std::size_t layer = bits & 127u;
      const auto hz = static_cast<std::int32_t>(static_cast<std::uint32_t>(bits >> 32));
      const double x = static_cast<double>(hz) * z.w[layer];
      const std::uint32_t mag = hz < 0 ? static_cast<std::uint32_t>(-static_cast<std::int64_t>(hz))
                                        : static_cast<std::uint32_t>(hz);
      if (mag < z.k[layer]) return x;
      if (layer == 0) {
        double tx, ty;
        do {
          tx = -std::log(to_unit_open((*this)())) / tail;
          ty = -std::log(to_unit_open((*this)()));
        } while (ty + ty < tx * tx);
        return hz > 0 ? tail + tx : -tail - tx;
      }
      if (z.f[layer] + uniform() * (z.f[layer - 1] - z.f[layer]) < std::exp(-0.5 * x * x)) return x;
    }
  }

  /// Child stream for a sub-label. Does not advance this stream.
  constexpr Stream derive(std::uint64_t label) const noexcept { return Stream(combine_key(key_, label)); }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Pair of independent standard normals for lane `i` of the step keyed by
/// `key`. Used by the integrator for per-site noise.
struct NormalPair {
  double first;
  double second;
};

inline NormalPair normal_pair_at(std::uint64_t key, std::uint64_t i) noexcept {
  Stream s(combine_key(key, i));
  const double a = s.gaussian();
  return {a, s.gaussian()};
}

inline Stream derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
  return Stream(derive_key(seed, labels));
}

}  // namespace toomdtc
