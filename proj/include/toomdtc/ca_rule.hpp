#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "toomdtc/spin_config.hpp"

namespace toomdtc {

struct Offset {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
};

/// North, East, Center.
inline const std::vector<Offset>& nec_neighborhood() {
  static const std::vector<Offset> n{{1, 0}, {0, 1}, {0, 0}};
  return n;
}

/// Deterministic local rule. The transition is tabulated over all |S|^|N|
/// neighborhood tuples; tuple index is mixed-radix with neighbor 0 as the
/// least significant digit and digits given by position in the sorted state set.
class CARule {
 public:
  using Transition = std::function<Spin(std::span<const Spin>)>;

  CARule(std::string name, std::vector<Offset> neighborhood, const Transition& transition,
         std::vector<Spin> states = binary_states())
      : name_(std::move(name)), neighborhood_(std::move(neighborhood)), states_(std::move(states)) {
    if (neighborhood_.empty()) throw std::invalid_argument("CARule: empty neighborhood");
    if (states_.empty()) throw std::invalid_argument("CARule: empty state set");
    std::sort(states_.begin(), states_.end());
    const std::size_t d = states_.size();
    std::size_t count = 1;
    for (std::size_t i = 0; i < neighborhood_.size(); ++i) {
      count *= d;
      if (count > (1u << 20)) throw std::invalid_argument("CARule: transition table too large");
    }
    table_.resize(count);
    std::vector<Spin> tuple(neighborhood_.size());
    for (std::size_t idx = 0; idx < count; ++idx) {
      std::size_t rest = idx;
      for (auto& s : tuple) {
        s = states_[rest % d];
        rest /= d;
      }
      Spin out = transition(tuple);
      if (!std::binary_search(states_.begin(), states_.end(), out))
        throw std::invalid_argument("CARule " + name_ + ": transition leaves the state set");
      table_[idx] = out;
    }
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<Offset>& neighborhood() const noexcept { return neighborhood_; }
  const std::vector<Spin>& states() const noexcept { return states_; }
  std::size_t arity() const noexcept { return neighborhood_.size(); }
  bool is_binary() const noexcept { return states_ == binary_states(); }

  std::size_t state_index(Spin s) const {
    auto it = std::lower_bound(states_.begin(), states_.end(), s);
    if (it == states_.end() || *it != s) throw std::invalid_argument("CARule: state not in set");
    return static_cast<std::size_t>(it - states_.begin());
  }

  Spin operator()(std::span<const Spin> tuple) const {
    if (tuple.size() != neighborhood_.size()) throw std::invalid_argument("CARule: tuple arity mismatch");
    std::size_t idx = 0;
    for (std::size_t i = tuple.size(); i-- > 0;) idx = idx * states_.size() + state_index(tuple[i]);
    return table_[idx];
  }

  /// Table lookup by precomputed index (binary rules: bit i set iff neighbor i is +1).
  Spin by_index(std::size_t idx) const noexcept { return table_[idx]; }
  std::size_t table_size() const noexcept { return table_.size(); }

 private:
  std::string name_;
  std::vector<Offset> neighborhood_;
  std::vector<Spin> states_;
  std::vector<Spin> table_;
};

namespace rules {

inline CARule do_nothing() {
  return CARule("DO_NOTHING", {{0, 0}}, [](std::span<const Spin> t) { return t[0]; });
}

inline CARule flip() {
  return CARule("FLIP", {{0, 0}}, [](std::span<const Spin> t) { return static_cast<Spin>(-t[0]); });
}

inline CARule toom() {
  return CARule("TOOM", nec_neighborhood(),
                [](std::span<const Spin> t) { return t[0] + t[1] + t[2] > 0 ? Spin{+1} : Spin{-1}; });
}

inline CARule pi_toom() {
  return CARule("PI_TOOM", nec_neighborhood(),
                [](std::span<const Spin> t) { return t[0] + t[1] + t[2] > 0 ? Spin{-1} : Spin{+1}; });
}

inline CARule by_name(const std::string& name) {
  if (name == "DO_NOTHING") return do_nothing();
  if (name == "FLIP") return flip();
  if (name == "TOOM") return toom();
  if (name == "PI_TOOM") return pi_toom();
  throw std::invalid_argument("unknown rule '" + name + "'");
}

inline bool is_known(const std::string& name) {
  return name == "DO_NOTHING" || name == "FLIP" || name == "TOOM" || name == "PI_TOOM";
}

}  // namespace rules
}  // namespace toomdtc
