#pragma once

// Run configuration: a TOML subset reader/writer and the validated RunConfig
// schema. Unknown keys are errors.
//
// Supported TOML: [table] headers, key = value, # comments, basic strings,
// integers, floats (incl. inf/nan), booleans and single-line arrays of those.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "toomdtc/ca_rule.hpp"
#include "toomdtc/langevin.hpp"
#include "toomdtc/spin_config.hpp"

namespace toomdtc {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Shortest representation that reads back to the same double.
inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  (void)ec;
  return std::string(buf, end);
}

namespace toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, Array> data;
  int line = 0;

  bool is_number() const { return std::holds_alternative<std::int64_t>(data) || std::holds_alternative<double>(data); }
};

/// table name ("" for the root) -> key -> value
using Document = std::map<std::string, std::map<std::string, Value>>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline bool bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

class Parser {
 public:
  Parser(const std::string& text, int line) : s_(text), line_(line) {}

  Value parse_value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    Value v;
    v.line = line_;
    const char c = s_[pos_];
    if (c == '"') {
      v.data = parse_string();
    } else if (c == '[') {
      ++pos_;
      Array arr;
      skip_ws();
      if (peek() == ']') {
        ++pos_;
      } else {
        for (;;) {
          arr.push_back(parse_value());
          skip_ws();
          if (peek() == ',') {
            ++pos_;
            skip_ws();
            if (peek() == ']') {
              ++pos_;
              break;
            }
            continue;
          }
          if (peek() == ']') {
            ++pos_;
            break;
          }
          fail("expected ',' or ']' in array");
        }
      }
      v.data = std::move(arr);
    } else {
      std::size_t end = pos_;
      while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != ' ' && s_[end] != '\t') ++end;
      const std::string tok = s_.substr(pos_, end - pos_);
      pos_ = end;
      v.data = scalar(tok);
    }
    return v;
  }

  void expect_end() {
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing characters");
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }
  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError("parse error: " + msg, line_); }

  std::string parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  std::variant<bool, std::int64_t, double, std::string, Array> scalar(std::string tok) {
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string t;
    for (char c : tok)
      if (c != '_') t += c;
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    if (t == "nan" || t == "+nan" || t == "-nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = t.find_first_of(".eE") != std::string::npos;
    const char* b = t.data() + (t.size() && t[0] == '+' ? 1 : 0);
    const char* e = t.data() + t.size();
    if (is_float) {
      double d = 0;
      auto [p, ec] = std::from_chars(b, e, d);
      if (ec != std::errc() || p != e) fail("invalid value '" + tok + "'");
      return d;
    }
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(b, e, i);
    if (ec != std::errc() || p != e) fail("invalid value '" + tok + "'");
    return i;
  }

  std::string s_;
  std::size_t pos_ = 0;
  int line_;
};

// Strip a trailing comment that is not inside a string.
inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

}  // namespace detail

inline Document parse(std::istream& in) {
  Document doc;
  doc[""];
  std::string table;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = detail::trim(detail::strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) throw ConfigError("parse error: malformed table header", line);
      table = detail::trim(s.substr(1, s.size() - 2));
      if (!detail::bare_key(table)) throw ConfigError("parse error: bad table name '" + table + "'", line);
      if (doc.count(table) && !doc[table].empty()) throw ConfigError("duplicate table [" + table + "]", line);
      doc[table];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("parse error: expected key = value", line);
    const std::string key = detail::trim(s.substr(0, eq));
    if (!detail::bare_key(key)) throw ConfigError("parse error: bad key '" + key + "'", line);
    detail::Parser p(detail::trim(s.substr(eq + 1)), line);
    Value v = p.parse_value();
    p.expect_end();
    if (doc[table].count(key)) throw ConfigError("duplicate key '" + key + "'", line);
    doc[table].emplace(key, std::move(v));
  }
  return doc;
}

inline Document parse(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '\t') {
      out += "\\t";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

inline std::string real(double x) {
  std::string s = format_real(x);
  if (std::isfinite(x) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

}  // namespace toml

enum class Engine { pca, langevin };
enum class Tier { full, quick };
enum class InitialKind { uniform, island, stripes, file };

inline std::string to_string(Engine e) { return e == Engine::pca ? "pca" : "langevin"; }
inline std::string to_string(Tier t) { return t == Tier::full ? "full" : "quick"; }
inline std::string to_string(InitialKind k) {
  switch (k) {
    case InitialKind::uniform: return "uniform";
    case InitialKind::island: return "island";
    case InitialKind::stripes: return "stripes";
    case InitialKind::file: return "file";
  }
  return "uniform";
}

struct InitialSpec {
  InitialKind kind = InitialKind::uniform;
  int island_width = 4;
  int island_height = 4;
  int stripe_period = 4;
  int stripe_width = 1;
  std::string file;

  friend bool operator==(const InitialSpec&, const InitialSpec&) = default;
};

struct ScenarioSpec {
  InitialSpec initial;
  // order-parameter runs (cycles)
  int cycles = 1250;
  int realizations = 50;
  int window_start = 750;
  int window_cycles = 500;
  std::vector<double> temperatures = {2.0, 4.0, 5.17, 7.0, 8.0, 9.0, 9.6, 10.5, 11.94, 14.0};
  std::vector<double> pe_values = {0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.08, 0.1, 0.15, 0.2};
  std::vector<double> v_values = {50.0, 100.0};
  // error benchmark
  std::vector<std::string> bench_rules = {"DO_NOTHING", "TOOM", "PI_TOOM"};
  std::vector<double> v_over_T = {5.0, 10.0, 15.0, 20.0, 25.0};
  int warmup_cycles = 200;
  int measure_cycles = 25;
  int bench_realizations = 4;
  // error statistics
  int trajectories = 300;
  int stats_warmup_cycles = 10;
  int stats_measure_cycles = 10;
  std::vector<int> box_sizes = {2, 4, 8, 16};
  int blocks_per_field = 1000;
  int corr_max_dt = 3;
  int corr_radius = 4;
  double k_max = 3.0;
  double k_step = 0.1;
  // correction traces
  int trace_x = 1;
  int trace_y = 1;
  int trace_cycles = 3;
  int trace_every = 10;
  std::vector<double> trace_kappas = {0.5, 1.0, 1.5};
  std::vector<double> trace_temperatures = {0.5, 2.0, 10.0};

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

struct RunConfig {
  Engine engine = Engine::langevin;
  std::uint64_t seed = 0;
  std::string out = "out";
  Tier tier = Tier::full;
  int threads = 1;

  int width = 32;
  int height = 32;
  Boundary boundary = Boundary::periodic;
  int boundary_value = 1;

  FloquetParams floquet;

  std::vector<std::string> pca_rules = {"TOOM", "PI_TOOM"};
  double eps_plus = 0.0;
  double eps_minus = 0.0;

  ScenarioSpec scenario;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

  void validate() const;
  /// Desk-scale CI tier: 16x16, 10 realizations, window from t = 400.
  void apply_quick();
};

inline void RunConfig::apply_quick() {
  tier = Tier::quick;
  width = height = 16;
  scenario.realizations = 10;
  scenario.window_start = 100;
  scenario.window_cycles = 100;
  scenario.cycles = 200;
  scenario.trajectories = std::min(scenario.trajectories, 60);
  scenario.warmup_cycles = std::min(scenario.warmup_cycles, 50);
}

inline void RunConfig::validate() const {
  auto bad = [](const std::string& key, const std::string& why) { throw ConfigError("invalid value for '" + key + "': " + why); };
  if (threads < 1) bad("threads", "must be at least 1");
  if (width < 1) bad("lattice.width", "must be positive");
  if (height < 1) bad("lattice.height", "must be positive");
  if (boundary_value != 1 && boundary_value != -1) bad("lattice.boundary_value", "must be +1 or -1");
  if (!(floquet.v > 0)) bad("floquet.v", "must be positive");
  if (!(floquet.T >= 0) || !std::isfinite(floquet.T)) bad("floquet.T", "temperature must be non-negative");
  if (!(floquet.kappa_f > 0)) bad("floquet.kappa_f", "must be positive");
  if (!(floquet.mass > 0)) bad("floquet.mass", "must be positive");
  if (!(floquet.dt > 0) || std::abs(std::round(1.0 / floquet.dt) * floquet.dt - 1.0) > 1e-9)
    bad("floquet.dt", "must divide 1 exactly");
  if (!rules::is_known(floquet.step2_rule)) bad("floquet.step2_rule", "unknown rule " + floquet.step2_rule);
  if (!rules::is_known(floquet.step4_rule)) bad("floquet.step4_rule", "unknown rule " + floquet.step4_rule);
  try {
    floquet.validate();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    throw ConfigError("invalid floquet parameter: " + (colon == std::string::npos ? msg : msg.substr(colon + 2)));
  }
  if (pca_rules.empty()) bad("pca.rules", "must not be empty");
  for (const auto& r : pca_rules)
    if (!rules::is_known(r)) bad("pca.rules", "unknown rule " + r);
  if (!(eps_plus >= 0 && eps_plus <= 1)) bad("pca.eps_plus", "must be in [0,1]");
  if (!(eps_minus >= 0 && eps_minus <= 1)) bad("pca.eps_minus", "must be in [0,1]");
  if (eps_plus + eps_minus > 1.0) bad("pca.eps_plus", "eps_plus + eps_minus must not exceed 1");

  const auto& s = scenario;
  if (s.cycles < 0) bad("scenario.cycles", "must be non-negative");
  if (s.realizations < 1) bad("scenario.realizations", "must be positive");
  if (s.window_start < 0 || s.window_cycles < 1 || s.window_start + s.window_cycles > s.cycles)
    bad("scenario.window_cycles", "measurement window must lie inside the run");
  for (double t : s.temperatures)
    if (!(t >= 0) || !std::isfinite(t)) bad("scenario.temperatures", "temperatures must be non-negative");
  for (double p : s.pe_values)
    if (!(p >= 0 && p <= 0.5)) bad("scenario.pe_values", "must be in [0, 0.5]");
  for (double v : s.v_values)
    if (!(v > 0)) bad("scenario.v_values", "must be positive");
  for (const auto& r : s.bench_rules)
    if (!rules::is_known(r)) bad("scenario.bench_rules", "unknown rule " + r);
  for (double x : s.v_over_T)
    if (!(x > 0)) bad("scenario.v_over_T", "must be positive");
  if (s.warmup_cycles < 0) bad("scenario.warmup_cycles", "must be non-negative");
  if (s.measure_cycles < 1) bad("scenario.measure_cycles", "must be positive");
  if (s.bench_realizations < 1) bad("scenario.bench_realizations", "must be positive");
  if (s.trajectories < 1) bad("scenario.trajectories", "must be positive");
  if (s.stats_warmup_cycles < 0) bad("scenario.stats_warmup_cycles", "must be non-negative");
  if (s.stats_measure_cycles < 1) bad("scenario.stats_measure_cycles", "must be positive");
  for (int L : s.box_sizes)
    if (L < 1 || L > width || L > height || L > 2 * s.stats_measure_cycles)
      bad("scenario.box_sizes", "box size " + std::to_string(L) + " does not fit the lattice and window");
  if (s.blocks_per_field < 1) bad("scenario.blocks_per_field", "must be positive");
  if (s.corr_max_dt < 0 || s.corr_max_dt >= 2 * s.stats_measure_cycles) bad("scenario.corr_max_dt", "out of range");
  if (s.corr_radius < 0) bad("scenario.corr_radius", "must be non-negative");
  if (!(s.k_max > 0) || !(s.k_step > 0)) bad("scenario.k_max", "k grid must be positive");
  if (s.trace_x < 0 || s.trace_x >= width || s.trace_y < 0 || s.trace_y >= height)
    bad("scenario.trace_x", "site outside the lattice");
  if (s.trace_cycles < 1) bad("scenario.trace_cycles", "must be positive");
  if (s.trace_every < 1) bad("scenario.trace_every", "must be positive");
  for (double k : s.trace_kappas)
    if (!(k > 0)) bad("scenario.trace_kappas", "must be positive");
  for (double t : s.trace_temperatures)
    if (!(t >= 0)) bad("scenario.trace_temperatures", "must be non-negative");
  const auto& in = s.initial;
  if (in.kind == InitialKind::island && (in.island_width < 1 || in.island_height < 1 || in.island_width > width ||
                                         in.island_height > height))
    bad("scenario.island_width", "island does not fit the lattice");
  if (in.kind == InitialKind::stripes && (in.stripe_period < 1 || in.stripe_width < 0 || in.stripe_width > in.stripe_period))
    bad("scenario.stripe_width", "need 0 <= width <= period");
  if (in.kind == InitialKind::file && in.file.empty()) bad("scenario.initial_file", "required when initial = \"file\"");
}

namespace detail {

class Reader {
 public:
  explicit Reader(toml::Document doc) : doc_(std::move(doc)) {}

  template <class F>
  void table(const std::string& name, F&& body) {
    auto it = doc_.find(name);
    if (it == doc_.end()) return;
    current_ = &it->second;
    prefix_ = name.empty() ? "" : name + ".";
    body();
    for (const auto& [k, v] : *current_)
      if (!used_.count(prefix_ + k)) throw ConfigError("unknown key '" + prefix_ + k + "'", v.line);
    current_ = nullptr;
  }

  void check_tables(const std::set<std::string>& known) const {
    for (const auto& [name, kv] : doc_)
      if (!known.count(name)) throw ConfigError("unknown table [" + name + "]", kv.empty() ? 0 : kv.begin()->second.line);
  }

  void get(const std::string& key, double& out) {
    if (const auto* v = find(key)) out = number(*v, key);
  }
  void get(const std::string& key, int& out) {
    if (const auto* v = find(key)) out = integer(*v, key);
  }
  void get(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) out = string(*v, key);
  }
  void get(const std::string& key, std::uint64_t& out) {
    const auto* v = find(key);
    if (!v) return;
    if (const auto* i = std::get_if<std::int64_t>(&v->data)) {
      if (*i < 0) throw ConfigError("invalid value for '" + prefix_ + key + "': must be non-negative", v->line);
      out = static_cast<std::uint64_t>(*i);
      return;
    }
    const std::string s = string(*v, key);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError("invalid value for '" + prefix_ + key + "': not an unsigned integer", v->line);
  }
  void get(const std::string& key, std::vector<double>& out) {
    const auto* v = find(key);
    if (!v) return;
    out.clear();
    for (const auto& e : array(*v, key)) out.push_back(number(e, key));
  }
  void get(const std::string& key, std::vector<int>& out) {
    const auto* v = find(key);
    if (!v) return;
    out.clear();
    for (const auto& e : array(*v, key)) out.push_back(integer(e, key));
  }
  void get(const std::string& key, std::vector<std::string>& out) {
    const auto* v = find(key);
    if (!v) return;
    out.clear();
    for (const auto& e : array(*v, key)) out.push_back(string(e, key));
  }
  template <class E>
  void get_enum(const std::string& key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
    const auto* v = find(key);
    if (!v) return;
    const std::string s = string(*v, key);
    for (const auto& [n, e] : names)
      if (s == n) {
        out = e;
        return;
      }
    throw ConfigError("invalid value for '" + prefix_ + key + "': '" + s + "'", v->line);
  }

 private:
  const toml::Value* find(const std::string& key) {
    auto it = current_->find(key);
    if (it == current_->end()) return nullptr;
    used_.insert(prefix_ + key);
    return &it->second;
  }
  [[noreturn]] void type_error(const toml::Value& v, const std::string& key, const char* want) const {
    throw ConfigError("invalid value for '" + prefix_ + key + "': expected " + want, v.line);
  }
  double number(const toml::Value& v, const std::string& key) const {
    if (const auto* d = std::get_if<double>(&v.data)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v.data)) return static_cast<double>(*i);
    type_error(v, key, "a number");
  }
  int integer(const toml::Value& v, const std::string& key) const {
    const auto* i = std::get_if<std::int64_t>(&v.data);
    if (!i) type_error(v, key, "an integer");
    if (*i < std::numeric_limits<int>::min() || *i > std::numeric_limits<int>::max())
      type_error(v, key, "a 32-bit integer");
    return static_cast<int>(*i);
  }
  std::string string(const toml::Value& v, const std::string& key) const {
    const auto* s = std::get_if<std::string>(&v.data);
    if (!s) type_error(v, key, "a string");
    return *s;
  }
  const toml::Array& array(const toml::Value& v, const std::string& key) const {
    const auto* a = std::get_if<toml::Array>(&v.data);
    if (!a) type_error(v, key, "an array");
    return *a;
  }

  toml::Document doc_;
  std::map<std::string, toml::Value>* current_ = nullptr;
  std::string prefix_;
  std::set<std::string> used_;
};

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  detail::Reader r(toml::parse(text));
  r.check_tables({"", "lattice", "floquet", "pca", "scenario"});
  RunConfig c;
  r.table("", [&] {
    r.get_enum("engine", c.engine, {{"pca", Engine::pca}, {"langevin", Engine::langevin}});
    r.get("seed", c.seed);
    r.get("out", c.out);
    r.get_enum("tier", c.tier, {{"full", Tier::full}, {"quick", Tier::quick}});
    r.get("threads", c.threads);
  });
  r.table("lattice", [&] {
    r.get("width", c.width);
    r.get("height", c.height);
    r.get_enum("boundary", c.boundary, {{"periodic", Boundary::periodic}, {"fixed", Boundary::fixed}});
    r.get("boundary_value", c.boundary_value);
  });
  r.table("floquet", [&] {
    auto& f = c.floquet;
    r.get("v", f.v);
    r.get("F", f.F);
    r.get("T", f.T);
    r.get("kappa_f", f.kappa_f);
    r.get("dt", f.dt);
    r.get("mass", f.mass);
    r.get("step2_rule", f.step2_rule);
    r.get("step4_rule", f.step4_rule);
    r.get("divergence_guard", f.divergence_guard);
    r.get("ramp_time", f.ramp_time);
  });
  r.table("pca", [&] {
    r.get("rules", c.pca_rules);
    r.get("eps_plus", c.eps_plus);
    r.get("eps_minus", c.eps_minus);
  });
  r.table("scenario", [&] {
    auto& s = c.scenario;
    r.get_enum("initial", s.initial.kind,
               {{"uniform", InitialKind::uniform},
                {"island", InitialKind::island},
                {"stripes", InitialKind::stripes},
                {"file", InitialKind::file}});
    r.get("island_width", s.initial.island_width);
    r.get("island_height", s.initial.island_height);
    r.get("stripe_period", s.initial.stripe_period);
    r.get("stripe_width", s.initial.stripe_width);
    r.get("initial_file", s.initial.file);
    r.get("cycles", s.cycles);
    r.get("realizations", s.realizations);
    r.get("window_start", s.window_start);
    r.get("window_cycles", s.window_cycles);
    r.get("temperatures", s.temperatures);
    r.get("pe_values", s.pe_values);
    r.get("v_values", s.v_values);
    r.get("bench_rules", s.bench_rules);
    r.get("v_over_T", s.v_over_T);
    r.get("warmup_cycles", s.warmup_cycles);
    r.get("measure_cycles", s.measure_cycles);
    r.get("bench_realizations", s.bench_realizations);
    r.get("trajectories", s.trajectories);
    r.get("stats_warmup_cycles", s.stats_warmup_cycles);
    r.get("stats_measure_cycles", s.stats_measure_cycles);
    r.get("box_sizes", s.box_sizes);
    r.get("blocks_per_field", s.blocks_per_field);
    r.get("corr_max_dt", s.corr_max_dt);
    r.get("corr_radius", s.corr_radius);
    r.get("k_max", s.k_max);
    r.get("k_step", s.k_step);
    r.get("trace_x", s.trace_x);
    r.get("trace_y", s.trace_y);
    r.get("trace_cycles", s.trace_cycles);
    r.get("trace_every", s.trace_every);
    r.get("trace_kappas", s.trace_kappas);
    r.get("trace_temperatures", s.trace_temperatures);
  });
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace detail {

inline std::string toml_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + toml::real(v[i]);
  return s + "]";
}
inline std::string toml_list(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s + "]";
}
inline std::string toml_list(const std::vector<std::string>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + toml::quote(v[i]);
  return s + "]";
}

}  // namespace detail

/// Fully materialized config; parse_config(to_toml(c)) == c.
inline std::string to_toml(const RunConfig& c) {
  using detail::toml_list;
  using toml::quote;
  using toml::real;
  std::ostringstream o;
  o << "engine = " << quote(to_string(c.engine)) << "\n";
  if (c.seed <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    o << "seed = " << c.seed << "\n";
  else
    o << "seed = " << quote(std::to_string(c.seed)) << "\n";
  o << "out = " << quote(c.out) << "\n";
  o << "tier = " << quote(to_string(c.tier)) << "\n";
  o << "threads = " << c.threads << "\n";

  o << "\n[lattice]\n";
  o << "width = " << c.width << "\n";
  o << "height = " << c.height << "\n";
  o << "boundary = " << quote(c.boundary == Boundary::periodic ? "periodic" : "fixed") << "\n";
  o << "boundary_value = " << c.boundary_value << "\n";

  const auto& f = c.floquet;
  o << "\n[floquet]\n";
  o << "v = " << real(f.v) << "\n";
  o << "F = " << real(f.F) << "\n";
  o << "T = " << real(f.T) << "\n";
  o << "kappa_f = " << real(f.kappa_f) << "\n";
  o << "dt = " << real(f.dt) << "\n";
  o << "mass = " << real(f.mass) << "\n";
  o << "step2_rule = " << quote(f.step2_rule) << "\n";
  o << "step4_rule = " << quote(f.step4_rule) << "\n";
  o << "divergence_guard = " << real(f.divergence_guard) << "\n";
  o << "ramp_time = " << real(f.ramp_time) << "\n";

  o << "\n[pca]\n";
  o << "rules = " << toml_list(c.pca_rules) << "\n";
  o << "eps_plus = " << real(c.eps_plus) << "\n";
  o << "eps_minus = " << real(c.eps_minus) << "\n";

  const auto& s = c.scenario;
  o << "\n[scenario]\n";
  o << "initial = " << quote(to_string(s.initial.kind)) << "\n";
  o << "island_width = " << s.initial.island_width << "\n";
  o << "island_height = " << s.initial.island_height << "\n";
  o << "stripe_period = " << s.initial.stripe_period << "\n";
  o << "stripe_width = " << s.initial.stripe_width << "\n";
  o << "initial_file = " << quote(s.initial.file) << "\n";
  o << "cycles = " << s.cycles << "\n";
  o << "realizations = " << s.realizations << "\n";
  o << "window_start = " << s.window_start << "\n";
  o << "window_cycles = " << s.window_cycles << "\n";
  o << "temperatures = " << toml_list(s.temperatures) << "\n";
  o << "pe_values = " << toml_list(s.pe_values) << "\n";
  o << "v_values = " << toml_list(s.v_values) << "\n";
  o << "bench_rules = " << toml_list(s.bench_rules) << "\n";
  o << "v_over_T = " << toml_list(s.v_over_T) << "\n";
  o << "warmup_cycles = " << s.warmup_cycles << "\n";
  o << "measure_cycles = " << s.measure_cycles << "\n";
  o << "bench_realizations = " << s.bench_realizations << "\n";
  o << "trajectories = " << s.trajectories << "\n";
  o << "stats_warmup_cycles = " << s.stats_warmup_cycles << "\n";
  o << "stats_measure_cycles = " << s.stats_measure_cycles << "\n";
  o << "box_sizes = " << toml_list(s.box_sizes) << "\n";
  o << "blocks_per_field = " << s.blocks_per_field << "\n";
  o << "corr_max_dt = " << s.corr_max_dt << "\n";
  o << "corr_radius = " << s.corr_radius << "\n";
  o << "k_max = " << real(s.k_max) << "\n";
  o << "k_step = " << real(s.k_step) << "\n";
  o << "trace_x = " << s.trace_x << "\n";
  o << "trace_y = " << s.trace_y << "\n";
  o << "trace_cycles = " << s.trace_cycles << "\n";
  o << "trace_every = " << s.trace_every << "\n";
  o << "trace_kappas = " << toml_list(s.trace_kappas) << "\n";
  o << "trace_temperatures = " << toml_list(s.trace_temperatures) << "\n";
  return o.str();
}

}  // namespace toomdtc
