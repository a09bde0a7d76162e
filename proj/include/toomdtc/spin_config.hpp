#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace toomdtc {

using Spin = std::int8_t;

inline const std::vector<Spin>& binary_states() {
  static const std::vector<Spin> states{-1, +1};
  return states;
}

enum class Boundary { periodic, fixed };

/// 2D grid of discrete spins. Cells are stored row-major, index = y * width + x.
class SpinConfig {
 public:
  SpinConfig() = default;

  SpinConfig(int width, int height, Spin fill = +1, Boundary boundary = Boundary::periodic,
             Spin boundary_value = +1, std::vector<Spin> states = binary_states())
      : width_(width), height_(height), boundary_(boundary), boundary_value_(boundary_value),
        states_(std::move(states)) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("SpinConfig: dimensions must be positive");
    if (states_.empty()) throw std::invalid_argument("SpinConfig: empty state set");
    std::sort(states_.begin(), states_.end());
    check_state(fill);
    if (boundary_ == Boundary::fixed) check_state(boundary_value_);
    cells_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return cells_.size(); }
  Boundary boundary() const noexcept { return boundary_; }
  Spin boundary_value() const noexcept { return boundary_value_; }
  const std::vector<Spin>& states() const noexcept { return states_; }
  bool is_binary() const noexcept { return states_ == binary_states(); }

  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width_ + x; }

  Spin at(int x, int y) const {
    if (x < 0 || x >= width_ || y < 0 || y >= height_) throw std::out_of_range("SpinConfig::at");
    return cells_[index(x, y)];
  }

  void set(int x, int y, Spin s) {
    if (x < 0 || x >= width_ || y < 0 || y >= height_) throw std::out_of_range("SpinConfig::set");
    check_state(s);
    cells_[index(x, y)] = s;
  }

  /// Value at (x, y) with the boundary condition applied to out-of-range coordinates.
  Spin neighbor(int x, int y) const noexcept {
    if (boundary_ == Boundary::periodic) {
      x %= width_;
      if (x < 0) x += width_;
      y %= height_;
      if (y < 0) y += height_;
      return cells_[index(x, y)];
    }
    if (x < 0 || x >= width_ || y < 0 || y >= height_) return boundary_value_;
    return cells_[index(x, y)];
  }

  std::vector<Spin>& cells() noexcept { return cells_; }
  const std::vector<Spin>& cells() const noexcept { return cells_; }

  bool contains_state(Spin s) const noexcept {
    return std::binary_search(states_.begin(), states_.end(), s);
  }

  bool valid() const noexcept {
    return cells_.size() == static_cast<std::size_t>(width_) * height_ &&
           std::all_of(cells_.begin(), cells_.end(), [&](Spin s) { return contains_state(s); });
  }

  /// Same geometry and state set, cell contents copied from `cells`.
  SpinConfig with_cells(std::vector<Spin> cells) const {
    if (cells.size() != cells_.size()) throw std::invalid_argument("SpinConfig: cell count mismatch");
    SpinConfig out = *this;
    out.cells_ = std::move(cells);
    return out;
  }

  friend bool operator==(const SpinConfig& a, const SpinConfig& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.cells_ == b.cells_;
  }

 private:
  void check_state(Spin s) const {
    if (!contains_state(s)) throw std::invalid_argument("SpinConfig: value " + std::to_string(s) + " not in state set");
  }

  int width_ = 0;
  int height_ = 0;
  Boundary boundary_ = Boundary::periodic;
  Spin boundary_value_ = +1;
  std::vector<Spin> states_ = binary_states();
  std::vector<Spin> cells_;
};

inline SpinConfig negate(const SpinConfig& c) {
  if (!c.is_binary()) throw std::invalid_argument("negate: binary state set required");
  auto cells = c.cells();
  for (auto& s : cells) s = static_cast<Spin>(-s);
  return c.with_cells(std::move(cells));
}

inline SpinConfig checkerboard(int width, int height) {
  SpinConfig c(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) c.set(x, y, (x + y) % 2 == 0 ? Spin{+1} : Spin{-1});
  return c;
}

// ---- text grid: one row per line, '+' / '-', row y = 0 first ----

inline void write_text(std::ostream& os, const SpinConfig& c) {
  if (!c.is_binary()) throw std::invalid_argument("write_text: binary state set required");
  for (int y = 0; y < c.height(); ++y) {
    for (int x = 0; x < c.width(); ++x) os << (c.at(x, y) > 0 ? '+' : '-');
    os << '\n';
  }
}

inline std::string to_text(const SpinConfig& c) {
  std::ostringstream os;
  write_text(os, c);
  return os.str();
}

inline SpinConfig read_text(std::istream& is) {
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw std::runtime_error("read_text: empty grid");
  const int width = static_cast<int>(rows.front().size());
  SpinConfig c(width, static_cast<int>(rows.size()));
  for (std::size_t y = 0; y < rows.size(); ++y) {
    if (static_cast<int>(rows[y].size()) != width)
      throw std::runtime_error("read_text: ragged row " + std::to_string(y + 1));
    for (int x = 0; x < width; ++x) {
      char ch = rows[y][x];
      if (ch != '+' && ch != '-')
        throw std::runtime_error("read_text: bad character at row " + std::to_string(y + 1));
      c.set(x, static_cast<int>(y), ch == '+' ? Spin{+1} : Spin{-1});
    }
  }
  return c;
}

// ---- binary bitfield: "PCA1", width, height, step (u32 LE), then bits ----
// Bit i (row-major cell index) lives in byte i / 8 at bit position i % 8; 1 encodes +1.

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                        static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b.data(), 4);
}
inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw std::runtime_error("truncated header");
  return b[0] | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}
}  // namespace detail

inline void write_binary(std::ostream& os, const SpinConfig& c, std::uint32_t step) {
  if (!c.is_binary()) throw std::invalid_argument("write_binary: binary state set required");
  os.write("PCA1", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(c.width()));
  detail::put_u32(os, static_cast<std::uint32_t>(c.height()));
  detail::put_u32(os, step);
  std::vector<unsigned char> bytes((c.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.cells()[i] > 0) bytes[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

struct StampedConfig {
  SpinConfig config;
  std::uint32_t step = 0;
};

inline StampedConfig read_binary(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || std::string(magic.data(), 4) != "PCA1")
    throw std::runtime_error("read_binary: bad magic");
  const auto width = detail::get_u32(is);
  const auto height = detail::get_u32(is);
  const auto step = detail::get_u32(is);
  if (width == 0 || height == 0 || width > (1u << 16) || height > (1u << 16))
    throw std::runtime_error("read_binary: bad dimensions");
  SpinConfig c(static_cast<int>(width), static_cast<int>(height));
  std::vector<unsigned char> bytes((c.size() + 7) / 8);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw std::runtime_error("read_binary: truncated bitfield");
  for (std::size_t i = 0; i < c.size(); ++i)
    c.cells()[i] = (bytes[i / 8] >> (i % 8)) & 1u ? Spin{+1} : Spin{-1};
  return {std::move(c), step};
}

}  // namespace toomdtc
