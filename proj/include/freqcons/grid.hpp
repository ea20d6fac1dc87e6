#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "freqcons/errors.hpp"

namespace freqcons {

/// Dense row-major 2-D array. Rows index the first frequency axis (u / x),
/// columns the second (v / y).
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw InvalidInput("grid dimensions must be positive, got " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
  }

  Grid(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (rows == 0 || cols == 0) {
      throw InvalidInput("grid dimensions must be positive, got " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
    if (data_.size() != rows * cols) {
      throw InvalidInput("grid expects " + std::to_string(rows * cols) + " values, got " +
                         std::to_string(data_.size()));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() & noexcept { return data_; }
  std::span<const T> values() const& noexcept { return data_; }
  // A span into a temporary grid would dangle.
  std::span<const T> values() && = delete;

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Grid& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;

/// One channel of one frame; values in [0, 1].
using FrameGrid = RealGrid;

/// Index layout of a frequency-domain grid.
enum class Layout : unsigned { Unshifted = 0, Shifted = 1 };

inline const char* to_string(Layout layout) noexcept {
  return layout == Layout::Shifted ? "shifted" : "unshifted";
}

/// A frame is one (luma) or three (RGB) channels of identical size.
class Frame {
 public:
  Frame() = default;

  explicit Frame(std::vector<FrameGrid> channels) : channels_(std::move(channels)) {
    if (channels_.empty()) {
      throw InvalidInput("frame needs at least one channel");
    }
    for (const auto& ch : channels_) {
      if (!ch.same_shape(channels_.front())) {
        throw InvalidInput("frame channels must share dimensions");
      }
    }
  }

  explicit Frame(FrameGrid luma) : Frame(std::vector<FrameGrid>{std::move(luma)}) {}

  std::size_t channel_count() const noexcept { return channels_.size(); }
  std::size_t rows() const noexcept { return channels_.empty() ? 0 : channels_.front().rows(); }
  std::size_t cols() const noexcept { return channels_.empty() ? 0 : channels_.front().cols(); }

  const FrameGrid& channel(std::size_t c) const { return channels_.at(c); }
  FrameGrid& channel(std::size_t c) { return channels_.at(c); }
  const std::vector<FrameGrid>& channels() const noexcept { return channels_; }

  bool same_shape(const Frame& other) const noexcept {
    return channel_count() == other.channel_count() && rows() == other.rows() &&
           cols() == other.cols();
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::vector<FrameGrid> channels_;
};

/// ITU-R BT.601 luma. Single-channel frames are returned unchanged.
inline FrameGrid to_luma(const Frame& frame) {
  if (frame.channel_count() == 1) {
    return frame.channel(0);
  }
  if (frame.channel_count() != 3) {
    throw InvalidInput("luma conversion needs 1 or 3 channels, got " +
                       std::to_string(frame.channel_count()));
  }
  const auto& r = frame.channel(0);
  const auto& g = frame.channel(1);
  const auto& b = frame.channel(2);
  FrameGrid out(r.rows(), r.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  }
  return out;
}

template <typename T>
bool all_finite(const Grid<T>& grid) noexcept {
  return std::all_of(grid.values().begin(), grid.values().end(),
                     [](const T& v) { return std::isfinite(v); });
}

inline bool all_finite(const Frame& frame) noexcept {
  return std::all_of(frame.channels().begin(), frame.channels().end(),
                     [](const FrameGrid& g) { return all_finite(g); });
}

inline void require_same_shape(const Frame& a, const Frame& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvalidInput(std::string(what) + ": frame shapes differ (" + std::to_string(a.channel_count()) +
                       "x" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                       std::to_string(b.channel_count()) + "x" + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()) + ")");
  }
}

}  // namespace freqcons
