#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lfg/error.hpp"

namespace lfg {

/// Dense row-major H x W x C grid. Channel index varies fastest.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    require(height >= 0 && width >= 0 && channels >= 1, ErrorCode::kInvalidArgument,
            "grid dimensions must be non-negative with at least one channel");
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  T& operator()(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c = 0) const noexcept {
    return data_[index(y, x, c)];
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  template <typename U>
  bool same_extent(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

/// Per-pixel boolean mask stored as bytes in {0, 1}.
using Mask = Grid<std::uint8_t>;
/// Single-channel real map (confidence, motion probability, depth values).
using ScalarMap = Grid<double>;
using ConfidenceMap = ScalarMap;
using MotionMask = ScalarMap;

/// Per-pixel class probabilities, channels = number of classes.
using SemanticMap = Grid<double>;

inline constexpr int kNumClasses = 7;

/// Per-pixel class index in [0, kNumClasses).
class LabelMap {
 public:
  LabelMap() = default;
  LabelMap(int height, int width, std::uint8_t fill = 0) : labels_(height, width, 1, fill) {}
  explicit LabelMap(Grid<std::uint8_t> labels) : labels_(std::move(labels)) { validate(); }

  int height() const noexcept { return labels_.height(); }
  int width() const noexcept { return labels_.width(); }
  std::uint8_t& operator()(int y, int x) noexcept { return labels_(y, x); }
  std::uint8_t operator()(int y, int x) const noexcept { return labels_(y, x); }
  const Grid<std::uint8_t>& grid() const noexcept { return labels_; }

  void validate() const {
    require(labels_.channels() == 1, ErrorCode::kShapeMismatch, "label map must be single-channel");
    for (auto v : labels_.data()) {
      require(v < kNumClasses, ErrorCode::kOutOfDomain,
              "label index " + std::to_string(v) + " outside [0, 7)");
    }
  }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;

 private:
  Grid<std::uint8_t> labels_;
};

inline void require_same_extent(int h1, int w1, int h2, int w2, const std::string& what) {
  require(h1 == h2 && w1 == w2, ErrorCode::kShapeMismatch,
          what + ": shape " + std::to_string(h1) + "x" + std::to_string(w1) + " vs " +
              std::to_string(h2) + "x" + std::to_string(w2));
}

}  // namespace lfg
