#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crossmask/error.hpp"

namespace crossmask {

/// Dense row-major H x W grid.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }
  const T& operator()(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

/// Soft mask weights in [0, 1]. Pseudo masks and their initial forms.
using MaskGrid = Grid<double>;
/// Per-pixel category index, 0 = background.
using LabelMap = Grid<std::uint8_t>;
/// 0/1 mask used by metrics.
using BinaryMask = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    fail(ErrorKind::DimensionMismatch,
         std::string(what) + ": " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
             " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
}

template <typename T>
std::size_t count_positive(const Grid<T>& grid) {
  std::size_t n = 0;
  for (const T& v : grid) n += v > T{} ? 1 : 0;
  return n;
}

template <typename T>
BinaryMask binarize(const Grid<T>& grid) {
  BinaryMask out(grid.width(), grid.height());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = grid[i] > T{} ? 1 : 0;
  return out;
}

}  // namespace crossmask
