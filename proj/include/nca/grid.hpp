#pragma once

// State lattice, seeding, alive masking and idealized comparison images.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nca/error.hpp"

namespace nca {

inline constexpr int kChannels = 17;
inline constexpr int kAlpha = 3;
inline constexpr int kFirstHidden = 4;
inline constexpr int kIdentity = 16;
inline constexpr double kAliveThreshold = 0.1;

// H x W x 17 lattice, row-major (y, x, channel).
template <typename T>
class BasicCellGrid {
 public:
  BasicCellGrid() = default;
  BasicCellGrid(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  int cell_count() const { return width_ * height_; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& at(int x, int y, int channel) { return data_[offset(x, y) + channel]; }
  T at(int x, int y, int channel) const { return data_[offset(x, y) + channel]; }

  std::span<T, kChannels> cell(int x, int y) { return std::span<T, kChannels>(&data_[offset(x, y)], kChannels); }
  std::span<const T, kChannels> cell(int x, int y) const {
    return std::span<const T, kChannels>(&data_[offset(x, y)], kChannels);
  }
  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  template <typename U>
  BasicCellGrid<U> cast() const {
    BasicCellGrid<U> out(width_, height_);
    auto dst = out.data();
    for (size_t i = 0; i < data_.size(); ++i) dst[i] = static_cast<U>(data_[i]);
    return out;
  }

  bool operator==(const BasicCellGrid&) const = default;

 private:
  size_t offset(int x, int y) const { return (static_cast<size_t>(y) * width_ + x) * kChannels; }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using CellGrid = BasicCellGrid<float>;

class AliveMask {
 public:
  AliveMask() = default;
  AliveMask(int width, int height) : width_(width), height_(height), bits_(static_cast<size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int x, int y) const { return bits_[static_cast<size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  size_t count() const;

  bool operator==(const AliveMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Premultiplied RGBA image with values in [0, 1].
class IdealImage {
 public:
  IdealImage() = default;
  IdealImage(int width, int height) : width_(width), height_(height), rgba_(static_cast<size_t>(width) * height * 4, 0.0f) {}

  int width() const { return width_; }
  int height() const { return height_; }
  float& at(int x, int y, int c) { return rgba_[(static_cast<size_t>(y) * width_ + x) * 4 + c]; }
  float at(int x, int y, int c) const { return rgba_[(static_cast<size_t>(y) * width_ + x) * 4 + c]; }
  std::span<float> data() { return rgba_; }
  std::span<const float> data() const { return rgba_; }

  bool operator==(const IdealImage&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> rgba_;
};

struct SeedSpec {
  int x = 0;
  int y = 0;
  int time = 0;
  double identity = 1.0;
};

// Inclusive rectangle.
struct Rect {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min + 1; }
  int height() const { return y_max - y_min + 1; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool operator==(const Rect&) const = default;
};

struct Point {
  int x = 0;
  int y = 0;
};

CellGrid new_grid(int width, int height);

template <typename T>
void place_seed(BasicCellGrid<T>& grid, const SeedSpec& seed);

// bit = max of alpha over the zero-padded 3x3 neighborhood > 0.1.
template <typename T>
AliveMask alive_mask(const BasicCellGrid<T>& grid);

AliveMask alive_mask(const IdealImage& image);

std::optional<Rect> bounding_box(const AliveMask& mask);

// Pastes `target` so that its center pixel (width/2, height/2) lands on `center`.
IdealImage paste_centered(const IdealImage& target, Point center, int width, int height);

// Two pasted copies with saturating (clamped) summation.
IdealImage composite_ideal(const IdealImage& target, Point center_a, Point center_b, int width, int height);

}  // namespace nca
