#include "nca/grid.hpp"

#include <algorithm>
#include <string>

namespace nca {

template <typename T>
BasicCellGrid<T>::BasicCellGrid(int width, int height) : width_(width), height_(height) {
  if (width < 3 || height < 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "grid dimensions must be at least 3x3, got " + std::to_string(width) + "x" + std::to_string(height));
  }
  data_.assign(static_cast<size_t>(width) * height * kChannels, T(0));
}

template class BasicCellGrid<float>;
template class BasicCellGrid<double>;

size_t AliveMask::count() const { return static_cast<size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

CellGrid new_grid(int width, int height) { return CellGrid(width, height); }

template <typename T>
void place_seed(BasicCellGrid<T>& grid, const SeedSpec& seed) {
  if (!grid.contains(seed.x, seed.y)) {
    throw Error(ErrorCode::kOutOfBounds,
                "seed (" + std::to_string(seed.x) + ", " + std::to_string(seed.y) + ") outside grid");
  }
  if (seed.time < 0) throw Error(ErrorCode::kInvalidArgument, "seed time must be non-negative");
  auto cell = grid.cell(seed.x, seed.y);
  for (int c = 0; c < kAlpha; ++c) cell[c] = T(0);
  for (int c = kAlpha; c < kIdentity; ++c) cell[c] = T(1);
  cell[kIdentity] = static_cast<T>(seed.identity);
}

template void place_seed(BasicCellGrid<float>&, const SeedSpec&);
template void place_seed(BasicCellGrid<double>&, const SeedSpec&);

namespace {

// Separable 3x3 max-pool of a scalar field followed by the strict threshold.
template <typename Get>
AliveMask pooled_threshold(int width, int height, Get&& value) {
  std::vector<double> row_max(static_cast<size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double m = value(x, y);
      if (x > 0) m = std::max(m, value(x - 1, y));
      if (x + 1 < width) m = std::max(m, value(x + 1, y));
      row_max[static_cast<size_t>(y) * width + x] = m;
    }
  }
  AliveMask mask(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double m = row_max[static_cast<size_t>(y) * width + x];
      if (y > 0) m = std::max(m, row_max[static_cast<size_t>(y - 1) * width + x]);
      if (y + 1 < height) m = std::max(m, row_max[static_cast<size_t>(y + 1) * width + x]);
      mask.set(x, y, m > kAliveThreshold);
    }
  }
  return mask;
}

}  // namespace

template <typename T>
AliveMask alive_mask(const BasicCellGrid<T>& grid) {
  return pooled_threshold(grid.width(), grid.height(),
                          [&](int x, int y) { return static_cast<double>(grid.at(x, y, kAlpha)); });
}

template AliveMask alive_mask(const BasicCellGrid<float>&);
template AliveMask alive_mask(const BasicCellGrid<double>&);

AliveMask alive_mask(const IdealImage& image) {
  return pooled_threshold(image.width(), image.height(),
                          [&](int x, int y) { return static_cast<double>(image.at(x, y, 3)); });
}

std::optional<Rect> bounding_box(const AliveMask& mask) {
  std::optional<Rect> box;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      if (!box) {
        box = Rect{x, y, x, y};
        continue;
      }
      box->x_min = std::min(box->x_min, x);
      box->y_min = std::min(box->y_min, y);
      box->x_max = std::max(box->x_max, x);
      box->y_max = std::max(box->y_max, y);
    }
  }
  return box;
}

namespace {

void add_copy(IdealImage& out, const IdealImage& target, Point center) {
  const int x0 = center.x - target.width() / 2;
  const int y0 = center.y - target.height() / 2;
  const bool overlaps = x0 < out.width() && y0 < out.height() && x0 + target.width() > 0 && y0 + target.height() > 0;
  if (!overlaps) {
    throw Error(ErrorCode::kOutOfBounds, "target placed at (" + std::to_string(center.x) + ", " +
                                             std::to_string(center.y) + ") lies entirely outside the grid");
  }
  for (int ty = 0; ty < target.height(); ++ty) {
    const int y = y0 + ty;
    if (y < 0 || y >= out.height()) continue;
    for (int tx = 0; tx < target.width(); ++tx) {
      const int x = x0 + tx;
      if (x < 0 || x >= out.width()) continue;
      for (int c = 0; c < 4; ++c) out.at(x, y, c) += target.at(tx, ty, c);
    }
  }
}

}  // namespace

IdealImage paste_centered(const IdealImage& target, Point center, int width, int height) {
  IdealImage out(width, height);
  add_copy(out, target, center);
  for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

IdealImage composite_ideal(const IdealImage& target, Point center_a, Point center_b, int width, int height) {
  IdealImage out(width, height);
  add_copy(out, target, center_a);
  add_copy(out, target, center_b);
  for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace nca
