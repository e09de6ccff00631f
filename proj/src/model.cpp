#include "nca/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nca {

Variant parse_variant(char c) {
  switch (c) {
    case 'A':
    case 'a':
      return Variant::kA;
    case 'B':
    case 'b':
      return Variant::kB;
    case 'C':
    case 'c':
      return Variant::kC;
    default:
      throw Error(ErrorCode::kInvalidArgument, std::string("unknown model variant '") + c + "'");
  }
}

const PerceptionKernels& PerceptionKernels::standard() {
  static const PerceptionKernels kernels{
      {{{0, 0, 0}, {0, 1, 0}, {0, 0, 0}}},
      {{{-1 / 8.0, 0, 1 / 8.0}, {-2 / 8.0, 0, 2 / 8.0}, {-1 / 8.0, 0, 1 / 8.0}}},
      {{{-1 / 8.0, -2 / 8.0, -1 / 8.0}, {0, 0, 0}, {1 / 8.0, 2 / 8.0, 1 / 8.0}}},
  };
  return kernels;
}

template <typename T>
Parameters<T> Parameters<T>::zeros() {
  return {RowMatrix<T>::Zero(kPerceptionSize, kHiddenWidth), RowVector<T>::Zero(kHiddenWidth),
          RowMatrix<T>::Zero(kHiddenWidth, kChannels), RowVector<T>::Zero(kChannels)};
}

template <typename T>
BasicModelWeights<T> BasicModelWeights<T>::initialized(Variant variant, double fire_rate, std::uint64_t seed) {
  if (!(fire_rate > 0.0 && fire_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fire rate must lie in (0, 1]");
  }
  BasicModelWeights w{Parameters<T>::zeros(), variant, fire_rate};
  StepRng rng(seed);
  const double limit = std::sqrt(6.0 / (kPerceptionSize + kHiddenWidth));
  for (Eigen::Index i = 0; i < w.params.w1.size(); ++i) {
    w.params.w1.data()[i] = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
  }
  return w;
}

template struct Parameters<float>;
template struct Parameters<double>;
template struct BasicModelWeights<float>;
template struct BasicModelWeights<double>;

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + (index + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

int StepRng::uniform_int(int lo, int hi) {
  if (hi < lo) throw Error(ErrorCode::kInvalidArgument, "empty integer range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return lo + static_cast<int>(r % span);
}

namespace {

template <typename T>
void perceive_cell(const BasicCellGrid<T>& grid, int x, int y, T* row) {
  static const PerceptionKernels& k = PerceptionKernels::standard();
  const auto center = grid.cell(x, y);
  std::copy(center.begin(), center.end(), row);
  T* sx = row + kChannels;
  T* sy = row + 2 * kChannels;
  std::fill(sx, sx + 2 * kChannels, T(0));
  for (int dy = -1; dy <= 1; ++dy) {
    const int ny = y + dy;
    if (ny < 0 || ny >= grid.height()) continue;
    for (int dx = -1; dx <= 1; ++dx) {
      const int nx = x + dx;
      if (nx < 0 || nx >= grid.width()) continue;
      const T kx = static_cast<T>(k.sobel_x[dy + 1][dx + 1]);
      const T ky = static_cast<T>(k.sobel_y[dy + 1][dx + 1]);
      if (kx == T(0) && ky == T(0)) continue;
      const auto v = grid.cell(nx, ny);
      for (int c = 0; c < kChannels; ++c) {
        sx[c] += kx * v[c];
        sy[c] += ky * v[c];
      }
    }
  }
}

// 3x3 max-pool of alpha > threshold, written into `bits` (one byte per cell).
template <typename T>
void alive_bits(const BasicCellGrid<T>& grid, std::vector<std::uint8_t>& bits) {
  const AliveMask mask = alive_mask(grid);
  bits.assign(mask.bits().begin(), mask.bits().end());
}

}  // namespace

template <typename T>
RowMatrix<T> perceive(const BasicCellGrid<T>& grid) {
  RowMatrix<T> out(grid.cell_count(), kPerceptionSize);
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) perceive_cell(grid, x, y, out.row(y * grid.width() + x).data());
  }
  return out;
}

template RowMatrix<float> perceive(const BasicCellGrid<float>&);
template RowMatrix<double> perceive(const BasicCellGrid<double>&);

template <typename T>
std::array<T, kChannels> cell_delta(std::span<const T, kPerceptionSize> perception, const Parameters<T>& params) {
  Eigen::Map<const RowVector<T>> p(perception.data(), kPerceptionSize);
  const RowVector<T> hidden = (p * params.w1 + params.b1).cwiseMax(T(0));
  const RowVector<T> delta = hidden * params.w2 + params.b2;
  std::array<T, kChannels> out;
  std::copy(delta.data(), delta.data() + kChannels, out.begin());
  return out;
}

template std::array<float, kChannels> cell_delta(std::span<const float, kPerceptionSize>, const Parameters<float>&);
template std::array<double, kChannels> cell_delta(std::span<const double, kPerceptionSize>, const Parameters<double>&);

template <typename T>
void Stepper<T>::step(const BasicCellGrid<T>& in, const BasicModelWeights<T>& weights, StepRng& rng,
                      BasicCellGrid<T>& out, StepRecord<T>* record) {
  const int width = in.width();
  const int height = in.height();
  const int n = in.cell_count();
  if (out.width() != width || out.height() != height) out = BasicCellGrid<T>(width, height);

  // One draw per cell in row-major order, whether or not the cell is evaluated.
  draws_.resize(n);
  rng.fill_uniform(draws_);

  alive_bits(in, pre_alive_);
  // Cells within one step of a living cell are copied forward; the fired
  // subset of them is run through the network.
  near_.assign(n, 0);
  cells_.clear();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      bool near = false;
      for (int dy = -1; dy <= 1 && !near; ++dy) {
        const int ny = y + dy;
        if (ny < 0 || ny >= height) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx;
          if (nx >= 0 && nx < width && pre_alive_[ny * width + nx]) {
            near = true;
            break;
          }
        }
      }
      if (!near) continue;
      near_[y * width + x] = 1;
      if (draws_[y * width + x] < weights.fire_rate) cells_.push_back(y * width + x);
    }
  }

  const auto count = static_cast<Eigen::Index>(cells_.size());
  perception_.resize(count, kPerceptionSize);
  for (Eigen::Index i = 0; i < count; ++i) {
    perceive_cell(in, cells_[i] % width, cells_[i] / width, perception_.row(i).data());
  }
  if (count > 0) {
    hidden_.noalias() = perception_ * weights.params.w1;
    hidden_.rowwise() += weights.params.b1;
    hidden_ = hidden_.cwiseMax(T(0));
    delta_.noalias() = hidden_ * weights.params.w2;
    delta_.rowwise() += weights.params.b2;
  }

  auto src = in.data();
  auto dst = out.data();
  std::fill(dst.begin(), dst.end(), T(0));
  for (int c = 0; c < n; ++c) {
    if (near_[c]) std::copy_n(src.data() + static_cast<size_t>(c) * kChannels, kChannels, dst.data() + static_cast<size_t>(c) * kChannels);
  }
  for (Eigen::Index i = 0; i < count; ++i) {
    T* d = dst.data() + static_cast<size_t>(cells_[i]) * kChannels;
    const T* delta = delta_.row(i).data();
    for (int ch = 0; ch < kChannels; ++ch) d[ch] += delta[ch];
  }

  survives_.assign(n, 0);
  for (int c = 0; c < n; ++c) {
    if (!pre_alive_[c]) continue;
    const int x = c % width;
    const int y = c / width;
    bool post = false;
    for (int dy = -1; dy <= 1 && !post; ++dy) {
      const int ny = y + dy;
      if (ny < 0 || ny >= height) continue;
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx;
        if (nx >= 0 && nx < width && dst[(static_cast<size_t>(ny) * width + nx) * kChannels + kAlpha] > kAliveThreshold) {
          post = true;
          break;
        }
      }
    }
    survives_[c] = post ? 1 : 0;
  }
  for (int c = 0; c < n; ++c) {
    if (near_[c] && !survives_[c]) std::fill_n(dst.data() + static_cast<size_t>(c) * kChannels, kChannels, T(0));
  }

  if (record) {
    record->survives = survives_;
    record->rows.clear();
    std::vector<Eigen::Index> picked;
    for (Eigen::Index i = 0; i < count; ++i) {
      if (survives_[cells_[i]]) {
        record->rows.push_back(cells_[i]);
        picked.push_back(i);
      }
    }
    const auto m = static_cast<Eigen::Index>(picked.size());
    record->perception.resize(m, kPerceptionSize);
    record->hidden.resize(m, kHiddenWidth);
    for (Eigen::Index j = 0; j < m; ++j) {
      record->perception.row(j) = perception_.row(picked[j]);
      record->hidden.row(j) = hidden_.row(picked[j]);
    }
  }
}

template class Stepper<float>;
template class Stepper<double>;

template <typename T>
BasicCellGrid<T> update_step(const BasicCellGrid<T>& grid, const BasicModelWeights<T>& weights, StepRng& rng) {
  Stepper<T> stepper;
  BasicCellGrid<T> out(grid.width(), grid.height());
  stepper.step(grid, weights, rng, out);
  return out;
}

template BasicCellGrid<float> update_step(const BasicCellGrid<float>&, const BasicModelWeights<float>&, StepRng&);
template BasicCellGrid<double> update_step(const BasicCellGrid<double>&, const BasicModelWeights<double>&, StepRng&);

CellGrid grow(const ModelWeights& weights, const GrowOptions& options, const GrowObserver& observer) {
  if (options.steps < 0) throw Error(ErrorCode::kInvalidArgument, "step count must be non-negative");
  CellGrid grid(options.width, options.height);
  for (const SeedSpec& s : options.seeds) {
    if (!grid.contains(s.x, s.y)) {
      throw Error(ErrorCode::kOutOfBounds,
                  "seed (" + std::to_string(s.x) + ", " + std::to_string(s.y) + ") outside grid");
    }
    if (s.time < 0 || s.time > options.steps) {
      throw Error(ErrorCode::kInvalidArgument, "seed time " + std::to_string(s.time) + " outside [0, steps]");
    }
  }
  StepRng rng(options.rng_seed);
  Stepper<float> stepper;
  CellGrid next(options.width, options.height);
  for (int t = 0;; ++t) {
    for (const SeedSpec& s : options.seeds) {
      if (s.time == t) place_seed(grid, s);
    }
    if (observer) observer(t, grid);
    if (t == options.steps) break;
    stepper.step(grid, weights, rng, next);
    std::swap(grid, next);
  }
  return grid;
}

std::vector<CellGrid> grow_trajectory(const ModelWeights& weights, const GrowOptions& options) {
  std::vector<CellGrid> frames;
  frames.reserve(static_cast<size_t>(options.steps) + 1);
  grow(weights, options, [&](int, const CellGrid& g) { frames.push_back(g); });
  return frames;
}

}  // namespace nca
