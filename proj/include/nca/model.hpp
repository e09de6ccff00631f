#pragma once

// The per-cell update rule: fixed-kernel perception, a 51 -> 128 -> 17 dense
// network, stochastic firing and alive masking.

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "nca/grid.hpp"

namespace nca {

inline constexpr int kPerceptionSize = 3 * kChannels;
inline constexpr int kHiddenWidth = 128;

enum class Variant : char { kA = 'A', kB = 'B', kC = 'C' };

inline constexpr std::array<Variant, 3> kAllVariants = {Variant::kA, Variant::kB, Variant::kC};

inline char to_char(Variant v) { return static_cast<char>(v); }
inline int variant_index(Variant v) { return static_cast<char>(v) - 'A'; }
Variant parse_variant(char c);

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using Kernel3 = std::array<std::array<double, 3>, 3>;

// Constant 3x3 kernels, applied as a correlation: response(x, y) =
// sum k[dy + 1][dx + 1] * value(x + dx, y + dy) with zero padding.
struct PerceptionKernels {
  Kernel3 identity;
  Kernel3 sobel_x;
  Kernel3 sobel_y;

  static const PerceptionKernels& standard();
};

// Trainable tensors. Also used for gradients and optimizer moments.
template <typename T>
struct Parameters {
  RowMatrix<T> w1;  // 51 x 128
  RowVector<T> b1;  // 128
  RowMatrix<T> w2;  // 128 x 17
  RowVector<T> b2;  // 17

  static Parameters zeros();

  template <typename U>
  Parameters<U> cast() const {
    return {w1.template cast<U>(), b1.template cast<U>(), w2.template cast<U>(), b2.template cast<U>()};
  }

  // Visits the four tensors in storage order (w1, b1, w2, b2) as flat spans.
  template <typename F>
  void for_each(F&& f) {
    f(std::span<T>(w1.data(), w1.size()));
    f(std::span<T>(b1.data(), b1.size()));
    f(std::span<T>(w2.data(), w2.size()));
    f(std::span<T>(b2.data(), b2.size()));
  }
  template <typename F>
  void for_each(F&& f) const {
    f(std::span<const T>(w1.data(), w1.size()));
    f(std::span<const T>(b1.data(), b1.size()));
    f(std::span<const T>(w2.data(), w2.size()));
    f(std::span<const T>(b2.data(), b2.size()));
  }

  bool operator==(const Parameters& o) const { return w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2; }
};

template <typename T>
struct BasicModelWeights {
  Parameters<T> params;
  Variant variant = Variant::kA;
  double fire_rate = 0.5;

  // Glorot-uniform w1, zero b1, and an all-zero output layer (a do-nothing rule).
  static BasicModelWeights initialized(Variant variant, double fire_rate, std::uint64_t seed);

  template <typename U>
  BasicModelWeights<U> cast() const {
    return {params.template cast<U>(), variant, fire_rate};
  }
};

using ModelWeights = BasicModelWeights<float>;

// splitmix64 finalizer; derives independent stream seeds from (master, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

class StepRng {
 public:
  explicit StepRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // 53-bit uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  void fill_uniform(std::span<double> out) {
    for (double& v : out) v = uniform();
  }

 private:
  std::mt19937_64 engine_;
};

// One row of 51 responses per cell, cells in row-major order. Columns are
// [identity x 17 | sobel_x x 17 | sobel_y x 17].
template <typename T>
RowMatrix<T> perceive(const BasicCellGrid<T>& grid);

template <typename T>
std::array<T, kChannels> cell_delta(std::span<const T, kPerceptionSize> perception, const Parameters<T>& params);

// What backpropagation needs from one forward step.
template <typename T>
struct StepRecord {
  std::vector<int> rows;               // cells that fired and survived
  RowMatrix<T> perception;             // rows x 51
  RowMatrix<T> hidden;                 // rows x 128, post-ReLU
  std::vector<std::uint8_t> survives;  // per cell: alive before and after
};

// Reusable scratch space for stepping one grid. Survival requires being alive
// before the step, and the post-step test at such a cell only reads its 3x3
// neighborhood, so only fired cells adjacent to a pre-step living cell are
// run through the network. The result equals evaluating every cell.
template <typename T>
class Stepper {
 public:
  void step(const BasicCellGrid<T>& in, const BasicModelWeights<T>& weights, StepRng& rng, BasicCellGrid<T>& out,
            StepRecord<T>* record = nullptr);

 private:
  std::vector<double> draws_;
  std::vector<std::uint8_t> pre_alive_;
  std::vector<std::uint8_t> near_;
  std::vector<std::uint8_t> survives_;
  std::vector<int> cells_;  // fired cells near life
  RowMatrix<T> perception_;
  RowMatrix<T> hidden_;
  RowMatrix<T> delta_;
};

template <typename T>
BasicCellGrid<T> update_step(const BasicCellGrid<T>& grid, const BasicModelWeights<T>& weights, StepRng& rng);

struct GrowOptions {
  int width = 48;
  int height = 48;
  int steps = 0;
  std::vector<SeedSpec> seeds;
  std::uint64_t rng_seed = 0;
};

// Called with (t, grid) for t = 0..steps; the grid holds t updates and every
// seed whose time is <= t.
using GrowObserver = std::function<void(int, const CellGrid&)>;

CellGrid grow(const ModelWeights& weights, const GrowOptions& options, const GrowObserver& observer = {});

std::vector<CellGrid> grow_trajectory(const ModelWeights& weights, const GrowOptions& options);

}  // namespace nca
