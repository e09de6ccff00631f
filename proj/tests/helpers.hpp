#pragma once

#include <random>

#include "nca/grid.hpp"
#include "nca/model.hpp"

namespace testing_util {

template <typename T>
nca::BasicModelWeights<T> random_weights(std::uint32_t seed, nca::Variant variant = nca::Variant::kA,
                                         double fire_rate = 1.0, double scale = 0.1) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  nca::BasicModelWeights<T> w{nca::Parameters<T>::zeros(), variant, fire_rate};
  w.params.for_each([&](std::span<T> t) {
    for (T& v : t) v = static_cast<T>(u(rng));
  });
  return w;
}

// A patch of living cells with random channel values, surrounded by dead space.
template <typename T>
nca::BasicCellGrid<T> random_state(int width, int height, std::uint32_t seed, int margin = 2) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.7);
  std::uniform_real_distribution<double> alpha(0.0, 1.0);
  nca::BasicCellGrid<T> g(width, height);
  for (int y = margin; y < height - margin; ++y)
    for (int x = margin; x < width - margin; ++x) {
      for (int c = 0; c < nca::kChannels; ++c) g.at(x, y, c) = static_cast<T>(u(rng));
      g.at(x, y, nca::kAlpha) = static_cast<T>(alpha(rng));
    }
  return g;
}

}  // namespace testing_util
