#include <doctest.h>

#include <random>

#include "nca/grid.hpp"

using namespace nca;

namespace {

IdealImage blob(int w, int h, std::uint32_t seed) {
  IdealImage img(w, h);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.2f, 0.9f);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x)
      for (int c = 0; c < 4; ++c) img.at(x, y, c) = u(rng);
  return img;
}

}  // namespace

TEST_CASE("new_grid is all zero and rejects tiny sizes") {
  const CellGrid g = new_grid(8, 8);
  CHECK(g.data().size() == 8u * 8u * 17u);
  for (float v : g.data()) CHECK(v == 0.0f);
  CHECK(alive_mask(g).count() == 0);
  CHECK_FALSE(bounding_box(alive_mask(g)).has_value());

  CHECK_THROWS_AS(new_grid(2, 8), Error);
  CHECK_THROWS_AS(new_grid(8, 0), Error);
  try {
    new_grid(8, 2);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("place_seed writes exactly one cell") {
  CellGrid g = new_grid(9, 9);
  place_seed(g, SeedSpec{4, 4, 0, 1.0});
  CHECK(g.at(4, 4, kAlpha) == 1.0f);
  CHECK(g.at(4, 4, kIdentity) == 1.0f);
  for (int c = 0; c < 3; ++c) CHECK(g.at(4, 4, c) == 0.0f);
  for (int c = kFirstHidden; c < kIdentity; ++c) CHECK(g.at(4, 4, c) == 1.0f);

  size_t nonzero_cells = 0;
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      bool any = false;
      for (float v : g.cell(x, y)) any = any || v != 0.0f;
      nonzero_cells += any;
    }
  CHECK(nonzero_cells == 1);

  const AliveMask m = alive_mask(g);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) CHECK(m.at(x, y) == (std::abs(x - 4) <= 1 && std::abs(y - 4) <= 1));

  CellGrid z = new_grid(9, 9);
  place_seed(z, SeedSpec{4, 4, 0, 0.0});
  CHECK(z.at(4, 4, kIdentity) == 0.0f);
  CHECK(z.at(4, 4, kAlpha) == 1.0f);
}

TEST_CASE("place_seed rejects bad seeds") {
  CellGrid g = new_grid(8, 8);
  try {
    place_seed(g, SeedSpec{8, 0, 0, 1.0});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfBounds);
  }
  CHECK_THROWS_AS(place_seed(g, SeedSpec{-1, 3, 0, 1.0}), Error);
  CHECK_THROWS_AS(place_seed(g, SeedSpec{3, 3, -1, 1.0}), Error);
}

TEST_CASE("alive threshold is strict") {
  CellGrid g = new_grid(8, 8);
  g.at(4, 4, kAlpha) = 0.1f;
  // 0.1f rounds above 0.1; the stored value must compare against the double threshold.
  const bool expect = static_cast<double>(0.1f) > kAliveThreshold;
  CHECK((alive_mask(g).count() > 0) == expect);

  CellGrid d = new_grid(8, 8);
  auto dg = BasicCellGrid<double>(8, 8);
  dg.at(4, 4, kAlpha) = 0.1;
  CHECK(alive_mask(dg).count() == 0);
  dg.at(4, 4, kAlpha) = 0.1000001;
  CHECK(alive_mask(dg).count() == 9);
}

TEST_CASE("alive mask pools over a zero-padded 3x3 window") {
  CellGrid g = new_grid(5, 5);
  g.at(0, 0, kAlpha) = 1.0f;
  const AliveMask m = alive_mask(g);
  CHECK(m.count() == 4);
  CHECK(m.at(0, 0));
  CHECK(m.at(1, 1));
  CHECK_FALSE(m.at(2, 2));
}

TEST_CASE("bounding boxes") {
  CellGrid g = new_grid(24, 9);
  place_seed(g, SeedSpec{4, 4, 0, 1.0});
  CHECK(bounding_box(alive_mask(g)) == Rect{3, 3, 5, 5});
  place_seed(g, SeedSpec{20, 4, 0, 1.0});
  CHECK(bounding_box(alive_mask(g)) == Rect{3, 3, 21, 5});
  const Rect r{3, 3, 21, 5};
  CHECK(r.width() == 19);
  CHECK(r.height() == 3);
  CHECK(r.area() == 57);
}

TEST_CASE("alive mask is monotone in alpha") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<float> u(0.0f, 0.2f);
  std::uniform_int_distribution<int> cell(0, 11);
  for (int trial = 0; trial < 50; ++trial) {
    CellGrid g = new_grid(12, 12);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x) g.at(x, y, kAlpha) = u(rng);
    const AliveMask before = alive_mask(g);
    g.at(cell(rng), cell(rng), kAlpha) += 0.5f * u(rng);
    const AliveMask after = alive_mask(g);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x)
        if (before.at(x, y)) CHECK(after.at(x, y));
  }
}

TEST_CASE("composite_ideal saturates and is symmetric") {
  const IdealImage t = blob(7, 5, 3);

  const IdealImage same = composite_ideal(t, {10, 10}, {10, 10}, 24, 20);
  const IdealImage one = paste_centered(t, {10, 10}, 24, 20);
  for (size_t i = 0; i < same.data().size(); ++i) CHECK(same.data()[i] == std::min(1.0f, 2.0f * one.data()[i]));

  const IdealImage apart = composite_ideal(t, {5, 5}, {17, 12}, 24, 20);
  const IdealImage a = paste_centered(t, {5, 5}, 24, 20);
  const IdealImage b = paste_centered(t, {17, 12}, 24, 20);
  for (size_t i = 0; i < apart.data().size(); ++i) CHECK(apart.data()[i] == a.data()[i] + b.data()[i]);
  // Pasted copy lands with its center pixel on the requested cell.
  CHECK(a.at(5, 5, 0) == t.at(3, 2, 0));
  CHECK(a.at(2, 3, 1) == t.at(0, 0, 1));

  const IdealImage near = composite_ideal(t, {10, 10}, {12, 11}, 24, 20);
  const IdealImage swapped = composite_ideal(t, {12, 11}, {10, 10}, 24, 20);
  CHECK(near == swapped);
  const IdealImage c = paste_centered(t, {12, 11}, 24, 20);
  for (size_t i = 0; i < near.data().size(); ++i) {
    CHECK(near.data()[i] == std::clamp(one.data()[i] + c.data()[i], 0.0f, 1.0f));
    CHECK(near.data()[i] <= 1.0f);
  }
}

TEST_CASE("composite_ideal clips partial placements and rejects ones fully outside") {
  const IdealImage t = blob(7, 5, 4);
  const IdealImage edge = paste_centered(t, {0, 0}, 10, 10);
  CHECK(edge.at(0, 0, 3) == t.at(3, 2, 3));
  try {
    composite_ideal(t, {5, 5}, {40, 40}, 10, 10);
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfBounds);
  }
}

TEST_CASE("box of a pasted target equals its alpha extent dilated by one") {
  IdealImage t(9, 7);
  for (int y = 2; y <= 4; ++y)
    for (int x = 1; x <= 6; ++x) t.at(x, y, 3) = 0.8f;
  const IdealImage pasted = paste_centered(t, {15, 10}, 30, 20);
  CellGrid g = new_grid(30, 20);
  int x0 = 99, y0 = 99, x1 = -1, y1 = -1;
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 30; ++x) {
      g.at(x, y, kAlpha) = pasted.at(x, y, 3);
      if (pasted.at(x, y, 3) > 0.0f) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  CHECK(bounding_box(alive_mask(g)) == Rect{x0 - 1, y0 - 1, x1 + 1, y1 + 1});
  CHECK(bounding_box(alive_mask(pasted)) == bounding_box(alive_mask(g)));
}
