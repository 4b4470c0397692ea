// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/image.hpp"

#include <cmath>
#include <random>

#include "doctest.h"

using namespace svs;

namespace {

Grid random_grid(int w, int h, int c, unsigned long long seed) {
  Grid g(w, h, c);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : g.data) v = u(rng);
  return g;
}

}  // namespace

TEST_CASE("bilinear sampling at integer coordinates returns the stored value") {
  const Grid g = random_grid(9, 7, 3, 1);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(sample_bilinear(g, x, y, c) == doctest::Approx(g.at(x, y, c)));
}

TEST_CASE("bilinear sampling reproduces an affine ramp exactly") {
  Grid g(16, 12, 1);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) g.at(x, y) = 0.3 * x - 0.2 * y + 0.5;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ux(0.0, 15.0), uy(0.0, 11.0);
  for (int i = 0; i < 200; ++i) {
    const double x = ux(rng), y = uy(rng);
    CHECK(sample_bilinear(g, x, y, 0) ==
          doctest::Approx(0.3 * x - 0.2 * y + 0.5).epsilon(1e-12));
  }
}

TEST_CASE("bilinear sampling clamps outside the border") {
  const Grid g = random_grid(5, 5, 1, 3);
  CHECK(sample_bilinear(g, -3.0, 2.0, 0) == doctest::Approx(g.at(0, 2)));
  CHECK(sample_bilinear(g, 10.0, 2.0, 0) == doctest::Approx(g.at(4, 2)));
}

TEST_CASE("sample_bilinear_all matches per-channel sampling") {
  const Grid g = random_grid(8, 6, 3, 4);
  double buf[3];
  sample_bilinear_all(g, 2.7, 3.1, buf);
  for (int c = 0; c < 3; ++c)
    CHECK(buf[c] == doctest::Approx(sample_bilinear(g, 2.7, 3.1, c)));
}

TEST_CASE("downsample2 averages 2x2 blocks and preserves a constant image") {
  Grid g(8, 6, 2);
  for (double& v : g.data) v = 0.42;
  const Grid d = downsample2(g);
  CHECK(d.width == 4);
  CHECK(d.height == 3);
  for (double v : d.data) CHECK(v == doctest::Approx(0.42));

  Grid h(4, 2, 1);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) h.at(x, y) = x + 10.0 * y;
  const Grid dh = downsample2(h);
  CHECK(dh.at(0, 0) == doctest::Approx(0.25 * (0 + 1 + 10 + 11)));
  CHECK(dh.at(1, 0) == doctest::Approx(0.25 * (2 + 3 + 12 + 13)));
}

TEST_CASE("upsample then mean is preserved for smooth content") {
  Grid g(6, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x) g.at(x, y) = std::sin(0.3 * x) + 0.1 * y;
  const Grid u = upsample_bilinear(g, 12, 8);
  CHECK(u.width == 12);
  CHECK(u.height == 8);
  double mg = 0.0, mu = 0.0;
  for (double v : g.data) mg += v;
  for (double v : u.data) mu += v;
  mg /= g.data.size();
  mu /= u.data.size();
  CHECK(std::abs(mg - mu) < 0.05);
}

TEST_CASE("box filter of a constant image is the same constant") {
  Grid g(10, 10, 1);
  for (double& v : g.data) v = 0.77;
  const Grid f = box_filter(g, 3);
  for (double v : f.data) CHECK(v == doctest::Approx(0.77));
}

TEST_CASE("box filter interior value equals the window mean") {
  const Grid g = random_grid(11, 11, 1, 9);
  const Grid f = box_filter(g, 2);
  double mean = 0.0;
  for (int dy = -2; dy <= 2; ++dy)
    for (int dx = -2; dx <= 2; ++dx) mean += g.at(5 + dx, 5 + dy);
  mean /= 25.0;
  CHECK(f.at(5, 5) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("to_gray uses the Rec.601 weights") {
  Grid g(1, 1, 3);
  g.at(0, 0, 0) = 1.0;
  g.at(0, 0, 1) = 0.5;
  g.at(0, 0, 2) = 0.25;
  const Grid y = to_gray(g);
  CHECK(y.at(0, 0) ==
        doctest::Approx(0.299 * 1.0 + 0.587 * 0.5 + 0.114 * 0.25).epsilon(1e-12));
}
