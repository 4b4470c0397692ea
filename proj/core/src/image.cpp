// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/image.hpp"

#include <algorithm>
#include <cmath>

namespace svs {

namespace {
inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }
}  // namespace

double sample_bilinear(const Grid& g, double x, double y, int c) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double ax = x - x0;
  const double ay = y - y0;
  const int x0c = clampi(x0, 0, g.width - 1);
  const int x1c = clampi(x0 + 1, 0, g.width - 1);
  const int y0c = clampi(y0, 0, g.height - 1);
  const int y1c = clampi(y0 + 1, 0, g.height - 1);
  const double v00 = g.at(x0c, y0c, c);
  const double v10 = g.at(x1c, y0c, c);
  const double v01 = g.at(x0c, y1c, c);
  const double v11 = g.at(x1c, y1c, c);
  return (1.0 - ay) * ((1.0 - ax) * v00 + ax * v10) +
         ay * ((1.0 - ax) * v01 + ax * v11);
}

void sample_bilinear_all(const Grid& g, double x, double y, double* out) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double ax = x - x0;
  const double ay = y - y0;
  const int x0c = clampi(x0, 0, g.width - 1);
  const int x1c = clampi(x0 + 1, 0, g.width - 1);
  const int y0c = clampi(y0, 0, g.height - 1);
  const int y1c = clampi(y0 + 1, 0, g.height - 1);
  const double* p00 = g.pixel(x0c, y0c);
  const double* p10 = g.pixel(x1c, y0c);
  const double* p01 = g.pixel(x0c, y1c);
  const double* p11 = g.pixel(x1c, y1c);
  const double w00 = (1.0 - ay) * (1.0 - ax);
  const double w10 = (1.0 - ay) * ax;
  const double w01 = ay * (1.0 - ax);
  const double w11 = ay * ax;
  for (int c = 0; c < g.channels; ++c)
    out[c] = w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c];
}

Grid downsample2(const Grid& g) {
  const int ow = std::max(1, g.width / 2);
  const int oh = std::max(1, g.height / 2);
  Grid out(ow, oh, g.channels);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const int x1 = std::min(2 * x + 1, g.width - 1);
      const int y1 = std::min(2 * y + 1, g.height - 1);
      for (int c = 0; c < g.channels; ++c) {
        out.at(x, y, c) = 0.25 * (g.at(2 * x, 2 * y, c) + g.at(x1, 2 * y, c) +
                                  g.at(2 * x, y1, c) + g.at(x1, y1, c));
      }
    }
  }
  return out;
}

Grid upsample_bilinear(const Grid& g, int out_w, int out_h) {
  Grid out(out_w, out_h, g.channels);
  const double sx = static_cast<double>(g.width) / out_w;
  const double sy = static_cast<double>(g.height) / out_h;
  std::vector<double> buf(g.channels);
  for (int y = 0; y < out_h; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < out_w; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      sample_bilinear_all(g, src_x, src_y, buf.data());
      for (int c = 0; c < g.channels; ++c) out.at(x, y, c) = buf[c];
    }
  }
  return out;
}

Grid box_filter(const Grid& g, int radius) {
  if (radius <= 0) return g;
  const double inv = 1.0 / (2 * radius + 1);
  Grid tmp(g.width, g.height, g.channels);
  // Horizontal pass.
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      for (int c = 0; c < g.channels; ++c) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k)
          s += g.at(clampi(x + k, 0, g.width - 1), y, c);
        tmp.at(x, y, c) = s * inv;
      }
    }
  }
  Grid out(g.width, g.height, g.channels);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      for (int c = 0; c < g.channels; ++c) {
        double s = 0.0;
        for (int k = -radius; k <= radius; ++k)
          s += tmp.at(x, clampi(y + k, 0, g.height - 1), c);
        out.at(x, y, c) = s * inv;
      }
    }
  }
  return out;
}

Grid to_gray(const Grid& rgb) {
  if (rgb.channels == 1) return rgb;
  Grid out(rgb.width, rgb.height, 1);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x) {
      const double* p = rgb.pixel(x, y);
      out.at(x, y) = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  return out;
}

}  // namespace svs
