// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace svs {

/// Dense H x W x C raster with interleaved channels, double precision.
/// Used for RGB images (c=3), depth/disparity/mask maps (c=1) and feature
/// maps (c up to a few dozen). Channels of one pixel are contiguous, which
/// keeps bilinear gathers cache-friendly.
struct Grid {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Grid() = default;
  Grid(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  size_t size() const { return data.size(); }
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }

  double& at(int x, int y, int c = 0) {
    assert(in_bounds(x, y) && c >= 0 && c < channels);
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c = 0) const {
    assert(in_bounds(x, y) && c >= 0 && c < channels);
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  const double* pixel(int x, int y) const {
    return &data[(static_cast<size_t>(y) * width + x) * channels];
  }
  double* pixel(int x, int y) {
    return &data[(static_cast<size_t>(y) * width + x) * channels];
  }

  bool same_shape(const Grid& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

/// Bilinear sample of one channel with border clamp. (x, y) in pixel-center
/// coordinates.
double sample_bilinear(const Grid& g, double x, double y, int c = 0);

/// Bilinear sample of all channels into out[0..channels).
void sample_bilinear_all(const Grid& g, double x, double y, double* out);

/// 2x average-pool downsampling (odd trailing row/column folded into the
/// last pool). All channels.
Grid downsample2(const Grid& g);

/// Bilinear upsample to an exact target size.
Grid upsample_bilinear(const Grid& g, int out_w, int out_h);

/// Separable box filter of odd radius r (window 2r+1), border clamp.
Grid box_filter(const Grid& g, int radius);

/// RGB -> luminance (Rec.601 weights).
Grid to_gray(const Grid& rgb);

}  // namespace svs
