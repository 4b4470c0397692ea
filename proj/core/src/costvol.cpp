// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/costvol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

namespace svs::costvol {
namespace {

void check_range(double near, double far, int m) {
  if (!(far > near) || !(near > 0.0))
    throw std::invalid_argument("planes: need far > near > 0");
  if (m < 2) throw std::invalid_argument("planes: need at least 2 planes");
}

// Midpoint planes of a window [lo, lo + width] written into one pixel.
void fill_window(PlaneSet& set, int x, int y, double lo, double width, int m) {
  const double h = width / m;
  set.interval.at(x, y) = h;
  for (int i = 0; i < m; ++i) set.planes.at(x, y, i) = lo + (i + 0.5) * h;
}

// Window of a given width centered at `center`, shifted (never shrunk) to
// stay inside [near, far].
double shifted_lo(double center, double width, double near, double far) {
  return std::clamp(center - 0.5 * width, near, far - width);
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i / sigma) * (i / sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable convolution of an M-plane volume along x, y, then the plane
// axis, with zero padding. Operates on all channels.
void smooth_volume(std::vector<Grid>& vol, const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size()) / 2;
  const int m = static_cast<int>(vol.size());
  const int w = vol[0].width, h = vol[0].height, ch = vol[0].channels;
  for (Grid& plane : vol) {
    Grid tmp(w, h, ch);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c) {
          double acc = 0.0;
          for (int i = -radius; i <= radius; ++i)
            if (x + i >= 0 && x + i < w)
              acc += kernel[static_cast<size_t>(i + radius)] *
                     plane.at(x + i, y, c);
          tmp.at(x, y, c) = acc;
        }
    Grid out(w, h, ch);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c) {
          double acc = 0.0;
          for (int i = -radius; i <= radius; ++i)
            if (y + i >= 0 && y + i < h)
              acc += kernel[static_cast<size_t>(i + radius)] *
                     tmp.at(x, y + i, c);
          out.at(x, y, c) = acc;
        }
    plane = std::move(out);
  }
  std::vector<Grid> out(vol.size());
  for (int p = 0; p < m; ++p) {
    out[p] = Grid(w, h, ch);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < ch; ++c) {
          double acc = 0.0;
          for (int i = -radius; i <= radius; ++i)
            if (p + i >= 0 && p + i < m)
              acc += kernel[static_cast<size_t>(i + radius)] *
                     vol[static_cast<size_t>(p + i)].at(x, y, c);
          out[p].at(x, y, c) = acc;
        }
  }
  vol = std::move(out);
}

}  // namespace

PlaneSet planes_uniform(int width, int height, double near, double far,
                        int m) {
  check_range(near, far, m);
  if (width < 1 || height < 1)
    throw std::invalid_argument("planes_uniform: empty grid");
  PlaneSet set;
  set.near = near;
  set.far = far;
  set.planes = Grid(width, height, m);
  set.interval = Grid(width, height, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) fill_window(set, x, y, near, far - near, m);
  return set;
}

PlaneSet planes_dgps(const Grid& stereo_depth, const Grid& stereo_mask, int m,
                     double rel_halfwidth, double near, double far) {
  check_range(near, far, m);
  if (!(rel_halfwidth > 0.0) || !(rel_halfwidth < 1.0))
    throw std::invalid_argument("planes_dgps: rel_halfwidth outside (0, 1)");
  if (stereo_depth.width != stereo_mask.width ||
      stereo_depth.height != stereo_mask.height)
    throw std::invalid_argument("planes_dgps: depth/mask shape mismatch");
  PlaneSet set;
  set.near = near;
  set.far = far;
  set.planes = Grid(stereo_depth.width, stereo_depth.height, m);
  set.interval = Grid(stereo_depth.width, stereo_depth.height, 1);
  for (int y = 0; y < stereo_depth.height; ++y)
    for (int x = 0; x < stereo_depth.width; ++x) {
      const double d = stereo_depth.at(x, y);
      // A guide outside [near, far] is as unusable as a masked one: a clamped
      // window could not bracket it, so those pixels take the uniform set.
      if (stereo_mask.at(x, y) > 0.0 && d >= near && d <= far) {
        const double width = std::min(2.0 * rel_halfwidth * d, far - near);
        fill_window(set, x, y, shifted_lo(d, width, near, far), width, m);
      } else {
        fill_window(set, x, y, near, far - near, m);
      }
    }
  return set;
}

CostVolume sweep(const std::vector<features::FeaturePyramid>& pyramids,
                 const std::vector<Intrinsics>& intrinsics,
                 const std::vector<Pose>& poses, int target, int level,
                 const PlaneSet& planes) {
  const int n_views = static_cast<int>(pyramids.size());
  if (n_views < 2)
    throw std::invalid_argument("sweep: need at least 2 source views");
  if (intrinsics.size() != pyramids.size() || poses.size() != pyramids.size())
    throw std::invalid_argument("sweep: per-view array sizes differ");
  if (target < 0 || target >= n_views)
    throw std::invalid_argument("sweep: target view out of range");
  if (level < 0 || level >= features::kPyramidLevels)
    throw std::invalid_argument("sweep: level out of range");

  const Grid& ref = pyramids[static_cast<size_t>(target)]
                        .levels[static_cast<size_t>(level)];
  const int w = ref.width, h = ref.height, ch = ref.channels;
  if (planes.planes.width != w || planes.planes.height != h)
    throw std::invalid_argument("sweep: plane set does not match the level");
  const int m = planes.planes.channels;
  const int scale = 1 << (features::kPyramidLevels - 1 - level);

  std::vector<Intrinsics> k(pyramids.size());
  for (size_t v = 0; v < pyramids.size(); ++v) {
    k[v] = intrinsics[v].scaled(scale);
    const Grid& g = pyramids[v].levels[static_cast<size_t>(level)];
    if (g.width != w || g.height != h || g.channels != ch)
      throw std::invalid_argument("sweep: view feature shapes differ");
  }

  CostVolume out;
  out.planes = planes;
  out.valid_count = Grid(w, h, m);
  out.cost.assign(static_cast<size_t>(m), Grid(w, h, ch));

  // The warp below is the fronto-parallel plane homography evaluated point
  // by point: lifting the target pixel to the plane and projecting into a
  // source view equals applying plane_homography to the pixel, and keeps the
  // behind-camera check robust when the homography's normalization flips
  // sign.
  std::vector<double> sample(static_cast<size_t>(ch));
  std::vector<double> mean(static_cast<size_t>(ch));
  std::vector<double> mean_sq(static_cast<size_t>(ch));
  const Intrinsics& kt = k[static_cast<size_t>(target)];
  const Pose& pt = poses[static_cast<size_t>(target)];
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int p = 0; p < m; ++p) {
        const Vec3 point =
            backproject(Vec2(x, y), planes.planes.at(x, y, p), kt, pt);
        std::fill(mean.begin(), mean.end(), 0.0);
        std::fill(mean_sq.begin(), mean_sq.end(), 0.0);
        int count = 0;
        for (int v = 0; v < n_views; ++v) {
          const Projection proj = project(point, k[static_cast<size_t>(v)],
                                          poses[static_cast<size_t>(v)]);
          if (!proj.inside(k[static_cast<size_t>(v)])) continue;
          sample_bilinear_all(pyramids[static_cast<size_t>(v)]
                                  .levels[static_cast<size_t>(level)],
                              proj.pixel.x(), proj.pixel.y(), sample.data());
          ++count;
          for (int c = 0; c < ch; ++c) {
            mean[static_cast<size_t>(c)] += sample[static_cast<size_t>(c)];
            mean_sq[static_cast<size_t>(c)] +=
                sample[static_cast<size_t>(c)] * sample[static_cast<size_t>(c)];
          }
        }
        out.valid_count.at(x, y, p) = count;
        if (count < 2) continue;
        Grid& slab = out.cost[static_cast<size_t>(p)];
        for (int c = 0; c < ch; ++c) {
          const double mu = mean[static_cast<size_t>(c)] / count;
          const double var = mean_sq[static_cast<size_t>(c)] / count - mu * mu;
          slab.at(x, y, c) = std::max(var, 0.0);
        }
      }
  return out;
}

FeatureVolume regularize(const CostVolume& volume, double tau, double sigma) {
  if (volume.cost.empty()) throw std::invalid_argument("regularize: empty volume");
  if (!(tau > 0.0) || !(sigma > 0.0))
    throw std::invalid_argument("regularize: tau and sigma must be positive");
  const int m = static_cast<int>(volume.cost.size());
  const int w = volume.cost[0].width, h = volume.cost[0].height;
  const int ch = volume.cost[0].channels;

  // Normalized convolution: smooth cost * weight and weight with the same
  // kernel, then divide, so masked voxels neither leak zeros in nor get
  // counted as support.
  std::vector<Grid> weighted(volume.cost);
  std::vector<Grid> weight(static_cast<size_t>(m), Grid(w, h, 1));
  for (int p = 0; p < m; ++p)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const bool valid = volume.valid_count.at(x, y, p) >= 2.0;
        weight[static_cast<size_t>(p)].at(x, y) = valid ? 1.0 : 0.0;
        if (!valid)
          for (int c = 0; c < ch; ++c)
            weighted[static_cast<size_t>(p)].at(x, y, c) = 0.0;
      }
  const std::vector<double> kernel = gaussian_kernel(sigma);
  smooth_volume(weighted, kernel);
  smooth_volume(weight, kernel);

  FeatureVolume out;
  out.planes = volume.planes;
  out.phi.assign(static_cast<size_t>(m), Grid(w, h, ch));
  out.prob = Grid(w, h, m);
  out.d_m = Grid(w, h, 1);
  out.mask = Grid(w, h, 1);

  std::vector<double> total(static_cast<size_t>(m));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int n_valid = 0;
      for (int p = 0; p < m; ++p) {
        const double den = weight[static_cast<size_t>(p)].at(x, y);
        double sum = 0.0;
        if (den > 1e-9) {
          ++n_valid;
          for (int c = 0; c < ch; ++c) {
            const double v =
                weighted[static_cast<size_t>(p)].at(x, y, c) / den;
            out.phi[static_cast<size_t>(p)].at(x, y, c) = v;
            sum += v;
          }
          total[static_cast<size_t>(p)] = sum;
        } else {
          total[static_cast<size_t>(p)] =
              std::numeric_limits<double>::infinity();
        }
      }
      if (n_valid == 0) {
        // Window center keeps d_m inside the pixel's plane range.
        out.d_m.at(x, y) = 0.5 * (volume.planes.planes.at(x, y, 0) +
                                  volume.planes.planes.at(x, y, m - 1));
        continue;
      }
      out.mask.at(x, y) = 1.0;
      double best = std::numeric_limits<double>::infinity();
      for (int p = 0; p < m; ++p)
        best = std::min(best, total[static_cast<size_t>(p)]);
      double z = 0.0, expect = 0.0;
      for (int p = 0; p < m; ++p) {
        if (!std::isfinite(total[static_cast<size_t>(p)])) continue;
        const double e =
            std::exp(-(total[static_cast<size_t>(p)] - best) / tau);
        out.prob.at(x, y, p) = e;
        z += e;
      }
      for (int p = 0; p < m; ++p) {
        out.prob.at(x, y, p) /= z;
        expect += out.prob.at(x, y, p) * volume.planes.planes.at(x, y, p);
      }
      out.d_m.at(x, y) = expect;
    }
  return out;
}

std::pair<Grid, Grid> downsample2_masked(const Grid& values, const Grid& mask) {
  if (values.width != mask.width || values.height != mask.height)
    throw std::invalid_argument("downsample2_masked: shape mismatch");
  const int ow = std::max(1, values.width / 2);
  const int oh = std::max(1, values.height / 2);
  Grid out_v(ow, oh, values.channels);
  Grid out_m(ow, oh, 1);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      const int x1 = std::min(2 * x + 1, values.width - 1);
      const int y1 = std::min(2 * y + 1, values.height - 1);
      const int xs[] = {2 * x, x1, 2 * x, x1};
      const int ys[] = {2 * y, 2 * y, y1, y1};
      for (int c = 0; c < values.channels; ++c) {
        double sum = 0.0;
        int n = 0;
        for (int i = 0; i < 4; ++i)
          if (mask.at(xs[i], ys[i]) > 0.0) {
            sum += values.at(xs[i], ys[i], c);
            ++n;
          }
        if (n > 0) {
          out_v.at(x, y, c) = sum / n;
          out_m.at(x, y) = 1.0;
        }
      }
    }
  return {std::move(out_v), std::move(out_m)};
}

Cascade cascade(const std::vector<features::FeaturePyramid>& pyramids,
                const std::vector<Intrinsics>& intrinsics,
                const std::vector<Pose>& poses, int target,
                const Grid& stereo_depth, const Grid& stereo_mask,
                const CascadeConfig& config) {
  check_range(config.near, config.far, config.planes_per_stage[0]);
  for (int s = 0; s + 1 < 3; ++s)
    if (config.planes_per_stage[static_cast<size_t>(s + 1)] >
        2 * config.planes_per_stage[static_cast<size_t>(s)])
      throw std::invalid_argument(
          "cascade: halving needs each stage's plane count <= 2x previous");
  if (target < 0 || target >= static_cast<int>(pyramids.size()))
    throw std::invalid_argument("cascade: target view out of range");

  const auto& levels = pyramids[static_cast<size_t>(target)].levels;
  if (stereo_depth.width != levels[2].width ||
      stereo_depth.height != levels[2].height)
    throw std::invalid_argument("cascade: stereo depth is not full resolution");

  // Stage 0 guide at pyramid level 0 (quarter resolution).
  auto [guide, guide_mask] = downsample2_masked(stereo_depth, stereo_mask);
  std::tie(guide, guide_mask) = downsample2_masked(guide, guide_mask);

  Cascade out;
  for (int stage = 0; stage < 3; ++stage) {
    const int m = config.planes_per_stage[static_cast<size_t>(stage)];
    const Grid& lvl = levels[static_cast<size_t>(stage)];
    PlaneSet planes;
    if (stage == 0) {
      planes = config.dgps
                   ? planes_dgps(guide, guide_mask, m, config.rel_halfwidth,
                                 config.near, config.far)
                   : planes_uniform(lvl.width, lvl.height, config.near,
                                    config.far, m);
    } else {
      const FeatureVolume& prev =
          out.stages[static_cast<size_t>(stage - 1)];
      const Grid center =
          upsample_bilinear(prev.d_m, lvl.width, lvl.height);
      planes.near = config.near;
      planes.far = config.far;
      planes.planes = Grid(lvl.width, lvl.height, m);
      planes.interval = Grid(lvl.width, lvl.height, 1);
      for (int y = 0; y < lvl.height; ++y)
        for (int x = 0; x < lvl.width; ++x) {
          // Exact halving of the parent pixel's interval.
          const int px = std::min(x / 2, prev.planes.interval.width - 1);
          const int py = std::min(y / 2, prev.planes.interval.height - 1);
          const double h = prev.planes.interval.at(px, py) * 0.5;
          const double width = m * h;
          const double lo =
              shifted_lo(center.at(x, y), width, config.near, config.far);
          planes.interval.at(x, y) = h;
          for (int i = 0; i < m; ++i)
            planes.planes.at(x, y, i) = lo + (i + 0.5) * h;
        }
    }
    const CostVolume cv =
        sweep(pyramids, intrinsics, poses, target, stage, planes);
    out.stages[static_cast<size_t>(stage)] =
        regularize(cv, config.tau, config.sigma);
  }
  return out;
}

}  // namespace svs::costvol
