// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "svs/features.hpp"
#include "svs/geometry.hpp"
#include "svs/image.hpp"

namespace svs::costvol {

inline constexpr int kCascadeStages = 3;

// Per-pixel depth-plane hypotheses for one stage. planes has one channel per
// plane, strictly increasing along the channel axis and inside [near, far];
// interval stores the per-pixel plane spacing in meters.
struct PlaneSet {
  Grid planes;    // W x H x M
  Grid interval;  // W x H x 1
  double near = 0.0;
  double far = 0.0;
};

// Planes shared by every pixel: midpoints of M equal slices of [near, far].
PlaneSet planes_uniform(int width, int height, double near, double far, int m);

// Depth-guided planes: per valid pixel, M midpoints spanning
// [d * (1 - rel_halfwidth), d * (1 + rel_halfwidth)], shifted (never
// shrunk) to fit inside [near, far]. Invalid pixels fall back to the
// uniform set so a failed matcher never narrows the search.
PlaneSet planes_dgps(const Grid& stereo_depth, const Grid& stereo_mask, int m,
                     double rel_halfwidth, double near, double far);

// Variance-aggregated sweep volume. cost[m] holds the per-channel variance
// across the views that see the sample; valid_count(x, y, m) is how many do.
// Voxels with fewer than 2 valid views are masked and carry zero cost.
struct CostVolume {
  std::vector<Grid> cost;  // M grids, W x H x C each
  Grid valid_count;        // W x H x M
  PlaneSet planes;
};

// Sweeps every view's level-l features over the target view's planes: each
// (pixel, plane) sample warps through the fronto-parallel plane homography
// into every view, gathers bilinearly, and aggregates per-channel variance
// across the views whose frustum contains the sample. The target itself
// participates (its warp is the identity). Intrinsics and poses are per
// view; intrinsics are full-resolution and scaled internally to the level.
CostVolume sweep(const std::vector<features::FeaturePyramid>& pyramids,
                 const std::vector<Intrinsics>& intrinsics,
                 const std::vector<Pose>& poses, int target, int level,
                 const PlaneSet& planes);

// Regularized feature volume: phi is the cost volume after separable
// Gaussian smoothing over (x, y, plane); prob is the per-pixel softargmin
// distribution over planes (softmax of negative total cost at temperature
// tau); d_m its depth expectation. mask flags pixels with at least one
// unmasked plane; masked pixels carry zero prob and d_m at the window
// center so the cascade can continue through them.
struct FeatureVolume {
  std::vector<Grid> phi;  // M grids, W x H x C each
  Grid prob;              // W x H x M
  Grid d_m;               // W x H
  Grid mask;              // W x H
  PlaneSet planes;
};

FeatureVolume regularize(const CostVolume& volume, double tau,
                         double sigma = 1.0);

struct CascadeConfig {
  double near = 1.0;
  double far = 4.0;
  std::array<int, kCascadeStages> planes_per_stage = {48, 32, 8};
  double rel_halfwidth = 0.1;  // DGPS window, fraction of the stereo depth
  bool dgps = true;            // false: uniform stage-0 planes (ablation)
  // Softmax temperature in cost units. Variance costs of the filter-bank
  // features live around 1e-3..1e-2, so a much larger tau flattens the
  // posterior and the expected depth collapses to the window mean.
  double tau = 0.02;
  double sigma = 1.0;
};

// The three cascade stages for one target view, coarse to fine. Stage s uses
// pyramid level s; every later stage re-centers per pixel on the upsampled
// previous depth expectation with the plane interval exactly halved.
struct Cascade {
  std::array<FeatureVolume, kCascadeStages> stages;
};

Cascade cascade(const std::vector<features::FeaturePyramid>& pyramids,
                const std::vector<Intrinsics>& intrinsics,
                const std::vector<Pose>& poses, int target,
                const Grid& stereo_depth, const Grid& stereo_mask,
                const CascadeConfig& config);

// Mask-aware 2x average pooling for depth maps: each coarse pixel averages
// the valid fine pixels of its 2x2 cell and is valid when any exist.
std::pair<Grid, Grid> downsample2_masked(const Grid& values, const Grid& mask);

}  // namespace svs::costvol
