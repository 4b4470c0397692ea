// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "svs/geometry.hpp"
#include "svs/image.hpp"

namespace svs::stereo {

// Number of channels in a CorrelatedFeature: matching costs sampled at
// integer offsets [-kCorrelatedChannels/2, kCorrelatedChannels/2) around the
// winning disparity.
inline constexpr int kCorrelatedChannels = 8;

// Matcher configuration. Two stock profiles exist: default_profile() drives
// the live stereo estimate d_s, gt_profile() is a frozen higher-quality
// setting used to produce pseudo-ground-truth depths d_gt.
struct MatcherProfile {
  int agg_radius = 3;        // box aggregation radius (3 -> 7x7)
  double lr_threshold = 1.0; // max |d_L + d_R| in px for a consistent pair
  int extra_sweeps = 4;      // full-resolution refinement passes after the pyramid
  int k_outputs = 7;         // length of the disparity sequence
};
MatcherProfile default_profile();
MatcherProfile gt_profile();

// Coarse-to-fine sequence of disparity maps, all at full resolution.
// Disparities are signed: the correspondent of column x lies at x - d, so
// left-eye maps hold d >= 0 and right-eye maps hold d <= 0. The mask (1 =
// valid) comes from the left-right consistency of the final output.
struct DisparitySequence {
  std::vector<Grid> outputs;
  Grid mask;
  const Grid& final() const { return outputs.back(); }
};

// Per-pixel slice of the aggregated cost curve around the winning disparity,
// normalized to zero mean / unit variance over the whole image.
struct CorrelatedFeature {
  Grid channels;  // kCorrelatedChannels channels
};

struct MatchResult {
  DisparitySequence left, right;
  CorrelatedFeature feat_left, feat_right;
  bool degenerate = false;  // constant input; outputs zero-filled, masks empty
};

// Dense rectified matching: 5x5 census + Hamming costs, box aggregation,
// 3-level pyramid with winner-take-all and +-2 px refinement, parabola
// subpixel fit on the final output. Produces k_outputs maps per eye.
MatchResult match(const Grid& left, const Grid& right,
                  const StereoRig& rig, int max_disp,
                  const MatcherProfile& profile = default_profile());

struct DepthMap {
  Grid depth;  // meters; 0 where invalid
  Grid mask;   // 1 = valid
};

// Depth of the final sequence output on valid pixels, 0 elsewhere.
DepthMap stereo_depth(const DisparitySequence& seq, const StereoRig& rig);

// Affine disparity correction disp' = sign(disp) * (a * |disp| + c), fit so
// that stereo inverse depth agrees with a rendered depth map.
struct DisparityCalibration {
  double a = 1.0;
  double c = 0.0;
  bool fallback = false;  // too few valid pixels; identity returned

  void apply(DisparitySequence& seq) const;
};

// Robust fit of (a, c) minimizing smooth-L1 of the inverse-depth residual
// between the calibrated final output and rendered_depth over pixels valid in
// both masks. Falls back to identity below 100 joint pixels.
DisparityCalibration calibrate(const DisparitySequence& seq,
                               const Grid& rendered_depth,
                               const Grid& rendered_mask,
                               const StereoRig& rig);

}  // namespace svs::stereo
