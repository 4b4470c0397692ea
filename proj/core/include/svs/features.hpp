// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "svs/image.hpp"

namespace svs::features {

// Channel layout of every pyramid level: six base filters (gray, x gradient,
// y gradient, fine and coarse difference-of-Gaussians, chroma) widened with
// the 3x3 local mean and standard deviation of gray.
inline constexpr int kFeatureChannels = 8;
inline constexpr int kPyramidLevels = 3;

// levels[2] matches the image size; levels[1] and levels[0] are average
// pooled to 1/2 and 1/4 resolution.
struct FeaturePyramid {
  std::array<Grid, kPyramidLevels> levels;
};

// Fixed filter-bank features of one view.
FeaturePyramid extract(const Grid& image);

// One stereo-attention fusion block. The query and key projections are tied
// and square: with fixed (non-learned) weights, independent or rank-reducing
// projections would destroy the dot-product similarity the warping matrix
// relies on. Query/key inputs are standardized per channel within each row
// before projection. The value and output projections each have orthonormal
// columns, and their product is structured: warped features pass through
// channel-aligned (so fusion averages the two eyes' features at the attended
// correspondence) while warped correlated channels enter through a seeded
// rotation. A trained network could learn such a composition; fixed weights
// have to build it in.
struct SamBlock {
  Eigen::MatrixXd wq, wk;  // (feature+corr channels) x c, orthonormal columns
  Eigen::MatrixXd wv;      // (feature+corr channels) x c
  Eigen::MatrixXd wo;      // c x feature channels
  int c = 0;               // attention channel count
};

struct SamStack {
  std::vector<SamBlock> blocks;
  int feature_ch = kFeatureChannels;
  int corr_ch = 0;
};

// c = 0 selects the full input width (feature_ch + corr_ch).
SamStack make_sam_stack(std::uint64_t seed, int feature_ch = kFeatureChannels,
                        int corr_ch = 8, int c = 0, int n_blocks = 3);

// Row-wise cross-eye attention fusion at one pyramid level. t_l / t_r are the
// stereo-correlated features, already resampled to the level's resolution;
// they steer the attention and contribute rotated content to the output.
// Blocks apply sequentially; each adds project_out(softmax(QK^T/sqrt(c)) V)
// onto the current features of each eye.
std::pair<Grid, Grid> sam_fuse(const Grid& f_l, const Grid& f_r,
                               const Grid& t_l, const Grid& t_r,
                               const SamStack& stack);

// The row-stochastic warping matrix one block builds for one image row:
// entry (i, j) is the attention of query column i on context column j.
Eigen::MatrixXd warp_matrix(const Grid& f_q, const Grid& t_q,
                            const Grid& f_kv, const Grid& t_kv, int row,
                            const SamBlock& block);

struct StereoFeatures {
  FeaturePyramid left, right;
};

// Full per-pair path: extract both eyes, fuse every level with the stack,
// then decode with a fixed 3x3 smoothing.
StereoFeatures stereo_features(const Grid& rgb_l, const Grid& rgb_r,
                               const Grid& t_l, const Grid& t_r,
                               const SamStack& stack);

}  // namespace svs::features
