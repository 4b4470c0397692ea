// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/stereo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace svs::stereo {
namespace {

// Hamming cost assigned to lags whose correspondent falls outside the image.
// Slightly above the 24-bit maximum so real matches always win, without
// poisoning box aggregates near the borders.
constexpr double kOutOfRangeCost = 25.0;

struct CensusMap {
  int width = 0, height = 0;
  std::vector<std::uint32_t> words;
  std::uint32_t at(int x, int y) const {
    return words[static_cast<size_t>(y) * width + x];
  }
};

// Comparison deadband. Adding a constant to an image perturbs gray values by
// a few ulp; near-equal neighbors must not flip census bits under that.
constexpr double kCensusEps = 1e-9;

// 5x5 census word: bit set when the neighbor is darker than the center.
// Border pixels clamp, which keeps the transform defined everywhere.
CensusMap census5(const Grid& gray) {
  CensusMap m;
  m.width = gray.width;
  m.height = gray.height;
  m.words.assign(static_cast<size_t>(gray.width) * gray.height, 0);
  for (int y = 0; y < gray.height; ++y)
    for (int x = 0; x < gray.width; ++x) {
      const double center = gray.at(x, y);
      std::uint32_t w = 0;
      int bit = 0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = std::clamp(x + dx, 0, gray.width - 1);
          const int ny = std::clamp(y + dy, 0, gray.height - 1);
          if (gray.at(nx, ny) < center - kCensusEps) w |= (1u << bit);
          ++bit;
        }
      m.words[static_cast<size_t>(y) * gray.width + x] = w;
    }
  return m;
}

// Aggregated cost volume over lags 0..n_lags-1 for one eye. `sign` is +1 for
// the left eye (correspondent at x - lag in the other image) and -1 for the
// right eye (correspondent at x + lag).
Grid cost_volume(const CensusMap& base, const CensusMap& other, int n_lags,
                 int sign, int agg_radius) {
  Grid raw(base.width, base.height, n_lags);
  for (int y = 0; y < base.height; ++y)
    for (int x = 0; x < base.width; ++x)
      for (int lag = 0; lag < n_lags; ++lag) {
        const int mx = x - sign * lag;
        double c = kOutOfRangeCost;
        if (mx >= 0 && mx < other.width)
          c = static_cast<double>(std::popcount(base.at(x, y) ^ other.at(mx, y)));
        raw.at(x, y, lag) = c;
      }
  return box_filter(raw, agg_radius);
}

// Winner-take-all over a lag window. `guide` (optional) holds unsigned
// disparities in this level's pixel units; the search is then restricted to
// +-2 lags around it. Ties resolve to the smallest lag.
Grid wta(const Grid& vol, const Grid* guide) {
  Grid disp(vol.width, vol.height, 1);
  const int n_lags = vol.channels;
  for (int y = 0; y < vol.height; ++y)
    for (int x = 0; x < vol.width; ++x) {
      int lo = 0, hi = n_lags - 1;
      if (guide) {
        const int g = static_cast<int>(std::lround(guide->at(x, y)));
        lo = std::clamp(g - 2, 0, n_lags - 1);
        hi = std::clamp(g + 2, 0, n_lags - 1);
      }
      int best = lo;
      double best_cost = vol.at(x, y, lo);
      for (int lag = lo + 1; lag <= hi; ++lag)
        if (vol.at(x, y, lag) < best_cost) {
          best_cost = vol.at(x, y, lag);
          best = lag;
        }
      disp.at(x, y) = static_cast<double>(best);
    }
  return disp;
}

// Parabola fit through the aggregated costs at the winning lag and its two
// neighbors. Skipped at window edges and on flat or inverted curves, so exact
// zero-parallax input stays at exactly zero.
void subpixel_refine(Grid& disp, const Grid& vol) {
  for (int y = 0; y < vol.height; ++y)
    for (int x = 0; x < vol.width; ++x) {
      const int d = static_cast<int>(std::lround(disp.at(x, y)));
      if (d <= 0 || d >= vol.channels - 1) continue;
      const double cm = vol.at(x, y, d - 1);
      const double c0 = vol.at(x, y, d);
      const double cp = vol.at(x, y, d + 1);
      const double denom = cm - 2.0 * c0 + cp;
      if (denom <= 1e-12 || c0 > cm || c0 > cp) continue;
      const double off = std::clamp((cm - cp) / (2.0 * denom), -0.5, 0.5);
      disp.at(x, y) = d + off;
    }
}

Grid scale_disparity(const Grid& d, int out_w, int out_h, double factor) {
  Grid up = upsample_bilinear(d, out_w, out_h);
  for (double& v : up.data) v *= factor;
  return up;
}

// 3x3 median, the refinement sweep applied after the pyramid: votes away
// isolated mismatches without re-running the cost search.
Grid median3(const Grid& d) {
  Grid out(d.width, d.height, 1);
  double window[9];
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          window[n++] = d.at(std::clamp(x + dx, 0, d.width - 1),
                             std::clamp(y + dy, 0, d.height - 1));
      std::nth_element(window, window + 4, window + 9);
      out.at(x, y) = window[4];
    }
  return out;
}

struct EyePyramid {
  std::vector<Grid> gray;        // [0] = full resolution, then halved
  std::vector<CensusMap> census;
};

EyePyramid build_pyramid(const Grid& img, int levels) {
  EyePyramid p;
  p.gray.push_back(img.channels == 1 ? img : to_gray(img));
  for (int l = 1; l < levels; ++l) p.gray.push_back(downsample2(p.gray.back()));
  for (const Grid& g : p.gray) p.census.push_back(census5(g));
  return p;
}

// Unsigned coarse-to-fine matching for one eye. Appends k_outputs full
// resolution maps to `outputs` and returns the full resolution cost volume.
Grid match_eye(const EyePyramid& base, const EyePyramid& other, int max_disp,
               int sign, const MatcherProfile& profile,
               std::vector<Grid>& outputs) {
  const int levels = static_cast<int>(base.gray.size());
  const int full_w = base.gray[0].width, full_h = base.gray[0].height;

  std::vector<Grid> volumes(static_cast<size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    const int n_lags = std::max(2, static_cast<int>(std::ceil(
                                       max_disp / std::pow(2.0, l))) + 1);
    volumes[static_cast<size_t>(l)] =
        cost_volume(base.census[static_cast<size_t>(l)],
                    other.census[static_cast<size_t>(l)], n_lags, sign,
                    profile.agg_radius);
  }

  Grid disp;  // native-resolution unsigned disparity of the current level
  for (int l = levels - 1; l >= 0; --l) {
    const Grid& vol = volumes[static_cast<size_t>(l)];
    if (l == levels - 1) {
      disp = wta(vol, nullptr);
    } else {
      const Grid guide = scale_disparity(disp, vol.width, vol.height, 2.0);
      disp = wta(vol, &guide);
    }
    if (l == 0) subpixel_refine(disp, vol);
    outputs.push_back(scale_disparity(disp, full_w, full_h,
                                      std::pow(2.0, l)));
  }

  for (int s = 0; s < profile.extra_sweeps; ++s) {
    disp = median3(disp);
    outputs.push_back(disp);
  }
  while (static_cast<int>(outputs.size()) < profile.k_outputs)
    outputs.push_back(outputs.back());
  return volumes[0];
}

void flip_sign(std::vector<Grid>& outputs) {
  for (Grid& g : outputs)
    for (double& v : g.data) v = -v;
}

// Cost-curve slice around the winning lag, then normalized over the image.
// Channels sample the curve at the subpixel winner so the two eyes' slices of
// a matched pixel stay aligned instead of snapping to different integer lags.
CorrelatedFeature correlated_feature(const Grid& final_disp, const Grid& vol) {
  CorrelatedFeature f;
  f.channels = Grid(vol.width, vol.height, kCorrelatedChannels);
  for (int y = 0; y < vol.height; ++y)
    for (int x = 0; x < vol.width; ++x) {
      const double win = std::abs(final_disp.at(x, y));
      for (int c = 0; c < kCorrelatedChannels; ++c) {
        const double lag = std::clamp(win + c - kCorrelatedChannels / 2.0, 0.0,
                                      static_cast<double>(vol.channels - 1));
        const int lo = std::min(static_cast<int>(lag), vol.channels - 2);
        const double frac = lag - lo;
        f.channels.at(x, y, c) = (1.0 - frac) * vol.at(x, y, lo) +
                                 frac * vol.at(x, y, lo + 1);
      }
    }
  double mean = 0.0;
  for (double v : f.channels.data) mean += v;
  mean /= static_cast<double>(f.channels.data.size());
  double var = 0.0;
  for (double v : f.channels.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(f.channels.data.size());
  const double inv_std = var > 1e-24 ? 1.0 / std::sqrt(var) : 0.0;
  for (double& v : f.channels.data) v = (v - mean) * inv_std;
  return f;
}

bool is_constant(const Grid& gray) {
  const auto [lo, hi] = std::minmax_element(gray.data.begin(), gray.data.end());
  return *hi - *lo < 1e-12;
}

}  // namespace

MatcherProfile default_profile() { return MatcherProfile{}; }

MatcherProfile gt_profile() {
  MatcherProfile p;
  p.agg_radius = 4;
  p.lr_threshold = 0.75;
  return p;
}

MatchResult match(const Grid& left, const Grid& right, const StereoRig& rig,
                  int max_disp, const MatcherProfile& profile) {
  if (!left.same_shape(right))
    throw std::invalid_argument("stereo::match: image shapes differ");
  if (left.channels != 1 && left.channels != 3)
    throw std::invalid_argument("stereo::match: expected 1 or 3 channels");
  if (left.width != rig.intrinsics.width || left.height != rig.intrinsics.height)
    throw std::invalid_argument("stereo::match: image size does not match rig");
  if (max_disp < 1 || max_disp >= left.width / 2)
    throw std::invalid_argument("stereo::match: max_disp must be in [1, width/2)");
  if (profile.agg_radius < 0 || profile.extra_sweeps < 0 ||
      profile.k_outputs < 3 + profile.extra_sweeps)
    throw std::invalid_argument("stereo::match: bad profile");

  MatchResult r;
  const Grid gray_l = left.channels == 1 ? left : to_gray(left);
  const Grid gray_r = right.channels == 1 ? right : to_gray(right);

  auto zero_fill = [&](DisparitySequence& seq) {
    seq.outputs.assign(static_cast<size_t>(profile.k_outputs),
                       Grid(left.width, left.height, 1));
    seq.mask = Grid(left.width, left.height, 1);
  };
  if (is_constant(gray_l) || is_constant(gray_r)) {
    r.degenerate = true;
    zero_fill(r.left);
    zero_fill(r.right);
    r.feat_left.channels = Grid(left.width, left.height, kCorrelatedChannels);
    r.feat_right.channels = Grid(left.width, left.height, kCorrelatedChannels);
    return r;
  }

  const int levels = 3;
  const EyePyramid pl = build_pyramid(gray_l, levels);
  const EyePyramid pr = build_pyramid(gray_r, levels);

  const Grid vol_l = match_eye(pl, pr, max_disp, +1, profile, r.left.outputs);
  const Grid vol_r = match_eye(pr, pl, max_disp, -1, profile, r.right.outputs);
  flip_sign(r.right.outputs);

  r.feat_left = correlated_feature(r.left.final(), vol_l);
  r.feat_right = correlated_feature(r.right.final(), vol_r);

  // Left-right pairing on the final maps. A left pixel and its correspondent
  // are valid together exactly when their signed disparities cancel, which
  // keeps the masks symmetric by construction.
  const Grid& dl = r.left.final();
  const Grid& dr = r.right.final();
  r.left.mask = Grid(left.width, left.height, 1);
  r.right.mask = Grid(left.width, left.height, 1);
  for (int y = 0; y < left.height; ++y)
    for (int x = 0; x < left.width; ++x) {
      const double d = dl.at(x, y);
      const int xr = static_cast<int>(std::lround(x - d));
      if (xr < 0 || xr >= left.width) continue;
      if (std::abs(d + dr.at(xr, y)) <= profile.lr_threshold) {
        r.left.mask.at(x, y) = 1.0;
        r.right.mask.at(xr, y) = 1.0;
      }
    }
  return r;
}

DepthMap stereo_depth(const DisparitySequence& seq, const StereoRig& rig) {
  if (seq.outputs.empty()) throw std::invalid_argument("stereo_depth: empty sequence");
  const Grid& d = seq.final();
  if (!d.same_shape(seq.mask))
    throw std::invalid_argument("stereo_depth: mask shape mismatch");
  DepthMap out;
  out.depth = Grid(d.width, d.height, 1);
  out.mask = Grid(d.width, d.height, 1);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      const double disp = std::abs(d.at(x, y));
      if (seq.mask.at(x, y) <= 0.0 || disp < 1e-9) continue;
      out.depth.at(x, y) = disparity_to_depth(disp, rig);
      out.mask.at(x, y) = 1.0;
    }
  return out;
}

void DisparityCalibration::apply(DisparitySequence& seq) const {
  for (Grid& g : seq.outputs)
    for (double& v : g.data) {
      if (v > 0.0)
        v = a * v + c;
      else if (v < 0.0)
        v = -(a * -v + c);
    }
}

DisparityCalibration calibrate(const DisparitySequence& seq,
                               const Grid& rendered_depth,
                               const Grid& rendered_mask,
                               const StereoRig& rig) {
  const Grid& d = seq.final();
  if (!d.same_shape(rendered_depth) || !d.same_shape(rendered_mask) ||
      !d.same_shape(seq.mask))
    throw std::invalid_argument("calibrate: shape mismatch");

  const double bf = rig.baseline * rig.intrinsics.fx;
  std::vector<double> disp, inv_target;
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      if (seq.mask.at(x, y) <= 0.0 || rendered_mask.at(x, y) <= 0.0) continue;
      const double depth = rendered_depth.at(x, y);
      if (depth <= 0.0) continue;
      disp.push_back(std::abs(d.at(x, y)));
      inv_target.push_back(1.0 / depth);
    }

  DisparityCalibration cal;
  if (disp.size() < 100) {
    cal.fallback = true;
    return cal;
  }

  // Residual r_i = (a*disp_i + c)/bf - 1/depth_i is linear in (a, c), so the
  // smooth-L1 objective is solved by iteratively reweighted least squares
  // with Huber weights; beta matches the quadratic region of the loss.
  const double beta = 0.01;
  double a = 1.0, c = 0.0;
  for (int it = 0; it < 20; ++it) {
    double s_ww = 0, s_wd = 0, s_wdd = 0, s_wt = 0, s_wdt = 0;
    for (size_t i = 0; i < disp.size(); ++i) {
      const double r = (a * disp[i] + c) / bf - inv_target[i];
      const double w = std::abs(r) <= beta ? 1.0 : beta / std::abs(r);
      const double t = inv_target[i] * bf;  // target in disparity units
      s_ww += w;
      s_wd += w * disp[i];
      s_wdd += w * disp[i] * disp[i];
      s_wt += w * t;
      s_wdt += w * disp[i] * t;
    }
    const double det = s_wdd * s_ww - s_wd * s_wd;
    if (std::abs(det) < 1e-12) break;
    const double na = (s_wdt * s_ww - s_wt * s_wd) / det;
    const double nc = (s_wdd * s_wt - s_wd * s_wdt) / det;
    if (std::abs(na - a) < 1e-12 && std::abs(nc - c) < 1e-12) {
      a = na;
      c = nc;
      break;
    }
    a = na;
    c = nc;
  }
  if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(c)) {
    cal.fallback = true;
    return cal;
  }
  cal.a = a;
  cal.c = c;
  return cal;
}

}  // namespace svs::stereo
