// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/features.hpp"

#include <cmath>
#include <stdexcept>

#include "svs/rng.hpp"

namespace svs::features {
namespace {

// Separable Gaussian with clamped borders; radius 3*sigma.
Grid gaussian_blur(const Grid& g, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<size_t>(i + radius)] =
        std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[static_cast<size_t>(i + radius)];
  }
  for (double& k : kernel) k /= sum;

  Grid tmp(g.width, g.height, g.channels);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x)
      for (int c = 0; c < g.channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<size_t>(i + radius)] *
                 g.at(std::clamp(x + i, 0, g.width - 1), y, c);
        tmp.at(x, y, c) = acc;
      }
  Grid out(g.width, g.height, g.channels);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x)
      for (int c = 0; c < g.channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += kernel[static_cast<size_t>(i + radius)] *
                 tmp.at(x, std::clamp(y + i, 0, g.height - 1), c);
        out.at(x, y, c) = acc;
      }
  return out;
}

// Per-channel standardization over a row's columns. Uses only the row's own
// statistics so attention stays strictly intra-row; constant channels (e.g.
// zeroed correlated features) map to zero instead of dividing by zero.
Eigen::MatrixXd standardize_row(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = x;
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double mean = x.col(c).sum() / n;
    const double var = (x.col(c).array() - mean).square().sum() / n;
    const double inv = 1.0 / (std::sqrt(var) + 1e-12);
    z.col(c) = (x.col(c).array() - mean) * inv;
  }
  return z;
}

// Rescales each column position's channel vector (a matrix row here) to norm
// sqrt(dim). Scores then compare direction, not energy, so flat regions
// cannot be captured by whichever column happens to carry the largest norm;
// near-zero vectors are left alone and fall back to uniform attention.
Eigen::MatrixXd unit_positions(Eigen::MatrixXd x) {
  const double target = std::sqrt(static_cast<double>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    if (n > 1e-9) x.row(i) *= target / n;
  }
  return x;
}

// Row-softmaxed attention scores between two packed rows.
Eigen::MatrixXd attention(const Eigen::MatrixXd& xq_raw,
                          const Eigen::MatrixXd& xkv_raw, const SamBlock& b) {
  const Eigen::MatrixXd q = unit_positions(standardize_row(xq_raw)) * b.wq;
  const Eigen::MatrixXd k = unit_positions(standardize_row(xkv_raw)) * b.wk;
  Eigen::MatrixXd s = q * k.transpose() / std::sqrt(static_cast<double>(b.c));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      s(i, j) = std::exp(s(i, j) - m);
      z += s(i, j);
    }
    s.row(i) /= z;
  }
  return s;
}

// Fraction of the feature bands' row RMS at which correlated channels enter
// the value pathway. The cost slices match across eyes less faithfully than
// the filter-bank channels, so injecting them at full strength would drag
// corresponding fused features apart; a quarter share keeps their signal
// without letting their noise dominate.
constexpr double kCorrValueGain = 0.25;

// One attention direction for one row: query side q, context side k/v. The
// value input rescales the correlated channels relative to the feature
// bands' row RMS so the unit-variance cost slices cannot overwhelm the
// sub-unit filter-bank channels in the fused output.
void fuse_row(const Eigen::MatrixXd& xq, const Eigen::MatrixXd& xkv,
              const SamBlock& b, int feature_ch, Eigen::MatrixXd& delta) {
  Eigen::MatrixXd zv = xkv;
  const Eigen::Index tc = xkv.cols() - feature_ch;
  if (tc > 0) {
    const double rms_f =
        std::sqrt(zv.leftCols(feature_ch).squaredNorm() /
                  static_cast<double>(zv.rows() * feature_ch));
    const double rms_t = std::sqrt(zv.rightCols(tc).squaredNorm() /
                                   static_cast<double>(zv.rows() * tc));
    zv.rightCols(tc) *= rms_t > 1e-12 ? kCorrValueGain * rms_f / rms_t : 0.0;
  }
  delta = (attention(xq, xkv, b) * (zv * b.wv)) * b.wo;
}

Eigen::MatrixXd row_matrix(const Grid& f, const Grid& t, int y) {
  Eigen::MatrixXd x(f.width, f.channels + t.channels);
  for (int i = 0; i < f.width; ++i) {
    for (int c = 0; c < f.channels; ++c) x(i, c) = f.at(i, y, c);
    for (int c = 0; c < t.channels; ++c) x(i, f.channels + c) = t.at(i, y, c);
  }
  return x;
}

}  // namespace

FeaturePyramid extract(const Grid& image) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("features::extract: expected 1 or 3 channels");
  const Grid gray = image.channels == 3 ? to_gray(image) : image;

  const Grid blur_mid = gaussian_blur(gray, 1.6);
  const Grid dog_fine_src = gaussian_blur(gray, 0.8);
  const Grid blur_coarse = gaussian_blur(gray, 3.2);
  const Grid mean = box_filter(gray, 1);
  Grid gray_sq = gray;
  for (double& v : gray_sq.data) v *= v;
  const Grid mean_sq = box_filter(gray_sq, 1);

  Grid full(gray.width, gray.height, kFeatureChannels);
  for (int y = 0; y < gray.height; ++y)
    for (int x = 0; x < gray.width; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, gray.width - 1);
      const int ym = std::max(y - 1, 0), yp = std::min(y + 1, gray.height - 1);
      full.at(x, y, 0) = gray.at(x, y);
      full.at(x, y, 1) = 0.5 * (gray.at(xp, y) - gray.at(xm, y));
      full.at(x, y, 2) = 0.5 * (gray.at(x, yp) - gray.at(x, ym));
      full.at(x, y, 3) = dog_fine_src.at(x, y) - blur_mid.at(x, y);
      full.at(x, y, 4) = blur_mid.at(x, y) - blur_coarse.at(x, y);
      full.at(x, y, 5) =
          image.channels == 3 ? image.at(x, y, 0) - image.at(x, y, 2) : 0.0;
      full.at(x, y, 6) = mean.at(x, y);
      const double var = mean_sq.at(x, y) - mean.at(x, y) * mean.at(x, y);
      full.at(x, y, 7) = std::sqrt(std::max(var, 0.0));
    }

  FeaturePyramid p;
  p.levels[2] = std::move(full);
  p.levels[1] = downsample2(p.levels[2]);
  p.levels[0] = downsample2(p.levels[1]);
  return p;
}

SamStack make_sam_stack(std::uint64_t seed, int feature_ch, int corr_ch, int c,
                        int n_blocks) {
  if (feature_ch < 1 || corr_ch < 0 || n_blocks < 1)
    throw std::invalid_argument("make_sam_stack: bad configuration");
  if (corr_ch != 0 && corr_ch < feature_ch)
    throw std::invalid_argument(
        "make_sam_stack: need corr_ch == 0 or corr_ch >= feature_ch");
  const int in_ch = feature_ch + corr_ch;
  if (c == 0) c = in_ch;
  if (c > in_ch || c < feature_ch)
    throw std::invalid_argument("make_sam_stack: need feature_ch <= c <= in_ch");
  SamStack stack;
  stack.feature_ch = feature_ch;
  stack.corr_ch = corr_ch;
  for (int i = 0; i < n_blocks; ++i) {
    SamBlock b;
    b.c = c;
    b.wq = orthonormal_columns(in_ch, c, seed * 1000003 + 2 * i);
    b.wk = b.wq;

    // Structured value path: wv * wo == s, where s passes the warped
    // features through channel-aligned and mixes the warped correlated
    // channels in through a seeded rotation. Both factors keep orthonormal
    // columns; wv pads s with a seeded orthonormal completion of its
    // complement and wo selects the first feature_ch coordinates back out.
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(in_ch, feature_ch);
    if (corr_ch == 0) {
      s.topRows(feature_ch).setIdentity();
    } else {
      const double g = 1.0 / std::sqrt(2.0);
      s.topRows(feature_ch) =
          g * Eigen::MatrixXd::Identity(feature_ch, feature_ch);
      s.bottomRows(corr_ch) =
          g * orthonormal_columns(corr_ch, feature_ch,
                                  seed * 1000003 + 2 * i + 1);
    }
    Eigen::MatrixXd wv(in_ch, c);
    wv.leftCols(feature_ch) = s;
    if (c > feature_ch) {
      const Eigen::MatrixXd raw =
          orthonormal_columns(in_ch, c - feature_ch, seed * 1000003 + 5000 + i);
      const Eigen::MatrixXd residual = raw - s * (s.transpose() * raw);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(residual);
      wv.rightCols(c - feature_ch) =
          qr.householderQ() * Eigen::MatrixXd::Identity(in_ch, c - feature_ch);
    }
    b.wv = std::move(wv);
    b.wo = Eigen::MatrixXd::Zero(c, feature_ch);
    b.wo.topRows(feature_ch).setIdentity();
    stack.blocks.push_back(std::move(b));
  }
  return stack;
}

std::pair<Grid, Grid> sam_fuse(const Grid& f_l, const Grid& f_r,
                               const Grid& t_l, const Grid& t_r,
                               const SamStack& stack) {
  if (!f_l.same_shape(f_r) || !t_l.same_shape(t_r))
    throw std::invalid_argument("sam_fuse: eye shapes differ");
  if (f_l.width != t_l.width || f_l.height != t_l.height)
    throw std::invalid_argument("sam_fuse: correlated features not resampled");
  if (f_l.channels != stack.feature_ch || t_l.channels != stack.corr_ch)
    throw std::invalid_argument("sam_fuse: channel counts do not match stack");

  Grid out_l = f_l, out_r = f_r;
  for (const SamBlock& b : stack.blocks) {
    Grid next_l = out_l, next_r = out_r;
    for (int y = 0; y < f_l.height; ++y) {
      const Eigen::MatrixXd xl = row_matrix(out_l, t_l, y);
      const Eigen::MatrixXd xr = row_matrix(out_r, t_r, y);
      Eigen::MatrixXd delta_l, delta_r;
      fuse_row(xl, xr, b, stack.feature_ch, delta_l);
      fuse_row(xr, xl, b, stack.feature_ch, delta_r);
      for (int x = 0; x < f_l.width; ++x)
        for (int c = 0; c < stack.feature_ch; ++c) {
          next_l.at(x, y, c) += delta_l(x, c);
          next_r.at(x, y, c) += delta_r(x, c);
        }
    }
    out_l = std::move(next_l);
    out_r = std::move(next_r);
  }
  return {std::move(out_l), std::move(out_r)};
}

Eigen::MatrixXd warp_matrix(const Grid& f_q, const Grid& t_q,
                            const Grid& f_kv, const Grid& t_kv, int row,
                            const SamBlock& block) {
  if (row < 0 || row >= f_q.height)
    throw std::invalid_argument("warp_matrix: row out of range");
  return attention(row_matrix(f_q, t_q, row), row_matrix(f_kv, t_kv, row),
                   block);
}

StereoFeatures stereo_features(const Grid& rgb_l, const Grid& rgb_r,
                               const Grid& t_l, const Grid& t_r,
                               const SamStack& stack) {
  StereoFeatures out;
  out.left = extract(rgb_l);
  out.right = extract(rgb_r);
  for (int l = 0; l < kPyramidLevels; ++l) {
    Grid& fl = out.left.levels[static_cast<size_t>(l)];
    Grid& fr = out.right.levels[static_cast<size_t>(l)];
    const Grid tl = upsample_bilinear(t_l, fl.width, fl.height);
    const Grid tr = upsample_bilinear(t_r, fl.width, fl.height);
    auto [fused_l, fused_r] = sam_fuse(fl, fr, tl, tr, stack);
    fl = box_filter(fused_l, 1);
    fr = box_filter(fused_r, 1);
  }
  return out;
}

}  // namespace svs::features
