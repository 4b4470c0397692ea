// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "svs/rng.hpp"

namespace svs::render {

namespace {

constexpr double kLogitFloor = 1e30;
constexpr double kWeightEps = 1e-8;

double softplus_plain(double x) {
  if (x > 30.0) return x;
  return x < -30.0 ? std::exp(x) : std::log1p(std::exp(x));
}

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

// Per-corner linear interpolation along the plane axis, then bilinear over
// the four corner pixels. Depths outside a corner's plane range clamp to the
// nearest plane, matching the border clamp of the image samplers.
void trilinear_volume(const costvol::FeatureVolume& fv, double px, double py,
                      double depth, double* out) {
  const Grid& planes = fv.planes.planes;
  const int m = planes.channels;
  const int x0 = static_cast<int>(std::floor(px));
  const int y0 = static_cast<int>(std::floor(py));
  const double ax = px - x0;
  const double ay = py - y0;
  const int xc[2] = {clampi(x0, 0, planes.width - 1),
                     clampi(x0 + 1, 0, planes.width - 1)};
  const int yc[2] = {clampi(y0, 0, planes.height - 1),
                     clampi(y0 + 1, 0, planes.height - 1)};
  const double wx[2] = {1.0 - ax, ax};
  const double wy[2] = {1.0 - ay, ay};
  const int ch = fv.phi.empty() ? 0 : fv.phi[0].channels;
  std::fill(out, out + ch, 0.0);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const double w = wy[j] * wx[i];
      if (w == 0.0) continue;
      const int x = xc[i];
      const int y = yc[j];
      int lo = 0;
      while (lo + 1 < m && planes.at(x, y, lo + 1) <= depth) ++lo;
      const int hi = std::min(lo + 1, m - 1);
      const double d_lo = planes.at(x, y, lo);
      const double d_hi = planes.at(x, y, hi);
      double u;
      if (depth <= d_lo)
        u = 0.0;
      else if (depth >= d_hi)
        u = 1.0;
      else
        u = (depth - d_lo) / (d_hi - d_lo);
      const double* p_lo = fv.phi[static_cast<size_t>(lo)].pixel(x, y);
      const double* p_hi = fv.phi[static_cast<size_t>(hi)].pixel(x, y);
      for (int c = 0; c < ch; ++c)
        out[c] += w * ((1.0 - u) * p_lo[c] + u * p_hi[c]);
    }
  }
}

void check_views(const std::vector<ViewBundle>& views) {
  if (views.empty()) throw std::invalid_argument("render: no source views");
  for (const ViewBundle& v : views) {
    if (!v.cascade || !v.image_feature || !v.rgb)
      throw std::invalid_argument("render: null view bundle pointer");
    if (v.rgb->channels != 3)
      throw std::invalid_argument("render: view rgb must have 3 channels");
    if (v.image_feature->channels != features::kFeatureChannels)
      throw std::invalid_argument("render: bad image feature channels");
    if (v.image_feature->width != v.rgb->width ||
        v.image_feature->height != v.rgb->height)
      throw std::invalid_argument("render: feature/rgb size mismatch");
    for (const costvol::FeatureVolume& fv : v.cascade->stages) {
      if (fv.phi.empty() || fv.phi[0].channels != features::kFeatureChannels)
        throw std::invalid_argument("render: bad cascade stage channels");
    }
    v.k.validate();
  }
}

// Tape-free net forward for `count` consecutive batch rows starting at row0:
// per-sample density and blended color, same guards as the tape ops.
void forward_plain_rows(const RendererNet& net, const RenderBatch& batch,
                        int row0, int count, Vec3* colors, double* sigma) {
  const int v_n = batch.views;
  const int in = 2 * kGatherChannels;
  const int hid = net.hidden;
  std::vector<double> h1(static_cast<size_t>(hid));
  std::vector<double> h2(static_cast<size_t>(hid));
  std::vector<double> logits(static_cast<size_t>(v_n));
  for (int i = 0; i < count; ++i) {
    const int row = row0 + i;
    const double* pooled = &batch.pooled.at(row, 0);
    for (int j = 0; j < hid; ++j) {
      double acc = net.b1.at(0, j);
      for (int k = 0; k < in; ++k) acc += pooled[k] * net.w1.at(k, j);
      h1[static_cast<size_t>(j)] = softplus_plain(acc);
    }
    for (int j = 0; j < hid; ++j) {
      double acc = net.b2.at(0, j);
      for (int k = 0; k < hid; ++k)
        acc += h1[static_cast<size_t>(k)] * net.w2.at(k, j);
      h2[static_cast<size_t>(j)] = softplus_plain(acc);
    }
    double sig = net.bd.at(0, 0);
    for (int j = 0; j < hid; ++j)
      sig += h2[static_cast<size_t>(j)] * net.wd.at(j, 0);
    sigma[i] = softplus_plain(sig) * batch.any.at(row, 0);
    double m = -2.0 * kLogitFloor;
    for (int v = 0; v < v_n; ++v) {
      double l = net.bb.at(0, v);
      for (int j = 0; j < hid; ++j)
        l += h2[static_cast<size_t>(j)] * net.wb.at(j, v);
      l += (batch.mask.at(row, v) - 1.0) * kLogitFloor;
      logits[static_cast<size_t>(v)] = l;
      m = std::max(m, l);
    }
    double z = 0.0;
    for (int v = 0; v < v_n; ++v) {
      double& l = logits[static_cast<size_t>(v)];
      l = std::exp(l - m);
      z += l;
    }
    Vec3 c = Vec3::Zero();
    for (int v = 0; v < v_n; ++v) {
      const double blend = logits[static_cast<size_t>(v)] / z;
      for (int ch = 0; ch < 3; ++ch)
        c[ch] += blend * batch.rgb[static_cast<size_t>(ch)].at(row, v);
    }
    colors[i] = c;
  }
}

}  // namespace

Ray pixel_ray(const Vec2& pixel, const Intrinsics& k, const Pose& pose) {
  k.validate();
  Ray r;
  r.origin = pose.center();
  const Vec3 dir_cam((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy,
                     1.0);
  r.dir = pose.rotation * dir_cam;
  return r;
}

RaySamples sample_ray(const Ray& ray, double near, double far, int s,
                      std::mt19937_64* rng) {
  if (!(near > 0.0) || !(far > near))
    throw std::invalid_argument("sample_ray: need 0 < near < far");
  if (s < 1) throw std::invalid_argument("sample_ray: need s >= 1");
  RaySamples out;
  out.t.resize(static_cast<size_t>(s));
  out.positions.resize(static_cast<size_t>(s));
  out.delta.resize(static_cast<size_t>(s));
  const double h = (far - near) / s;
  for (int i = 0; i < s; ++i) {
    const double u = rng ? uniform01(*rng) : 0.5;
    out.t[static_cast<size_t>(i)] = near + (i + u) * h;
    out.positions[static_cast<size_t>(i)] =
        ray.origin + out.t[static_cast<size_t>(i)] * ray.dir;
  }
  for (int i = 0; i + 1 < s; ++i)
    out.delta[static_cast<size_t>(i)] =
        out.t[static_cast<size_t>(i + 1)] - out.t[static_cast<size_t>(i)];
  out.delta[static_cast<size_t>(s - 1)] =
      far - out.t[static_cast<size_t>(s - 1)];
  return out;
}

SampleFeatures gather(const RaySamples& samples,
                      const std::vector<ViewBundle>& views) {
  check_views(views);
  const int s = static_cast<int>(samples.positions.size());
  const int v_n = static_cast<int>(views.size());
  SampleFeatures out;
  out.samples = s;
  out.views = v_n;
  out.per_view = diff::Tensor::zeros({s * v_n, kGatherChannels});
  out.rgb = diff::Tensor::zeros({s * v_n, 3});
  out.valid = diff::Tensor::zeros({s * v_n, 1});
  double stage_buf[features::kFeatureChannels];
  for (int i = 0; i < s; ++i) {
    const Vec3& p = samples.positions[static_cast<size_t>(i)];
    for (int v = 0; v < v_n; ++v) {
      const ViewBundle& view = views[static_cast<size_t>(v)];
      const Projection proj = project(p, view.k, view.pose);
      if (!proj.inside(view.k)) continue;
      const int row = i * v_n + v;
      out.valid.at(row, 0) = 1.0;
      double* dst = &out.per_view.at(row, 0);
      for (int st = 0; st < costvol::kCascadeStages; ++st) {
        const int scale = 1 << (features::kPyramidLevels - 1 - st);
        const double px = (proj.pixel.x() - 0.5 * (scale - 1)) / scale;
        const double py = (proj.pixel.y() - 0.5 * (scale - 1)) / scale;
        trilinear_volume(view.cascade->stages[static_cast<size_t>(st)], px, py,
                         proj.depth, stage_buf);
        for (int c = 0; c < features::kFeatureChannels; ++c)
          dst[st * features::kFeatureChannels + c] = stage_buf[c];
      }
      const int img_off = costvol::kCascadeStages * features::kFeatureChannels;
      sample_bilinear_all(*view.image_feature, proj.pixel.x(), proj.pixel.y(),
                          dst + img_off);
      double rgb_buf[3];
      sample_bilinear_all(*view.rgb, proj.pixel.x(), proj.pixel.y(), rgb_buf);
      for (int c = 0; c < 3; ++c) {
        dst[img_off + features::kFeatureChannels + c] = rgb_buf[c];
        out.rgb.at(row, c) = rgb_buf[c];
      }
    }
  }
  return out;
}

diff::Tensor pool_mean_var(const SampleFeatures& f) {
  const int s = f.samples;
  const int v_n = f.views;
  diff::Tensor out = diff::Tensor::zeros({s, 2 * kGatherChannels});
  for (int i = 0; i < s; ++i) {
    double n = 0.0;
    for (int v = 0; v < v_n; ++v) n += f.valid.at(i * v_n + v, 0);
    if (n == 0.0) continue;
    for (int c = 0; c < kGatherChannels; ++c) {
      double mean = 0.0;
      for (int v = 0; v < v_n; ++v)
        if (f.valid.at(i * v_n + v, 0) > 0.0)
          mean += f.per_view.at(i * v_n + v, c);
      mean /= n;
      double var = 0.0;
      for (int v = 0; v < v_n; ++v)
        if (f.valid.at(i * v_n + v, 0) > 0.0) {
          const double d = f.per_view.at(i * v_n + v, c) - mean;
          var += d * d;
        }
      var /= n;
      out.at(i, c) = mean;
      out.at(i, kGatherChannels + c) = var;
    }
  }
  return out;
}

RendererNet RendererNet::init(int views, std::uint64_t seed) {
  RendererNet net;
  net.views = views;
  if (views < 1 || views > net.hidden)
    throw std::invalid_argument("RendererNet: unsupported view count");
  const int in = 2 * kGatherChannels;
  auto to_tensor = [](const Eigen::MatrixXd& m) {
    diff::Tensor t = diff::Tensor::zeros(
        {static_cast<int>(m.rows()), static_cast<int>(m.cols())});
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) t.at(i, j) = m(i, j);
    return t;
  };
  net.w1 = to_tensor(orthonormal_columns(in, net.hidden, seed));
  net.w2 = to_tensor(orthonormal_columns(net.hidden, net.hidden, seed + 1));
  net.wd = to_tensor(orthonormal_columns(net.hidden, 1, seed + 2));
  net.wb = to_tensor(orthonormal_columns(net.hidden, views, seed + 3));
  net.b1 = diff::Tensor::zeros({1, net.hidden});
  net.b2 = diff::Tensor::zeros({1, net.hidden});
  net.bd = diff::Tensor::full({1, 1}, -1.0);
  net.bb = diff::Tensor::zeros({1, views});
  return net;
}

std::vector<std::pair<std::string, diff::Tensor*>>
RendererNet::named_tensors() {
  return {{"agg1_weight", &w1},    {"agg1_bias", &b1},
          {"agg2_weight", &w2},    {"agg2_bias", &b2},
          {"density_weight", &wd}, {"density_bias", &bd},
          {"blend_weight", &wb},   {"blend_bias", &bb}};
}

std::vector<std::pair<std::string, const diff::Tensor*>>
RendererNet::named_tensors() const {
  return {{"agg1_weight", &w1},    {"agg1_bias", &b1},
          {"agg2_weight", &w2},    {"agg2_bias", &b2},
          {"density_weight", &wd}, {"density_bias", &bd},
          {"blend_weight", &wb},   {"blend_bias", &bb}};
}

NetVars register_net(diff::Tape& tape, const RendererNet& net,
                     bool trainable) {
  NetVars v;
  v.w1 = tape.input(net.w1, trainable);
  v.b1 = tape.input(net.b1, trainable);
  v.w2 = tape.input(net.w2, trainable);
  v.b2 = tape.input(net.b2, trainable);
  v.wd = tape.input(net.wd, trainable);
  v.bd = tape.input(net.bd, trainable);
  v.wb = tape.input(net.wb, trainable);
  v.bb = tape.input(net.bb, trainable);
  return v;
}

RenderBatch make_batch(const std::vector<RaySamples>& rays,
                       const std::vector<ViewBundle>& views) {
  if (rays.empty()) throw std::invalid_argument("make_batch: no rays");
  check_views(views);
  const int b = static_cast<int>(rays.size());
  const int s = static_cast<int>(rays[0].t.size());
  const int v_n = static_cast<int>(views.size());
  RenderBatch batch;
  batch.rays = b;
  batch.samples = s;
  batch.views = v_n;
  batch.pooled = diff::Tensor::zeros({b * s, 2 * kGatherChannels});
  for (auto& ch : batch.rgb) ch = diff::Tensor::zeros({b * s, v_n});
  batch.mask = diff::Tensor::zeros({b * s, v_n});
  batch.any = diff::Tensor::zeros({b * s, 1});
  batch.t = diff::Tensor::zeros({b, s});
  batch.delta = diff::Tensor::zeros({b, s});
  for (int r = 0; r < b; ++r) {
    const RaySamples& rs = rays[static_cast<size_t>(r)];
    if (static_cast<int>(rs.t.size()) != s)
      throw std::invalid_argument("make_batch: inconsistent sample counts");
    const SampleFeatures f = gather(rs, views);
    const diff::Tensor pooled = pool_mean_var(f);
    for (int i = 0; i < s; ++i) {
      const int row = r * s + i;
      for (int c = 0; c < 2 * kGatherChannels; ++c)
        batch.pooled.at(row, c) = pooled.at(i, c);
      double any = 0.0;
      for (int v = 0; v < v_n; ++v) {
        const double m = f.valid.at(i * v_n + v, 0);
        batch.mask.at(row, v) = m;
        any = std::max(any, m);
        for (int c = 0; c < 3; ++c)
          batch.rgb[static_cast<size_t>(c)].at(row, v) =
              f.rgb.at(i * v_n + v, c);
      }
      batch.any.at(row, 0) = any;
      batch.t.at(r, i) = rs.t[static_cast<size_t>(i)];
      batch.delta.at(r, i) = rs.delta[static_cast<size_t>(i)];
    }
  }
  return batch;
}

Rendered render_batch(diff::Tape& tape, const NetVars& vars,
                      const RenderBatch& batch) {
  const int b = batch.rays;
  const int s = batch.samples;
  const int v_n = batch.views;
  const int n = b * s;
  if (batch.pooled.rows() != n || batch.pooled.cols() != 2 * kGatherChannels)
    throw std::invalid_argument("render_batch: bad pooled shape");
  if (batch.mask.rows() != n || batch.mask.cols() != v_n)
    throw std::invalid_argument("render_batch: bad mask shape");
  const int hid = tape.value(vars.b1).cols();

  const diff::Var x = tape.constant(batch.pooled);
  const diff::Var any = tape.constant(batch.any);
  diff::Tensor shift = batch.mask;
  for (double& m : shift.values) m = (m - 1.0) * kLogitFloor;
  const diff::Var logit_shift = tape.constant(std::move(shift));

  const diff::Var h1 = tape.softplus(
      tape.add(tape.matmul(x, vars.w1), tape.broadcast(vars.b1, {n, hid})));
  const diff::Var h2 = tape.softplus(
      tape.add(tape.matmul(h1, vars.w2), tape.broadcast(vars.b2, {n, hid})));

  const diff::Var sigma_raw = tape.softplus(
      tape.add(tape.matmul(h2, vars.wd), tape.broadcast(vars.bd, {n, 1})));
  const diff::Var sigma = tape.mul(sigma_raw, any);

  const diff::Var logits =
      tape.add(tape.matmul(h2, vars.wb), tape.broadcast(vars.bb, {n, v_n}));
  const diff::Var blend = tape.softmax(tape.add(logits, logit_shift), 1);

  const diff::Var ones_v = tape.constant(diff::Tensor::full({v_n, 1}, 1.0));
  const diff::Var ones_s = tape.constant(diff::Tensor::full({s, 1}, 1.0));

  diff::Tensor delta_col({n, 1}, batch.delta.values);
  const diff::Var sd = tape.reshape(
      tape.mul(sigma, tape.constant(std::move(delta_col))), {b, s});
  const diff::Var alpha =
      tape.scale(tape.add_const(tape.exp(tape.scale(sd, -1.0)), -1.0), -1.0);
  const diff::Var trans =
      tape.exp(tape.scale(tape.cumsum_exclusive(sd), -1.0));
  const diff::Var w = tape.mul(trans, alpha);

  const diff::Var sum_w = tape.matmul(w, ones_s);
  const diff::Var sum_wt =
      tape.matmul(tape.mul(w, tape.constant(batch.t)), ones_s);
  const diff::Var depth =
      tape.mul(sum_wt, tape.reciprocal(tape.clamp_min(sum_w, kWeightEps)));

  Rendered out;
  for (int c = 0; c < 3; ++c) {
    const diff::Var sample_color = tape.matmul(
        tape.mul(blend, tape.constant(batch.rgb[static_cast<size_t>(c)])),
        ones_v);
    out.color[static_cast<size_t>(c)] =
        tape.matmul(tape.mul(w, tape.reshape(sample_color, {b, s})), ones_s);
  }
  out.depth = depth;
  out.opacity = sum_w;
  out.weights = w;
  out.sigma = sigma;
  return out;
}

BatchOutputs render_batch_plain(const RendererNet& net,
                                const RenderBatch& batch) {
  if (batch.views != net.views)
    throw std::invalid_argument("render_batch_plain: view count mismatch");
  const int b = batch.rays;
  const int s = batch.samples;
  BatchOutputs out;
  out.color.assign(static_cast<size_t>(b), Vec3::Zero());
  out.depth.assign(static_cast<size_t>(b), 0.0);
  out.opacity.assign(static_cast<size_t>(b), 0.0);
  std::vector<Vec3> colors(static_cast<size_t>(s));
  std::vector<double> sigma(static_cast<size_t>(s));
  for (int r = 0; r < b; ++r) {
    forward_plain_rows(net, batch, r * s, s, colors.data(), sigma.data());
    double acc = 0.0;  // running sum of sigma * delta for transmittance
    Vec3 color = Vec3::Zero();
    double sum_w = 0.0;
    double sum_wt = 0.0;
    for (int i = 0; i < s; ++i) {
      const double sd = sigma[static_cast<size_t>(i)] * batch.delta.at(r, i);
      const double alpha = -(std::exp(-sd) - 1.0);
      const double w = std::exp(-acc) * alpha;
      acc += sd;
      color += w * colors[static_cast<size_t>(i)];
      sum_w += w;
      sum_wt += w * batch.t.at(r, i);
    }
    out.color[static_cast<size_t>(r)] = color;
    out.depth[static_cast<size_t>(r)] = sum_wt / std::max(sum_w, kWeightEps);
    out.opacity[static_cast<size_t>(r)] = sum_w;
  }
  return out;
}

RenderedPixel composite(const std::vector<Vec3>& colors,
                        const std::vector<double>& sigma,
                        const RaySamples& samples) {
  const size_t s = samples.t.size();
  if (colors.size() != s || sigma.size() != s)
    throw std::invalid_argument("composite: size mismatch");
  RenderedPixel out;
  out.weights.assign(s, 0.0);
  double acc = 0.0;
  double sum_wt = 0.0;
  for (size_t i = 0; i < s; ++i) {
    const double sd = sigma[i] * samples.delta[i];
    const double alpha = -(std::exp(-sd) - 1.0);
    const double w = std::exp(-acc) * alpha;
    acc += sd;
    out.weights[i] = w;
    out.color += w * colors[i];
    out.opacity += w;
    sum_wt += w * samples.t[i];
  }
  out.depth = sum_wt / std::max(out.opacity, kWeightEps);
  return out;
}

RenderedPixel render_pixel(const Ray& ray,
                           const std::vector<ViewBundle>& views,
                           const RendererNet& net, double near, double far,
                           int s) {
  const RaySamples rs = sample_ray(ray, near, far, s);
  const RenderBatch batch = make_batch({rs}, views);
  if (batch.views != net.views)
    throw std::invalid_argument("render_pixel: view count mismatch");
  std::vector<Vec3> colors(static_cast<size_t>(s));
  std::vector<double> sigma(static_cast<size_t>(s));
  forward_plain_rows(net, batch, 0, s, colors.data(), sigma.data());
  return composite(colors, sigma, rs);
}

}  // namespace svs::render
