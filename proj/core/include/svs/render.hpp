// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "svs/costvol.hpp"
#include "svs/diff.hpp"
#include "svs/features.hpp"
#include "svs/geometry.hpp"
#include "svs/image.hpp"

namespace svs::render {

// Camera ray parameterized by z-depth: position(t) = origin + t * dir, with
// dir scaled so t is the depth in the camera frame, matching backproject.
struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::UnitZ();
};

Ray pixel_ray(const Vec2& pixel, const Intrinsics& k, const Pose& pose);

struct RaySamples {
  std::vector<double> t;        // sample depths, ascending, inside [near,far]
  std::vector<Vec3> positions;  // origin + t_i * dir
  std::vector<double> delta;    // t_{i+1} - t_i; the last entry is far - t_S
};

// Stratified-uniform depths over [near, far]: slice midpoints when rng is
// null, a uniform draw inside each slice otherwise.
RaySamples sample_ray(const Ray& ray, double near, double far, int s,
                      std::mt19937_64* rng = nullptr);

// Everything the renderer reads from one source view. Pointers are borrowed
// and must outlive every gather call.
struct ViewBundle {
  const costvol::Cascade* cascade = nullptr;
  const Grid* image_feature = nullptr;  // full-resolution feature grid
  const Grid* rgb = nullptr;            // full-resolution image
  Intrinsics k;                         // full-resolution intrinsics
  Pose pose;
};

// Per (sample, view): the volume feature of every cascade stage, the image
// feature, and the view's rgb.
inline constexpr int kGatherChannels =
    (costvol::kCascadeStages + 1) * features::kFeatureChannels + 3;

struct SampleFeatures {
  diff::Tensor per_view;  // [S*V, kGatherChannels], row i*V + v
  diff::Tensor rgb;       // [S*V, 3]
  diff::Tensor valid;     // [S*V, 1], 1 when the view sees the sample
  int samples = 0;
  int views = 0;
};

// Projects each sample into each view: volume features are interpolated
// bilinearly in the image plane and linearly across the per-pixel planes;
// image features and rgb bilinearly at full resolution. A view is valid for
// a sample when the projection lands in front of the camera and inside the
// full-resolution frame; invalid rows are zero.
SampleFeatures gather(const RaySamples& samples,
                      const std::vector<ViewBundle>& views);

// Masked mean and variance over the valid views -> [S, 2*kGatherChannels].
// Samples with no valid view pool to zero.
diff::Tensor pool_mean_var(const SampleFeatures& f);

// Aggregation MLP over pooled features: two softplus hidden layers feeding a
// softplus density head and one blending logit per source view. Blending
// weights come from a masked softmax over the valid views and mix the source
// rgb samples into the sample color.
struct RendererNet {
  int views = 0;
  int hidden = 32;
  diff::Tensor w1, b1;  // [2*kGatherChannels, hidden], [1, hidden]
  diff::Tensor w2, b2;  // [hidden, hidden], [1, hidden]
  diff::Tensor wd, bd;  // [hidden, 1], [1, 1]
  diff::Tensor wb, bb;  // [hidden, views], [1, views]

  // Orthonormal-column init, biases zero except the density bias at -1 so an
  // untrained scene starts near transparent.
  static RendererNet init(int views, std::uint64_t seed);

  std::vector<std::pair<std::string, diff::Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const diff::Tensor*>> named_tensors()
      const;
};

struct NetVars {
  diff::Var w1, b1, w2, b2, wd, bd, wb, bb;
};

NetVars register_net(diff::Tape& tape, const RendererNet& net, bool trainable);

// A batch of rays with constant (non-differentiable) gathered inputs.
struct RenderBatch {
  diff::Tensor pooled;            // [B*S, 2*kGatherChannels]
  std::array<diff::Tensor, 3> rgb;  // [B*S, V] per color channel
  diff::Tensor mask;              // [B*S, V]
  diff::Tensor any;               // [B*S, 1], 1 when any view is valid
  diff::Tensor t;                 // [B, S]
  diff::Tensor delta;             // [B, S]
  int rays = 0;
  int samples = 0;
  int views = 0;
};

RenderBatch make_batch(const std::vector<RaySamples>& rays,
                       const std::vector<ViewBundle>& views);

// Differentiable forward pass: net -> densities and blend weights ->
// alpha compositing. color/depth/opacity are per ray, sigma per sample.
struct Rendered {
  std::array<diff::Var, 3> color;  // [B, 1] each
  diff::Var depth;                 // [B, 1]
  diff::Var opacity;               // [B, 1]
  diff::Var weights;               // [B, S]
  diff::Var sigma;                 // [B*S, 1]
};

Rendered render_batch(diff::Tape& tape, const NetVars& vars,
                      const RenderBatch& batch);

// Tape-free forward pass with identical arithmetic, for inference.
struct BatchOutputs {
  std::vector<Vec3> color;      // per ray
  std::vector<double> depth;    // per ray
  std::vector<double> opacity;  // per ray
};

BatchOutputs render_batch_plain(const RendererNet& net,
                                const RenderBatch& batch);

struct RenderedPixel {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  double opacity = 0.0;
  std::vector<double> weights;  // per sample
};

// Closed-form alpha compositing of one ray: alpha_i = 1 - exp(-sigma_i
// delta_i), T_i the transmittance product, w_i = T_i alpha_i, depth the
// weight-normalized expectation (epsilon-guarded).
RenderedPixel composite(const std::vector<Vec3>& colors,
                        const std::vector<double>& sigma,
                        const RaySamples& samples);

// sample -> gather -> net -> composite for a single pixel ray, unjittered.
RenderedPixel render_pixel(const Ray& ray,
                           const std::vector<ViewBundle>& views,
                           const RendererNet& net, double near, double far,
                           int s);

}  // namespace svs::render
