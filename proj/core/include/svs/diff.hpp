// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

namespace svs::diff {

// Dense row-major tensor of doubles, rank 1 or 2.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> v);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);
  static Tensor scalar(double value) { return full({1}, value); }

  long long numel() const;
  int rank() const { return static_cast<int>(shape.size()); }
  int rows() const;
  int cols() const;

  double& at(int i) { return values[static_cast<size_t>(i)]; }
  double at(int i) const { return values[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return values[static_cast<size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return values[static_cast<size_t>(i) * cols() + j]; }
};

std::string shape_str(const std::vector<int>& shape);

// Handle to a value recorded on a tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Records every op during the forward pass and replays
// them in exact reverse order on backward(), accumulating gradients
// additively. Single-owner: one tape must not be shared across threads during
// recording or backward.
class Tape {
 public:
  // Leaves. Gradients flow only into trainable inputs.
  Var input(Tensor value, bool trainable = false);
  Var constant(Tensor value) { return input(std::move(value), false); }

  const Tensor& value(Var v) const;
  // Valid after backward(); zero tensor if the var received no gradient.
  const Tensor& grad(Var v) const;

  // Elementwise, identical shapes.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);

  // Scalar-constant variants.
  Var scale(Var a, double s);
  Var add_const(Var a, double c);

  Var matmul(Var a, Var b);

  Var sum(Var a);   // -> [1]
  Var mean(Var a);  // -> [1]

  Var exp(Var a);
  Var log(Var a);  // domain: strictly positive values
  Var relu(Var a);
  Var softplus(Var a);
  Var sigmoid(Var a);
  Var reciprocal(Var a);            // domain: nonzero values
  Var clamp_min(Var a, double lo);  // gradient passes where value >= lo
  Var smooth_l1(Var a, double beta);

  // axis = 0 normalizes down columns, axis = 1 across rows (2-D input).
  Var softmax(Var a, int axis);

  // Supported expansions: [1] -> any, [n,1] -> [n,c], [1,c] -> [n,c].
  Var broadcast(Var a, std::vector<int> target_shape);
  Var reshape(Var a, std::vector<int> new_shape);
  // Contiguous range of the flattened buffer, result is rank-1.
  Var slice(Var a, int begin, int count);
  // [g,c] -> [g*times,c]; each row repeated `times` times consecutively.
  Var repeat_rows(Var a, int times);
  // [g*group,c] -> [g,c]; sums each contiguous block of `group` rows.
  Var group_sum_rows(Var a, int group);
  // 2-D, axis 1: out[r,0] = 0, out[r,i] = sum_{j<i} in[r,j].
  Var cumsum_exclusive(Var a);

  // Identity forward, blocks gradient flow.
  Var stop_gradient(Var a);

  // Seeds d(scalar)/d(scalar) = 1 and propagates to all trainable leaves.
  void backward(Var scalar_output);

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  // Backward callbacks receive the id of their own output node.
  using BackFn = std::function<void(Tape&, int)>;

  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    BackFn back;
  };

  Var make(Tensor value, bool needs_grad, BackFn back);
  void accumulate(int id, const Tensor& g);
  Tensor& grad_buffer(int id);
  const Tensor& val_grad(int id);
  const Tensor& val(int id) const;
  bool wants_grad(int id) const;
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  Tensor empty_grad_;
};

// Compares the tape gradient of a scalar-valued function against central
// finite differences, coordinate by coordinate. Returns the maximum relative
// error, where each coordinate's error is normalized by
// max(1, |analytic|, |numeric|) so that near-zero components degrade to an
// absolute comparison instead of blowing up.
double grad_check(const std::function<Var(Tape&, Var)>& scalar_fn,
                  const Tensor& input, double eps);

}  // namespace svs::diff
