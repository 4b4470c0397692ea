// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/diff.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace svs::diff {

namespace {

long long product(const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive");
    n *= d;
  }
  return n;
}

[[noreturn]] void shape_error(const char* op, const std::vector<int>& a,
                              const std::vector<int>& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              shape_str(a) + " vs " + shape_str(b));
}

void require_2d(const char* op, const Tensor& t) {
  if (t.rank() != 2)
    throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " +
                                shape_str(t.shape));
}

// C += A * B with optional transposes, ikj order for cache locality.
void gemm_acc(const double* a, int ar, int ac, bool ta, const double* b, int br,
              int bc, bool tb, double* c) {
  const int m = ta ? ac : ar;
  const int k = ta ? ar : ac;
  const int n = tb ? br : bc;
  if ((tb ? bc : br) != k) throw std::invalid_argument("gemm: inner dim mismatch");
  if (!ta && !tb) {
    for (int i = 0; i < m; ++i) {
      const double* ai = a + static_cast<size_t>(i) * ac;
      double* ci = c + static_cast<size_t>(i) * n;
      for (int p = 0; p < k; ++p) {
        const double av = ai[p];
        if (av == 0.0) continue;
        const double* bp = b + static_cast<size_t>(p) * bc;
        for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else if (ta && !tb) {
    for (int p = 0; p < k; ++p) {
      const double* ap = a + static_cast<size_t>(p) * ac;
      const double* bp = b + static_cast<size_t>(p) * bc;
      for (int i = 0; i < m; ++i) {
        const double av = ap[i];
        if (av == 0.0) continue;
        double* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else if (!ta && tb) {
    for (int i = 0; i < m; ++i) {
      const double* ai = a + static_cast<size_t>(i) * ac;
      double* ci = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const double* bj = b + static_cast<size_t>(j) * bc;
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
        ci[j] += s;
      }
    }
  } else {
    throw std::invalid_argument("gemm: double transpose unsupported");
  }
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<int> s, std::vector<double> v)
    : shape(std::move(s)), values(std::move(v)) {
  if (product(shape) != static_cast<long long>(values.size()))
    throw std::invalid_argument("tensor shape " + shape_str(shape) +
                                " does not match value count " +
                                std::to_string(values.size()));
}

Tensor Tensor::zeros(std::vector<int> shape) {
  const auto n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
  const auto n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), value));
}

long long Tensor::numel() const { return static_cast<long long>(values.size()); }

int Tensor::rows() const {
  if (shape.empty()) throw std::invalid_argument("rows(): rank-0 tensor");
  return shape[0];
}

int Tensor::cols() const {
  if (shape.size() < 2) return 1;
  return shape[1];
}

Var Tape::make(Tensor value, bool needs_grad, BackFn back) {
#ifndef NDEBUG
  for (double v : value.values)
    if (!std::isfinite(v))
      throw std::runtime_error("non-finite value produced on tape at node " +
                               std::to_string(nodes_.size()));
#endif
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("invalid tape var handle");
  return nodes_[static_cast<size_t>(v.id)];
}

Var Tape::input(Tensor value, bool trainable) {
  return make(std::move(value), trainable, nullptr);
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.grad.values.empty()) return n.grad;
  if (empty_grad_.shape != n.value.shape)
    const_cast<Tape*>(this)->empty_grad_ = Tensor::zeros(n.value.shape);
  return empty_grad_;
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.values.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

void Tape::accumulate(int id, const Tensor& g) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.needs_grad) return;
  Tensor& acc = grad_buffer(id);
  for (size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += g.values[i];
}

bool Tape::wants_grad(int id) const {
  return nodes_[static_cast<size_t>(id)].needs_grad;
}

const Tensor& Tape::val(int id) const {
  return nodes_[static_cast<size_t>(id)].value;
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape != tb.shape) shape_error("add", ta.shape, tb.shape);
  Tensor out = ta;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += tb.values[i];
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  const int ia = a.id, ib = b.id;
  return make(std::move(out), ng, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.val_grad(self);
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape != tb.shape) shape_error("sub", ta.shape, tb.shape);
  Tensor out = ta;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] -= tb.values[i];
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  const int ia = a.id, ib = b.id;
  return make(std::move(out), ng, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.val_grad(self);
    t.accumulate(ia, g);
    if (t.wants_grad(ib)) {
      Tensor neg = g;
      for (double& v : neg.values) v = -v;
      t.accumulate(ib, neg);
    }
  });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.shape != tb.shape) shape_error("mul", ta.shape, tb.shape);
  Tensor out = ta;
  for (size_t i = 0; i < out.values.size(); ++i) out.values[i] *= tb.values[i];
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  const int ia = a.id, ib = b.id;
  return make(std::move(out), ng, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.val_grad(self);
    if (t.wants_grad(ia)) {
      Tensor ga = g;
      const Tensor& vb = t.val(ib);
      for (size_t i = 0; i < ga.values.size(); ++i) ga.values[i] *= vb.values[i];
      t.accumulate(ia, ga);
    }
    if (t.wants_grad(ib)) {
      Tensor gb = g;
      const Tensor& va = t.val(ia);
      for (size_t i = 0; i < gb.values.size(); ++i) gb.values[i] *= va.values[i];
      t.accumulate(ib, gb);
    }
  });
}

Var Tape::scale(Var a, double s) {
  Tensor out = value(a);
  for (double& v : out.values) v *= s;
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia, s](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    Tensor g = t.val_grad(self);
    for (double& v : g.values) v *= s;
    t.accumulate(ia, g);
  });
}

Var Tape::add_const(Var a, double c) {
  Tensor out = value(a);
  for (double& v : out.values) v += c;
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad,
              [ia](Tape& t, int self) { t.accumulate(ia, t.val_grad(self)); });
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  require_2d("matmul", ta);
  require_2d("matmul", tb);
  if (ta.cols() != tb.rows()) shape_error("matmul", ta.shape, tb.shape);
  Tensor out = Tensor::zeros({ta.rows(), tb.cols()});
  gemm_acc(ta.values.data(), ta.rows(), ta.cols(), false, tb.values.data(),
           tb.rows(), tb.cols(), false, out.values.data());
  const bool ng = node(a).needs_grad || node(b).needs_grad;
  const int ia = a.id, ib = b.id;
  return make(std::move(out), ng, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.val_grad(self);
    const Tensor& va = t.val(ia);
    const Tensor& vb = t.val(ib);
    if (t.wants_grad(ia)) {
      // dA = dC * B^T
      Tensor& acc = t.grad_buffer(ia);
      gemm_acc(g.values.data(), g.rows(), g.cols(), false, vb.values.data(),
               vb.rows(), vb.cols(), true, acc.values.data());
    }
    if (t.wants_grad(ib)) {
      // dB = A^T * dC
      Tensor& acc = t.grad_buffer(ib);
      gemm_acc(va.values.data(), va.rows(), va.cols(), true, g.values.data(),
               g.rows(), g.cols(), false, acc.values.data());
    }
  });
}

Var Tape::sum(Var a) {
  const Tensor& ta = value(a);
  double s = 0.0;
  for (double v : ta.values) s += v;
  const int ia = a.id;
  return make(Tensor::scalar(s), node(a).needs_grad, [ia](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    const double g = t.val_grad(self).values[0];
    Tensor& acc = t.grad_buffer(ia);
    for (double& v : acc.values) v += g;
  });
}

Var Tape::mean(Var a) {
  const Tensor& ta = value(a);
  const double inv = 1.0 / static_cast<double>(ta.numel());
  double s = 0.0;
  for (double v : ta.values) s += v;
  const int ia = a.id;
  return make(Tensor::scalar(s * inv), node(a).needs_grad,
              [ia, inv](Tape& t, int self) {
                if (!t.wants_grad(ia)) return;
                const double g = t.val_grad(self).values[0] * inv;
                Tensor& acc = t.grad_buffer(ia);
                for (double& v : acc.values) v += g;
              });
}

Var Tape::exp(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) v = std::exp(v);
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    Tensor g = t.val_grad(self);
    const Tensor& y = t.val(self);
    for (size_t i = 0; i < g.values.size(); ++i) g.values[i] *= y.values[i];
    t.accumulate(ia, g);
  });
}

Var Tape::log(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) {
    if (v <= 0.0) throw std::domain_error("log: nonpositive input");
    v = std::log(v);
  }
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    Tensor g = t.val_grad(self);
    const Tensor& x = t.val(ia);
    for (size_t i = 0; i < g.values.size(); ++i) g.values[i] /= x.values[i];
    t.accumulate(ia, g);
  });
}

Var Tape::relu(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) v = v > 0.0 ? v : 0.0;
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    Tensor g = t.val_grad(self);
    const Tensor& x = t.val(ia);
    for (size_t i = 0; i < g.values.size(); ++i)
      if (x.values[i] <= 0.0) g.values[i] = 0.0;
    t.accumulate(ia, g);
  });
}

Var Tape::softplus(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) {
    if (v > 30.0) continue;  // softplus(x) ~= x
    v = v < -30.0 ? std::exp(v) : std::log1p(std::exp(v));
  }
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    Tensor g = t.val_grad(self);
    const Tensor& x = t.val(ia);
    for (size_t i = 0; i < g.values.size(); ++i) {
      const double xv = x.values[i];
      const double s = xv > 0.0 ? 1.0 / (1.0 + std::exp(-xv))
                                : std::exp(xv) / (1.0 + std::exp(xv));
      g.values[i] *= s;
    }
    t.accumulate(ia, g);
  });
}

Var Tape::sigmoid(Var a) {
  Tensor out = value(a);
  for (double& v : out.values)
    v = v > 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    Tensor g = t.val_grad(self);
    const Tensor& y = t.val(self);
    for (size_t i = 0; i < g.values.size(); ++i)
      g.values[i] *= y.values[i] * (1.0 - y.values[i]);
    t.accumulate(ia, g);
  });
}

Var Tape::reciprocal(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) {
    if (v == 0.0) throw std::domain_error("reciprocal: zero input");
    v = 1.0 / v;
  }
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    Tensor g = t.val_grad(self);
    const Tensor& y = t.val(self);
    for (size_t i = 0; i < g.values.size(); ++i)
      g.values[i] *= -y.values[i] * y.values[i];
    t.accumulate(ia, g);
  });
}

Var Tape::clamp_min(Var a, double lo) {
  Tensor out = value(a);
  for (double& v : out.values) v = v < lo ? lo : v;
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia, lo](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    Tensor g = t.val_grad(self);
    const Tensor& x = t.val(ia);
    for (size_t i = 0; i < g.values.size(); ++i)
      if (x.values[i] < lo) g.values[i] = 0.0;
    t.accumulate(ia, g);
  });
}

Var Tape::smooth_l1(Var a, double beta) {
  if (beta <= 0.0) throw std::invalid_argument("smooth_l1: beta must be positive");
  Tensor out = value(a);
  for (double& v : out.values) {
    const double ax = std::abs(v);
    v = ax < beta ? 0.5 * v * v / beta : ax - 0.5 * beta;
  }
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia, beta](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    Tensor g = t.val_grad(self);
    const Tensor& x = t.val(ia);
    for (size_t i = 0; i < g.values.size(); ++i) {
      const double xv = x.values[i];
      const double d = std::abs(xv) < beta ? xv / beta : (xv > 0.0 ? 1.0 : -1.0);
      g.values[i] *= d;
    }
    t.accumulate(ia, g);
  });
}

Var Tape::softmax(Var a, int axis) {
  const Tensor& ta = value(a);
  require_2d("softmax", ta);
  if (axis != 0 && axis != 1)
    throw std::invalid_argument("softmax: axis must be 0 or 1");
  const int r = ta.rows(), c = ta.cols();
  Tensor out = ta;
  const int outer = axis == 1 ? r : c;
  const int inner = axis == 1 ? c : r;
  auto idx = [&](int o, int i) {
    return axis == 1 ? static_cast<size_t>(o) * c + i : static_cast<size_t>(i) * c + o;
  };
  for (int o = 0; o < outer; ++o) {
    double m = out.values[idx(o, 0)];
    for (int i = 1; i < inner; ++i) m = std::max(m, out.values[idx(o, i)]);
    double z = 0.0;
    for (int i = 0; i < inner; ++i) {
      double& v = out.values[idx(o, i)];
      v = std::exp(v - m);
      z += v;
    }
    for (int i = 0; i < inner; ++i) out.values[idx(o, i)] /= z;
  }
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia, axis, r, c](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    const Tensor& g = t.val_grad(self);
    const Tensor& y = t.val(self);
    Tensor gx = Tensor::zeros({r, c});
    const int outer = axis == 1 ? r : c;
    const int inner = axis == 1 ? c : r;
    auto idx = [&](int o, int i) {
      return axis == 1 ? static_cast<size_t>(o) * c + i
                       : static_cast<size_t>(i) * c + o;
    };
    for (int o = 0; o < outer; ++o) {
      double dot = 0.0;
      for (int i = 0; i < inner; ++i)
        dot += g.values[idx(o, i)] * y.values[idx(o, i)];
      for (int i = 0; i < inner; ++i)
        gx.values[idx(o, i)] = y.values[idx(o, i)] * (g.values[idx(o, i)] - dot);
    }
    t.accumulate(ia, gx);
  });
}

Var Tape::broadcast(Var a, std::vector<int> target_shape) {
  const Tensor& ta = value(a);
  const int ia = a.id;
  if (ta.numel() == 1) {
    Tensor out = Tensor::full(target_shape, ta.values[0]);
    return make(std::move(out), node(a).needs_grad, [ia](Tape& t, int self) {
      if (!t.wants_grad(ia)) return;
      const Tensor& g = t.val_grad(self);
      double s = 0.0;
      for (double v : g.values) s += v;
      Tensor gs = Tensor::full(t.val(ia).shape, 0.0);
      gs.values[0] = s;
      t.accumulate(ia, gs);
    });
  }
  if (ta.rank() == 2 && target_shape.size() == 2) {
    const int r = target_shape[0], c = target_shape[1];
    if (ta.rows() == r && ta.cols() == 1) {
      // column vector across columns
      Tensor out = Tensor::zeros({r, c});
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at(i, j) = ta.at(i, 0);
      return make(std::move(out), node(a).needs_grad, [ia, r, c](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& g = t.val_grad(self);
        Tensor gs = Tensor::zeros({r, 1});
        for (int i = 0; i < r; ++i) {
          double s = 0.0;
          for (int j = 0; j < c; ++j) s += g.at(i, j);
          gs.at(i, 0) = s;
        }
        t.accumulate(ia, gs);
      });
    }
    if (ta.rows() == 1 && ta.cols() == c) {
      // row vector down rows
      Tensor out = Tensor::zeros({r, c});
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at(i, j) = ta.at(0, j);
      return make(std::move(out), node(a).needs_grad, [ia, r, c](Tape& t, int self) {
        if (!t.wants_grad(ia)) return;
        const Tensor& g = t.val_grad(self);
        Tensor gs = Tensor::zeros({1, c});
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j) gs.at(0, j) += g.at(i, j);
        t.accumulate(ia, gs);
      });
    }
  }
  shape_error("broadcast", ta.shape, target_shape);
}

Var Tape::reshape(Var a, std::vector<int> new_shape) {
  const Tensor& ta = value(a);
  if (product(new_shape) != ta.numel()) shape_error("reshape", ta.shape, new_shape);
  Tensor out(new_shape, ta.values);
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    const Tensor& g = t.val_grad(self);
    Tensor gs(t.val(ia).shape, g.values);
    t.accumulate(ia, gs);
  });
}

Var Tape::slice(Var a, int begin, int count) {
  const Tensor& ta = value(a);
  if (begin < 0 || count <= 0 || begin + count > ta.numel())
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + "," +
                                std::to_string(begin + count) +
                                ") outside tensor of size " +
                                std::to_string(ta.numel()));
  Tensor out({count}, std::vector<double>(ta.values.begin() + begin,
                                          ta.values.begin() + begin + count));
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia, begin, count](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    const Tensor& g = t.val_grad(self);
    Tensor& acc = t.grad_buffer(ia);
    for (int i = 0; i < count; ++i)
      acc.values[static_cast<size_t>(begin + i)] += g.values[static_cast<size_t>(i)];
  });
}

Var Tape::repeat_rows(Var a, int times) {
  const Tensor& ta = value(a);
  require_2d("repeat_rows", ta);
  if (times <= 0) throw std::invalid_argument("repeat_rows: times must be positive");
  const int rows_in = ta.rows(), c = ta.cols();
  Tensor out = Tensor::zeros({rows_in * times, c});
  for (int i = 0; i < rows_in; ++i)
    for (int k = 0; k < times; ++k)
      for (int j = 0; j < c; ++j) out.at(i * times + k, j) = ta.at(i, j);
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad,
              [ia, rows_in, times, c](Tape& t, int self) {
                if (!t.wants_grad(ia)) return;
                const Tensor& g = t.val_grad(self);
                Tensor gs = Tensor::zeros({rows_in, c});
                for (int i = 0; i < rows_in; ++i)
                  for (int k = 0; k < times; ++k)
                    for (int j = 0; j < c; ++j) gs.at(i, j) += g.at(i * times + k, j);
                t.accumulate(ia, gs);
              });
}

Var Tape::group_sum_rows(Var a, int group) {
  const Tensor& ta = value(a);
  require_2d("group_sum_rows", ta);
  if (group <= 0 || ta.rows() % group != 0)
    throw std::invalid_argument("group_sum_rows: rows " + std::to_string(ta.rows()) +
                                " not divisible by group " + std::to_string(group));
  const int rows_out = ta.rows() / group, c = ta.cols();
  Tensor out = Tensor::zeros({rows_out, c});
  for (int i = 0; i < rows_out; ++i)
    for (int k = 0; k < group; ++k)
      for (int j = 0; j < c; ++j) out.at(i, j) += ta.at(i * group + k, j);
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad,
              [ia, rows_out, group, c](Tape& t, int self) {
                if (!t.wants_grad(ia)) return;
                const Tensor& g = t.val_grad(self);
                Tensor gs = Tensor::zeros({rows_out * group, c});
                for (int i = 0; i < rows_out; ++i)
                  for (int k = 0; k < group; ++k)
                    for (int j = 0; j < c; ++j) gs.at(i * group + k, j) = g.at(i, j);
                t.accumulate(ia, gs);
              });
}

Var Tape::cumsum_exclusive(Var a) {
  const Tensor& ta = value(a);
  require_2d("cumsum_exclusive", ta);
  const int r = ta.rows(), c = ta.cols();
  Tensor out = Tensor::zeros({r, c});
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) {
      out.at(i, j) = s;
      s += ta.at(i, j);
    }
  }
  const int ia = a.id;
  return make(std::move(out), node(a).needs_grad, [ia, r, c](Tape& t, int self) {
    if (!t.wants_grad(ia)) return;
    const Tensor& g = t.val_grad(self);
    Tensor gs = Tensor::zeros({r, c});
    for (int i = 0; i < r; ++i) {
      double s = 0.0;
      for (int j = c - 1; j >= 0; --j) {
        gs.at(i, j) = s;  // d out[i,k]/d in[i,j] = 1 exactly when k > j
        s += g.at(i, j);
      }
    }
    t.accumulate(ia, gs);
  });
}

Var Tape::stop_gradient(Var a) {
  Tensor out = value(a);
  return make(std::move(out), false, nullptr);
}

const Tensor& Tape::val_grad(int id) {
  return grad_buffer(id);
}

void Tape::backward(Var scalar_output) {
  const Node& out = node(scalar_output);
  if (out.value.numel() != 1)
    throw std::invalid_argument("backward: output must be scalar, got shape " +
                                shape_str(out.value.shape));
  grad_buffer(scalar_output.id).values[0] = 1.0;
  for (int id = scalar_output.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad || !n.back || n.grad.values.empty()) continue;
    n.back(*this, id);
  }
}

double grad_check(const std::function<Var(Tape&, Var)>& scalar_fn,
                  const Tensor& input, double eps) {
  if (eps < 1e-7 || eps > 1e-4)
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-4]");
  Tape tape;
  Var x = tape.input(input, true);
  Var y = scalar_fn(tape, x);
  if (tape.value(y).numel() != 1)
    throw std::invalid_argument("grad_check: function output must be scalar");
  tape.backward(y);
  const Tensor analytic = tape.grad(x);

  auto eval = [&](const Tensor& at) {
    Tape t;
    Var xv = t.input(at, false);
    Var yv = scalar_fn(t, xv);
    return t.value(yv).values[0];
  };

  double worst = 0.0;
  Tensor probe = input;
  for (size_t i = 0; i < probe.values.size(); ++i) {
    const double keep = probe.values[i];
    probe.values[i] = keep + eps;
    const double fp = eval(probe);
    probe.values[i] = keep - eps;
    const double fm = eval(probe);
    probe.values[i] = keep;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double got = analytic.values[i];
    const double denom = std::max({1.0, std::abs(numeric), std::abs(got)});
    worst = std::max(worst, std::abs(numeric - got) / denom);
  }
  return worst;
}

}  // namespace svs::diff
