// include/accentvae/autodiff.hpp

// Copyright 2026 The accentvae Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records every intermediate matrix together with a closure that
// propagates the gradient of that node into its inputs. Values are computed
// eagerly; Tape::Backward walks the record in reverse. Parameters bound as
// trainable accumulate their gradient into Parameter::grad, parameters bound
// as frozen become constants, which is how the G-step / D-step partitions
// are enforced.
//
// Layout conventions used by the model:
//   - batch matrices are (batch x features), one row per utterance;
//   - time-major sequences are (T*B x features), row t*B + b;
//   - batch-major sequences are (B*T x features), row b*T + t.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "accentvae/common.hpp"

namespace accentvae {

template <typename Scalar>
struct Parameter {
  std::string name;
  MatrixX<Scalar> value;
  MatrixX<Scalar> grad;
};

namespace ad {

template <typename Scalar>
class Tape;

template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar> *tape, int id) : tape_(tape), id_(id) {}

  const MatrixX<Scalar> &value() const { return tape_->value(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape<Scalar> *tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<Scalar> *tape_ = nullptr;
  int id_ = -1;
};

template <typename Scalar>
class Tape {
 public:
  using Matrix = MatrixX<Scalar>;
  using BackwardFn = std::function<void(Tape &, int)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var<Scalar> Constant(Matrix value) { return Push(std::move(value), false, {}, nullptr); }

  /// Leaf whose gradient is kept on the tape (read it with Grad()).
  Var<Scalar> Variable(Matrix value) { return Push(std::move(value), true, {}, nullptr); }

  Var<Scalar> Bind(Parameter<Scalar> &p, bool trainable) {
    if (!trainable) return Constant(p.value);
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
    return Push(p.value, true, {}, &p);
  }

  Var<Scalar> Record(Matrix value, std::initializer_list<int> inputs, BackwardFn fn) {
    bool rg = false;
    for (int i : inputs) rg = rg || nodes_[i].requires_grad;
    return Push(std::move(value), rg, rg ? std::move(fn) : BackwardFn{}, nullptr);
  }

  Var<Scalar> Record(Matrix value, const std::vector<int> &inputs, BackwardFn fn) {
    bool rg = false;
    for (int i : inputs) rg = rg || nodes_[i].requires_grad;
    return Push(std::move(value), rg, rg ? std::move(fn) : BackwardFn{}, nullptr);
  }

  const Matrix &value(int id) const { return nodes_[id].value; }
  const Matrix &Grad(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  template <typename Derived>
  void Accumulate(int id, const Eigen::MatrixBase<Derived> &g) {
    Node &n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad.noalias() += g;
  }

  /// Seeds d(root) = seed and propagates to every node that requires grad.
  void Backward(Var<Scalar> root, const Matrix &seed) {
    if (!nodes_[root.id()].requires_grad) return;
    Accumulate(root.id(), seed);
    for (int i = root.id(); i >= 0; --i) {
      Node &n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param != nullptr) n.param->grad += n.grad;
    }
  }

  void Backward(Var<Scalar> root) { Backward(root, Matrix::Ones(1, 1)); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter<Scalar> *param = nullptr;
    bool requires_grad = false;
  };

  Var<Scalar> Push(Matrix value, bool rg, BackwardFn fn, Parameter<Scalar> *param) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = rg;
    n.backward = std::move(fn);
    n.param = param;
    nodes_.push_back(std::move(n));
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Elementwise and linear-algebra primitives.

template <typename S>
Var<S> MatMul(Var<S> a, Var<S> b) {
  Tape<S> &t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.Record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape<S> &t, int self) {
    const auto &g = t.Grad(self);
    if (t.requires_grad(ia)) t.Accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.Accumulate(ib, t.value(ia).transpose() * g);
  });
}

template <typename S>
Var<S> Add(Var<S> a, Var<S> b) {
  Tape<S> &t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.Record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape<S> &t, int self) {
    t.Accumulate(ia, t.Grad(self));
    t.Accumulate(ib, t.Grad(self));
  });
}

template <typename S>
Var<S> Sub(Var<S> a, Var<S> b) {
  Tape<S> &t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.Record(a.value() - b.value(), {ia, ib}, [ia, ib](Tape<S> &t, int self) {
    t.Accumulate(ia, t.Grad(self));
    if (t.requires_grad(ib)) t.Accumulate(ib, -t.Grad(self));
  });
}

/// Hadamard product.
template <typename S>
Var<S> Mul(Var<S> a, Var<S> b) {
  Tape<S> &t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.Record(a.value().cwiseProduct(b.value()), {ia, ib},
                  [ia, ib](Tape<S> &t, int self) {
                    const auto &g = t.Grad(self);
                    if (t.requires_grad(ia)) t.Accumulate(ia, g.cwiseProduct(t.value(ib)));
                    if (t.requires_grad(ib)) t.Accumulate(ib, g.cwiseProduct(t.value(ia)));
                  });
}

template <typename S>
Var<S> Div(Var<S> a, Var<S> b) {
  Tape<S> &t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.Record(a.value().cwiseQuotient(b.value()), {ia, ib},
                  [ia, ib](Tape<S> &t, int self) {
                    const auto &g = t.Grad(self);
                    const auto &bv = t.value(ib);
                    if (t.requires_grad(ia)) t.Accumulate(ia, g.cwiseQuotient(bv));
                    if (t.requires_grad(ib))
                      t.Accumulate(ib, -(g.cwiseProduct(t.value(self)).cwiseQuotient(bv)));
                  });
}

/// a (n x m) + bias (1 x m) broadcast over rows.
template <typename S>
Var<S> AddRow(Var<S> a, Var<S> bias) {
  Tape<S> &t = *a.tape();
  const int ia = a.id(), ib = bias.id();
  MatrixX<S> out = a.value().rowwise() + bias.value().row(0);
  return t.Record(std::move(out), {ia, ib}, [ia, ib](Tape<S> &t, int self) {
    t.Accumulate(ia, t.Grad(self));
    if (t.requires_grad(ib)) t.Accumulate(ib, t.Grad(self).colwise().sum());
  });
}

template <typename S>
Var<S> Scale(Var<S> a, S s) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  return t.Record(a.value() * s, {ia}, [ia, s](Tape<S> &t, int self) {
    t.Accumulate(ia, t.Grad(self) * s);
  });
}

template <typename S>
Var<S> AddScalar(Var<S> a, S s) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = a.value().array() + s;
  return t.Record(std::move(out), {ia},
                  [ia](Tape<S> &t, int self) { t.Accumulate(ia, t.Grad(self)); });
}

template <typename S>
Var<S> Sigmoid(Var<S> a) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = (S(1) + (-a.value().array()).exp()).inverse().matrix();
  return t.Record(std::move(out), {ia}, [ia](Tape<S> &t, int self) {
    const auto &y = t.value(self).array();
    t.Accumulate(ia, (t.Grad(self).array() * y * (S(1) - y)).matrix());
  });
}

template <typename S>
Var<S> Tanh(Var<S> a) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = a.value().array().tanh().matrix();
  return t.Record(std::move(out), {ia}, [ia](Tape<S> &t, int self) {
    const auto &y = t.value(self).array();
    t.Accumulate(ia, (t.Grad(self).array() * (S(1) - y.square())).matrix());
  });
}

template <typename S>
Var<S> Relu(Var<S> a) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = a.value().cwiseMax(S(0));
  return t.Record(std::move(out), {ia}, [ia](Tape<S> &t, int self) {
    const auto &x = t.value(ia).array();
    t.Accumulate(ia, (x > S(0)).select(t.Grad(self).array(), S(0)).matrix());
  });
}

template <typename S>
Var<S> Exp(Var<S> a) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = a.value().array().exp().matrix();
  return t.Record(std::move(out), {ia}, [ia](Tape<S> &t, int self) {
    t.Accumulate(ia, t.Grad(self).cwiseProduct(t.value(self)));
  });
}

template <typename S>
Var<S> Log(Var<S> a) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = a.value().array().log().matrix();
  return t.Record(std::move(out), {ia}, [ia](Tape<S> &t, int self) {
    t.Accumulate(ia, t.Grad(self).cwiseQuotient(t.value(ia)));
  });
}

/// Elementwise sqrt; the derivative at exactly 0 is taken as 0.
template <typename S>
Var<S> Sqrt(Var<S> a) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = a.value().array().sqrt().matrix();
  return t.Record(std::move(out), {ia}, [ia](Tape<S> &t, int self) {
    const auto &y = t.value(self).array();
    t.Accumulate(ia, (y > S(0)).select(t.Grad(self).array() / (S(2) * y), S(0)).matrix());
  });
}

/// Clamp with a pass-through gradient strictly inside [lo, hi].
template <typename S>
Var<S> Clamp(Var<S> a, S lo, S hi) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = a.value().cwiseMax(lo).cwiseMin(hi);
  return t.Record(std::move(out), {ia}, [ia, lo, hi](Tape<S> &t, int self) {
    const auto &x = t.value(ia).array();
    t.Accumulate(ia, (x > lo && x < hi).select(t.Grad(self).array(), S(0)).matrix());
  });
}

// ---------------------------------------------------------------------------
// Structural ops.

template <typename S>
Var<S> ConcatCols(const std::vector<Var<S>> &parts) {
  Tape<S> &t = *parts.front().tape();
  Eigen::Index rows = parts.front().rows(), cols = 0;
  std::vector<int> ids;
  for (const auto &p : parts) {
    cols += p.cols();
    ids.push_back(p.id());
  }
  MatrixX<S> out(rows, cols);
  Eigen::Index off = 0;
  for (const auto &p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return t.Record(std::move(out), ids, [ids](Tape<S> &t, int self) {
    Eigen::Index off = 0;
    for (int id : ids) {
      const Eigen::Index c = t.value(id).cols();
      if (t.requires_grad(id)) t.Accumulate(id, t.Grad(self).middleCols(off, c));
      off += c;
    }
  });
}

template <typename S>
Var<S> SliceCols(Var<S> a, Eigen::Index start, Eigen::Index n) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = a.value().middleCols(start, n);
  return t.Record(std::move(out), {ia}, [ia, start, n](Tape<S> &t, int self) {
    MatrixX<S> g = MatrixX<S>::Zero(t.value(ia).rows(), t.value(ia).cols());
    g.middleCols(start, n) = t.Grad(self);
    t.Accumulate(ia, g);
  });
}

template <typename S>
Var<S> ConcatRows(const std::vector<Var<S>> &parts) {
  Tape<S> &t = *parts.front().tape();
  Eigen::Index rows = 0, cols = parts.front().cols();
  std::vector<int> ids;
  for (const auto &p : parts) {
    rows += p.rows();
    ids.push_back(p.id());
  }
  MatrixX<S> out(rows, cols);
  Eigen::Index off = 0;
  for (const auto &p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return t.Record(std::move(out), ids, [ids](Tape<S> &t, int self) {
    Eigen::Index off = 0;
    for (int id : ids) {
      const Eigen::Index r = t.value(id).rows();
      if (t.requires_grad(id)) t.Accumulate(id, t.Grad(self).middleRows(off, r));
      off += r;
    }
  });
}

template <typename S>
Var<S> SliceRows(Var<S> a, Eigen::Index start, Eigen::Index n) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = a.value().middleRows(start, n);
  return t.Record(std::move(out), {ia}, [ia, start, n](Tape<S> &t, int self) {
    MatrixX<S> g = MatrixX<S>::Zero(t.value(ia).rows(), t.value(ia).cols());
    g.middleRows(start, n) = t.Grad(self);
    t.Accumulate(ia, g);
  });
}

/// out.row(i) = a.row(index[i]); gradients scatter-add back.
template <typename S>
Var<S> GatherRows(Var<S> a, std::vector<int> index) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) out.row(i) = a.value().row(index[i]);
  return t.Record(std::move(out), {ia}, [ia, index = std::move(index)](Tape<S> &t, int self) {
    MatrixX<S> g = MatrixX<S>::Zero(t.value(ia).rows(), t.value(ia).cols());
    const auto &gs = t.Grad(self);
    for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += gs.row(i);
    t.Accumulate(ia, g);
  });
}

/// out.col(j) = a.col(index[j]).
template <typename S>
Var<S> GatherCols(Var<S> a, std::vector<int> index) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out(a.rows(), static_cast<Eigen::Index>(index.size()));
  for (std::size_t j = 0; j < index.size(); ++j) out.col(j) = a.value().col(index[j]);
  return t.Record(std::move(out), {ia}, [ia, index = std::move(index)](Tape<S> &t, int self) {
    MatrixX<S> g = MatrixX<S>::Zero(t.value(ia).rows(), t.value(ia).cols());
    const auto &gs = t.Grad(self);
    for (std::size_t j = 0; j < index.size(); ++j) g.col(index[j]) += gs.col(j);
    t.Accumulate(ia, g);
  });
}

/// out.row(g) = sum of a.row(i) over i in groups[g].
template <typename S>
Var<S> SegmentSum(Var<S> a, std::vector<std::vector<int>> groups) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = MatrixX<S>::Zero(static_cast<Eigen::Index>(groups.size()), a.cols());
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    for (int i : groups[gi]) out.row(gi) += a.value().row(i);
  return t.Record(std::move(out), {ia}, [ia, groups = std::move(groups)](Tape<S> &t, int self) {
    MatrixX<S> g = MatrixX<S>::Zero(t.value(ia).rows(), t.value(ia).cols());
    const auto &gs = t.Grad(self);
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
      for (int i : groups[gi]) g.row(i) += gs.row(gi);
    t.Accumulate(ia, g);
  });
}

template <typename S>
Var<S> SumAll(Var<S> a) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return t.Record(std::move(out), {ia}, [ia](Tape<S> &t, int self) {
    const S g = t.Grad(self)(0, 0);
    t.Accumulate(ia, MatrixX<S>::Constant(t.value(ia).rows(), t.value(ia).cols(), g));
  });
}

/// Row-wise sum: (n x m) -> (n x 1).
template <typename S>
Var<S> SumCols(Var<S> a) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  MatrixX<S> out = a.value().rowwise().sum();
  return t.Record(std::move(out), {ia}, [ia](Tape<S> &t, int self) {
    const Eigen::Index m = t.value(ia).cols();
    t.Accumulate(ia, t.Grad(self).replicate(1, m));
  });
}

/// Time-major (T*B x c) -> (B x c), summing over t.
template <typename S>
Var<S> TimeSum(Var<S> a, Eigen::Index batch) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  const Eigen::Index steps = a.rows() / batch;
  MatrixX<S> out = MatrixX<S>::Zero(batch, a.cols());
  for (Eigen::Index s = 0; s < steps; ++s) out += a.value().middleRows(s * batch, batch);
  return t.Record(std::move(out), {ia}, [ia, steps](Tape<S> &t, int self) {
    t.Accumulate(ia, t.Grad(self).replicate(steps, 1));
  });
}

/// Per-row selection: out.row(i) = mask(i) != 0 ? a.row(i) : b.row(i).
template <typename S>
Var<S> SelectRows(Var<S> a, Var<S> b, VectorX<S> mask) {
  Tape<S> &t = *a.tape();
  const int ia = a.id(), ib = b.id();
  MatrixX<S> out = b.value();
  for (Eigen::Index i = 0; i < mask.size(); ++i)
    if (mask(i) != S(0)) out.row(i) = a.value().row(i);
  return t.Record(std::move(out), {ia, ib}, [ia, ib, mask = std::move(mask)](Tape<S> &t, int self) {
    const auto &g = t.Grad(self);
    MatrixX<S> ga = MatrixX<S>::Zero(g.rows(), g.cols());
    MatrixX<S> gb = g;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      if (mask(i) != S(0)) {
        ga.row(i) = g.row(i);
        gb.row(i).setZero();
      }
    }
    if (t.requires_grad(ia)) t.Accumulate(ia, ga);
    if (t.requires_grad(ib)) t.Accumulate(ib, gb);
  });
}

/// Fused GRU cell (PyTorch gate order r, z, n).
/// x: (B x I), h: (B x H), w_ih: (I x 3H), w_hh: (H x 3H), biases (1 x 3H).
template <typename S>
Var<S> GruCell(Var<S> x, Var<S> h, Var<S> w_ih, Var<S> w_hh, Var<S> b_ih, Var<S> b_hh) {
  Tape<S> &t = *x.tape();
  const int ix = x.id(), ih = h.id(), iwi = w_ih.id(), iwh = w_hh.id(), ibi = b_ih.id(),
            ibh = b_hh.id();
  const Eigen::Index hd = h.cols();
  MatrixX<S> gi = x.value() * w_ih.value();
  gi.rowwise() += b_ih.value().row(0);
  MatrixX<S> gh = h.value() * w_hh.value();
  gh.rowwise() += b_hh.value().row(0);
  MatrixX<S> r = (S(1) + (-(gi.leftCols(hd) + gh.leftCols(hd)).array()).exp()).inverse().matrix();
  MatrixX<S> z =
      (S(1) + (-(gi.middleCols(hd, hd) + gh.middleCols(hd, hd)).array()).exp()).inverse().matrix();
  MatrixX<S> ghn = gh.rightCols(hd);
  MatrixX<S> n = (gi.rightCols(hd) + r.cwiseProduct(ghn)).array().tanh().matrix();
  MatrixX<S> out = n + z.cwiseProduct(h.value() - n);
  return t.Record(
      std::move(out), {ix, ih, iwi, iwh, ibi, ibh},
      [=, r = std::move(r), z = std::move(z), n = std::move(n), ghn = std::move(ghn)](
          Tape<S> &t, int self) {
        const auto &g = t.Grad(self);
        const auto &hv = t.value(ih);
        const Eigen::Index b = g.rows();
        MatrixX<S> dgi(b, 3 * hd), dgh(b, 3 * hd);
        MatrixX<S> dn_pre = (g.array() * (S(1) - z.array()) * (S(1) - n.array().square())).matrix();
        MatrixX<S> dz_pre =
            (g.array() * (hv - n).array() * z.array() * (S(1) - z.array())).matrix();
        MatrixX<S> dr_pre =
            (dn_pre.array() * ghn.array() * r.array() * (S(1) - r.array())).matrix();
        dgi << dr_pre, dz_pre, dn_pre;
        dgh << dr_pre, dz_pre, dn_pre.cwiseProduct(r);
        if (t.requires_grad(ix)) t.Accumulate(ix, dgi * t.value(iwi).transpose());
        if (t.requires_grad(iwi)) t.Accumulate(iwi, t.value(ix).transpose() * dgi);
        if (t.requires_grad(ibi)) t.Accumulate(ibi, dgi.colwise().sum());
        if (t.requires_grad(ih))
          t.Accumulate(ih, g.cwiseProduct(z) + dgh * t.value(iwh).transpose());
        if (t.requires_grad(iwh)) t.Accumulate(iwh, hv.transpose() * dgh);
        if (t.requires_grad(ibh)) t.Accumulate(ibh, dgh.colwise().sum());
      });
}

// ---------------------------------------------------------------------------
// Normalization and losses.

/// Row-wise softmax; entries with mask == 0 get probability exactly 0.
template <typename S>
Var<S> SoftmaxRows(Var<S> a, const MatrixX<S> *mask = nullptr) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  const auto &x = a.value();
  MatrixX<S> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    S mx = -std::numeric_limits<S>::infinity();
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (mask == nullptr || (*mask)(r, c) != S(0)) mx = std::max(mx, x(r, c));
    S z = 0;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const bool on = mask == nullptr || (*mask)(r, c) != S(0);
      out(r, c) = on ? std::exp(x(r, c) - mx) : S(0);
      z += out(r, c);
    }
    out.row(r) /= z;
  }
  return t.Record(std::move(out), {ia}, [ia](Tape<S> &t, int self) {
    const auto &y = t.value(self);
    const auto &g = t.Grad(self);
    VectorX<S> dot = g.cwiseProduct(y).rowwise().sum();
    MatrixX<S> gx = y.cwiseProduct(g - dot.replicate(1, y.cols()));
    t.Accumulate(ia, gx);
  });
}

/// Mean over rows of -log softmax(logits)[label].
template <typename S>
Var<S> CrossEntropy(Var<S> logits, std::vector<int> labels) {
  Tape<S> &t = *logits.tape();
  const int ia = logits.id();
  const auto &x = logits.value();
  MatrixX<S> probs(x.rows(), x.cols());
  S loss = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S mx = x.row(r).maxCoeff();
    const S lse = mx + std::log((x.row(r).array() - mx).exp().sum());
    probs.row(r) = (x.row(r).array() - lse).exp().matrix();
    loss -= x(r, labels[r]) - lse;
  }
  const S n = static_cast<S>(x.rows());
  MatrixX<S> out(1, 1);
  out(0, 0) = loss / n;
  return t.Record(std::move(out), {ia},
                  [ia, probs = std::move(probs), labels = std::move(labels), n](Tape<S> &t,
                                                                                 int self) {
                    MatrixX<S> g = probs;
                    for (std::size_t r = 0; r < labels.size(); ++r) g(r, labels[r]) -= S(1);
                    t.Accumulate(ia, g * (t.Grad(self)(0, 0) / n));
                  });
}

/// sum(mask * BCEWithLogits(x, y)) / sum(mask), evaluated stably.
template <typename S>
Var<S> BinaryCrossEntropyWithLogits(Var<S> logits, MatrixX<S> target, MatrixX<S> mask) {
  Tape<S> &t = *logits.tape();
  const int ia = logits.id();
  const auto &x = logits.value().array();
  const S count = std::max(mask.sum(), S(1));
  auto softplus = (x.cwiseMax(S(0)) + (-x.abs()).exp().log1p());
  MatrixX<S> out(1, 1);
  out(0, 0) = ((softplus - target.array() * x) * mask.array()).sum() / count;
  return t.Record(std::move(out), {ia},
                  [ia, target = std::move(target), mask = std::move(mask), count](Tape<S> &t,
                                                                                  int self) {
                    const auto &x = t.value(ia).array();
                    auto sig = (S(1) + (-x).exp()).inverse();
                    t.Accumulate(ia, ((sig - target.array()) * mask.array() *
                                      (t.Grad(self)(0, 0) / count))
                                         .matrix());
                  });
}

/// Mean over rows of KL(N(mu, exp(lv)) || N(0, I)).
template <typename S>
Var<S> KlStandardNormal(Var<S> mu, Var<S> log_var) {
  Tape<S> &t = *mu.tape();
  const int im = mu.id(), il = log_var.id();
  const S n = static_cast<S>(mu.rows());
  const auto &m = mu.value().array();
  const auto &lv = log_var.value().array();
  MatrixX<S> out(1, 1);
  out(0, 0) = S(0.5) * (m.square() + lv.exp() - S(1) - lv).sum() / n;
  return t.Record(std::move(out), {im, il}, [im, il, n](Tape<S> &t, int self) {
    const S g = t.Grad(self)(0, 0) / n;
    if (t.requires_grad(im)) t.Accumulate(im, t.value(im) * g);
    if (t.requires_grad(il))
      t.Accumulate(il, ((t.value(il).array().exp() - S(1)) * (S(0.5) * g)).matrix());
  });
}

// ---------------------------------------------------------------------------
// Convolutions and attention helpers.

/// 1-D "same" convolution over time of a time-major sequence.
/// x: (T*B x Cin), w: (K*Cin x Cout) with tap k in rows [k*Cin, (k+1)*Cin).
template <typename S>
Var<S> ConvTime(Var<S> x, Var<S> w, Eigen::Index batch) {
  Tape<S> &t = *x.tape();
  const int ix = x.id(), iw = w.id();
  const Eigen::Index cin = x.cols(), steps = x.rows() / batch;
  const Eigen::Index taps = w.rows() / cin, pad = taps / 2;
  MatrixX<S> out = MatrixX<S>::Zero(x.rows(), w.cols());
  for (Eigen::Index k = 0; k < taps; ++k) {
    const Eigen::Index shift = k - pad;  // out[s] += x[s + shift] * W_k
    const Eigen::Index s0 = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index s1 = std::min(steps, steps - shift);
    if (s1 <= s0) continue;
    out.middleRows(s0 * batch, (s1 - s0) * batch).noalias() +=
        x.value().middleRows((s0 + shift) * batch, (s1 - s0) * batch) *
        w.value().middleRows(k * cin, cin);
  }
  return t.Record(std::move(out), {ix, iw},
                  [ix, iw, batch, cin, steps, taps, pad](Tape<S> &t, int self) {
                    const auto &g = t.Grad(self);
                    const auto &xv = t.value(ix);
                    const auto &wv = t.value(iw);
                    MatrixX<S> gx, gw;
                    if (t.requires_grad(ix)) gx = MatrixX<S>::Zero(xv.rows(), xv.cols());
                    if (t.requires_grad(iw)) gw = MatrixX<S>::Zero(wv.rows(), wv.cols());
                    for (Eigen::Index k = 0; k < taps; ++k) {
                      const Eigen::Index shift = k - pad;
                      const Eigen::Index s0 = std::max<Eigen::Index>(0, -shift);
                      const Eigen::Index s1 = std::min(steps, steps - shift);
                      if (s1 <= s0) continue;
                      const auto gs = g.middleRows(s0 * batch, (s1 - s0) * batch);
                      const auto xs = xv.middleRows((s0 + shift) * batch, (s1 - s0) * batch);
                      if (gx.size())
                        gx.middleRows((s0 + shift) * batch, (s1 - s0) * batch).noalias() +=
                            gs * wv.middleRows(k * cin, cin).transpose();
                      if (gw.size()) gw.middleRows(k * cin, cin).noalias() += xs.transpose() * gs;
                    }
                    if (gx.size()) t.Accumulate(ix, gx);
                    if (gw.size()) t.Accumulate(iw, gw);
                  });
}

struct Conv2dShape {
  Eigen::Index channels, height, width;
  Eigen::Index out_height() const { return (height + 1) / 2; }
  Eigen::Index out_width() const { return (width + 1) / 2; }
};

/// 3x3 convolution, stride 2, zero padding 1, on per-row flattened CHW maps.
/// x: (B x Cin*H*W), w: (Cin*9 x Cout), bias: (1 x Cout) -> (B x Cout*H'*W').
template <typename S>
Var<S> Conv2dStride2(Var<S> x, Var<S> w, Var<S> bias, Conv2dShape in) {
  Tape<S> &t = *x.tape();
  const int ix = x.id(), iw = w.id(), ib = bias.id();
  const Eigen::Index cout = w.cols(), oh = in.out_height(), ow = in.out_width();
  const Eigen::Index batch = x.rows();
  // Column matrix for one batch row: (oh*ow x Cin*9).
  auto im2col = [in, oh, ow](const auto &row, MatrixX<S> &cols) {
    cols.setZero(oh * ow, in.channels * 9);
    for (Eigen::Index c = 0; c < in.channels; ++c)
      for (Eigen::Index oy = 0; oy < oh; ++oy)
        for (Eigen::Index ox = 0; ox < ow; ++ox)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const Eigen::Index iy = 2 * oy + ky - 1, ixx = 2 * ox + kx - 1;
              if (iy < 0 || iy >= in.height || ixx < 0 || ixx >= in.width) continue;
              cols(oy * ow + ox, c * 9 + ky * 3 + kx) =
                  row(c * in.height * in.width + iy * in.width + ixx);
            }
  };
  MatrixX<S> out(batch, cout * oh * ow);
  MatrixX<S> cols, res;
  for (Eigen::Index b = 0; b < batch; ++b) {
    im2col(x.value().row(b), cols);
    res.noalias() = cols * w.value();
    res.rowwise() += bias.value().row(0);
    // res is (oh*ow x cout); flatten as channel-major.
    for (Eigen::Index c = 0; c < cout; ++c)
      out.row(b).segment(c * oh * ow, oh * ow) = res.col(c).transpose();
  }
  return t.Record(
      std::move(out), {ix, iw, ib},
      [ix, iw, ib, in, oh, ow, cout, batch, im2col](Tape<S> &t, int self) {
        const auto &g = t.Grad(self);
        const auto &xv = t.value(ix);
        const auto &wv = t.value(iw);
        MatrixX<S> gx, gw, gb;
        if (t.requires_grad(ix)) gx = MatrixX<S>::Zero(xv.rows(), xv.cols());
        if (t.requires_grad(iw)) gw = MatrixX<S>::Zero(wv.rows(), wv.cols());
        if (t.requires_grad(ib)) gb = MatrixX<S>::Zero(1, cout);
        MatrixX<S> cols, gres(oh * ow, cout), gcols;
        for (Eigen::Index b = 0; b < batch; ++b) {
          for (Eigen::Index c = 0; c < cout; ++c)
            gres.col(c) = g.row(b).segment(c * oh * ow, oh * ow).transpose();
          if (gb.size()) gb += gres.colwise().sum();
          if (gw.size()) {
            im2col(xv.row(b), cols);
            gw.noalias() += cols.transpose() * gres;
          }
          if (gx.size()) {
            gcols.noalias() = gres * wv.transpose();
            for (Eigen::Index c = 0; c < in.channels; ++c)
              for (Eigen::Index oy = 0; oy < oh; ++oy)
                for (Eigen::Index ox = 0; ox < ow; ++ox)
                  for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                      const Eigen::Index iy = 2 * oy + ky - 1, ixx = 2 * ox + kx - 1;
                      if (iy < 0 || iy >= in.height || ixx < 0 || ixx >= in.width) continue;
                      gx(b, c * in.height * in.width + iy * in.width + ixx) +=
                          gcols(oy * ow + ox, c * 9 + ky * 3 + kx);
                    }
          }
        }
        if (gx.size()) t.Accumulate(ix, gx);
        if (gw.size()) t.Accumulate(iw, gw);
        if (gb.size()) t.Accumulate(ib, gb);
      });
}

/// Location features for attention: out(b*T + j, :) = sum_k x(b, j+k-pad) * w(k, :).
/// x: (B x T), w: (K x A) -> (B*T x A).
template <typename S>
Var<S> LocationConv(Var<S> x, Var<S> w) {
  Tape<S> &t = *x.tape();
  const int ix = x.id(), iw = w.id();
  const Eigen::Index batch = x.rows(), steps = x.cols(), taps = w.rows(), pad = taps / 2;
  // Toeplitz-style window matrix (B*T x K), then one product.
  MatrixX<S> win = MatrixX<S>::Zero(batch * steps, taps);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index j = 0; j < steps; ++j)
      for (Eigen::Index k = 0; k < taps; ++k) {
        const Eigen::Index src = j + k - pad;
        if (src >= 0 && src < steps) win(b * steps + j, k) = x.value()(b, src);
      }
  MatrixX<S> out = win * w.value();
  return t.Record(std::move(out), {ix, iw},
                  [ix, iw, batch, steps, taps, pad, win = std::move(win)](Tape<S> &t, int self) {
                    const auto &g = t.Grad(self);
                    if (t.requires_grad(iw)) t.Accumulate(iw, win.transpose() * g);
                    if (t.requires_grad(ix)) {
                      MatrixX<S> gwin = g * t.value(iw).transpose();
                      MatrixX<S> gx = MatrixX<S>::Zero(batch, steps);
                      for (Eigen::Index b = 0; b < batch; ++b)
                        for (Eigen::Index j = 0; j < steps; ++j)
                          for (Eigen::Index k = 0; k < taps; ++k) {
                            const Eigen::Index src = j + k - pad;
                            if (src >= 0 && src < steps) gx(b, src) += gwin(b * steps + j, k);
                          }
                      t.Accumulate(ix, gx);
                    }
                  });
}

/// (B x A) -> (B*T x A) with row b*T + j equal to row b.
template <typename S>
Var<S> RepeatRows(Var<S> a, Eigen::Index times) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  const Eigen::Index batch = a.rows();
  MatrixX<S> out(batch * times, a.cols());
  for (Eigen::Index b = 0; b < batch; ++b)
    out.middleRows(b * times, times) = a.value().row(b).replicate(times, 1);
  return t.Record(std::move(out), {ia}, [ia, batch, times](Tape<S> &t, int self) {
    const auto &g = t.Grad(self);
    MatrixX<S> ga(batch, g.cols());
    for (Eigen::Index b = 0; b < batch; ++b)
      ga.row(b) = g.middleRows(b * times, times).colwise().sum();
    t.Accumulate(ia, ga);
  });
}

/// (B*T x 1) -> (B x T).
template <typename S>
Var<S> FoldColumn(Var<S> a, Eigen::Index batch) {
  Tape<S> &t = *a.tape();
  const int ia = a.id();
  const Eigen::Index steps = a.rows() / batch;
  MatrixX<S> out(batch, steps);
  for (Eigen::Index b = 0; b < batch; ++b)
    out.row(b) = a.value().col(0).segment(b * steps, steps).transpose();
  return t.Record(std::move(out), {ia}, [ia, batch, steps](Tape<S> &t, int self) {
    const auto &g = t.Grad(self);
    MatrixX<S> ga(batch * steps, 1);
    for (Eigen::Index b = 0; b < batch; ++b)
      ga.col(0).segment(b * steps, steps) = g.row(b).transpose();
    t.Accumulate(ia, ga);
  });
}

/// Context vectors: out.row(b) = sum_j weights(b, j) * memory.row(b*T + j).
template <typename S>
Var<S> Attend(Var<S> weights, Var<S> memory) {
  Tape<S> &t = *weights.tape();
  const int iw = weights.id(), im = memory.id();
  const Eigen::Index batch = weights.rows(), steps = weights.cols();
  MatrixX<S> out(batch, memory.cols());
  for (Eigen::Index b = 0; b < batch; ++b)
    out.row(b).noalias() =
        weights.value().row(b) * memory.value().middleRows(b * steps, steps);
  return t.Record(std::move(out), {iw, im}, [iw, im, batch, steps](Tape<S> &t, int self) {
    const auto &g = t.Grad(self);
    const auto &mv = t.value(im);
    const auto &wv = t.value(iw);
    if (t.requires_grad(iw)) {
      MatrixX<S> gw(batch, steps);
      for (Eigen::Index b = 0; b < batch; ++b)
        gw.row(b).noalias() = g.row(b) * mv.middleRows(b * steps, steps).transpose();
      t.Accumulate(iw, gw);
    }
    if (t.requires_grad(im)) {
      MatrixX<S> gm(mv.rows(), mv.cols());
      for (Eigen::Index b = 0; b < batch; ++b)
        gm.middleRows(b * steps, steps).noalias() = wv.row(b).transpose() * g.row(b);
      t.Accumulate(im, gm);
    }
  });
}

}  // namespace ad
}  // namespace accentvae
