// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "semc/autograd/var.hpp"
#include "semc/core/error.hpp"
#include "semc/core/tensor.hpp"

namespace semc {

namespace detail {

template <typename Scalar>
void check_same_shape(const Var<Scalar>& a, const Var<Scalar>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

}  // namespace detail

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "add");
  Tensor<S> out(a.shape(), a.value().array() + b.value().array());
  if (!detail::track_grad<S>({&a, &b})) return Var<S>::constant(std::move(out));
  auto pa = a.node(), pb = b.node();
  return detail::make_node<S>(std::move(out), {pa, pb}, [pa, pb](const Tensor<S>& g) {
    if (pa->requires_grad) pa->accumulate(g);
    if (pb->requires_grad) pb->accumulate(g);
  });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor<S> out(a.shape(), a.value().array() - b.value().array());
  if (!detail::track_grad<S>({&a, &b})) return Var<S>::constant(std::move(out));
  auto pa = a.node(), pb = b.node();
  return detail::make_node<S>(std::move(out), {pa, pb}, [pa, pb](const Tensor<S>& g) {
    if (pa->requires_grad) pa->accumulate(g);
    if (pb->requires_grad) {
      Tensor<S> gb(g.shape(), -g.array());
      pb->accumulate(gb);
    }
  });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor<S> out(a.shape(), a.value().array() * b.value().array());
  if (!detail::track_grad<S>({&a, &b})) return Var<S>::constant(std::move(out));
  auto pa = a.node(), pb = b.node();
  return detail::make_node<S>(std::move(out), {pa, pb}, [pa, pb](const Tensor<S>& g) {
    if (pa->requires_grad) {
      Tensor<S> ga(g.shape(), g.array() * pb->value.array());
      pa->accumulate(ga);
    }
    if (pb->requires_grad) {
      Tensor<S> gb(g.shape(), g.array() * pa->value.array());
      pb->accumulate(gb);
    }
  });
}

template <typename S>
Var<S> scale(const Var<S>& a, S s) {
  Tensor<S> out(a.shape(), a.value().array() * s);
  if (!detail::track_grad<S>({&a})) return Var<S>::constant(std::move(out));
  auto pa = a.node();
  return detail::make_node<S>(std::move(out), {pa}, [pa, s](const Tensor<S>& g) {
    Tensor<S> ga(g.shape(), g.array() * s);
    pa->accumulate(ga);
  });
}

template <typename S>
Var<S> neg(const Var<S>& a) {
  return scale(a, S(-1));
}

template <typename S>
Var<S> add_scalar(const Var<S>& a, S s) {
  Tensor<S> out(a.shape(), a.value().array() + s);
  if (!detail::track_grad<S>({&a})) return Var<S>::constant(std::move(out));
  auto pa = a.node();
  return detail::make_node<S>(std::move(out), {pa},
                              [pa](const Tensor<S>& g) { pa->accumulate(g); });
}

/// a + t where t carries no gradient (noise injections, masks).
template <typename S>
Var<S> add_const(const Var<S>& a, const Tensor<S>& t) {
  if (a.shape() != t.shape()) throw ShapeError("add_const: shape mismatch");
  Tensor<S> out(a.shape(), a.value().array() + t.array());
  if (!detail::track_grad<S>({&a})) return Var<S>::constant(std::move(out));
  auto pa = a.node();
  return detail::make_node<S>(std::move(out), {pa},
                              [pa](const Tensor<S>& g) { pa->accumulate(g); });
}

/// a * t elementwise where t carries no gradient.
template <typename S>
Var<S> mul_const(const Var<S>& a, const Tensor<S>& t) {
  if (a.shape() != t.shape()) throw ShapeError("mul_const: shape mismatch");
  Tensor<S> out(a.shape(), a.value().array() * t.array());
  if (!detail::track_grad<S>({&a})) return Var<S>::constant(std::move(out));
  auto pa = a.node();
  Tensor<S> tc = t;
  return detail::make_node<S>(std::move(out), {pa}, [pa, tc](const Tensor<S>& g) {
    Tensor<S> ga(g.shape(), g.array() * tc.array());
    pa->accumulate(ga);
  });
}

template <typename S>
Var<S> relu(const Var<S>& a) {
  Tensor<S> out(a.shape(), a.value().array().max(S(0)));
  if (!detail::track_grad<S>({&a})) return Var<S>::constant(std::move(out));
  auto pa = a.node();
  return detail::make_node<S>(std::move(out), {pa}, [pa](const Tensor<S>& g) {
    Tensor<S> ga(g.shape(),
                 g.array() * (pa->value.array() > S(0)).template cast<S>());
    pa->accumulate(ga);
  });
}

template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  Tensor<S> out(a.shape());
  for (Index i = 0; i < a.numel(); ++i) {
    const S x = a.value()[i];
    out[i] = x >= S(0) ? S(1) / (S(1) + std::exp(-x))
                       : std::exp(x) / (S(1) + std::exp(x));
  }
  if (!detail::track_grad<S>({&a})) return Var<S>::constant(std::move(out));
  auto pa = a.node();
  auto out_node = detail::make_node<S>(std::move(out), {pa}, nullptr);
  // weak: a strong self-reference inside backward_op would cycle and leak
  std::weak_ptr<Node<S>> wself = out_node.node();
  out_node.node()->backward_op = [pa, wself](const Tensor<S>& g) {
    auto self = wself.lock();
    if (!self) return;
    const auto& y = self->value.array();
    Tensor<S> ga(self->value.shape(), g.array() * y * (S(1) - y));
    pa->accumulate(ga);
  };
  return out_node;
}

/// Numerically stable log(1 + exp(x)).
template <typename S>
Var<S> softplus(const Var<S>& a) {
  Tensor<S> out(a.shape());
  for (Index i = 0; i < a.numel(); ++i) {
    const S x = a.value()[i];
    out[i] = std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
  }
  if (!detail::track_grad<S>({&a})) return Var<S>::constant(std::move(out));
  auto pa = a.node();
  return detail::make_node<S>(std::move(out), {pa}, [pa](const Tensor<S>& g) {
    Tensor<S> ga(g.shape());
    for (Index i = 0; i < g.numel(); ++i) {
      const S x = pa->value[i];
      const S sig = x >= S(0) ? S(1) / (S(1) + std::exp(-x))
                              : std::exp(x) / (S(1) + std::exp(x));
      ga[i] = g[i] * sig;
    }
    pa->accumulate(ga);
  });
}

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " * " +
                     shape_str(b.shape()));
  }
  Tensor<S> out({a.dim(0), b.dim(1)});
  out.mat().noalias() = a.value().mat() * b.value().mat();
  if (!detail::track_grad<S>({&a, &b})) return Var<S>::constant(std::move(out));
  auto pa = a.node(), pb = b.node();
  return detail::make_node<S>(std::move(out), {pa, pb}, [pa, pb](const Tensor<S>& g) {
    if (pa->requires_grad) {
      Tensor<S> ga(pa->value.shape());
      ga.mat().noalias() = g.mat() * pb->value.mat().transpose();
      pa->accumulate(ga);
    }
    if (pb->requires_grad) {
      Tensor<S> gb(pb->value.shape());
      gb.mat().noalias() = pa->value.mat().transpose() * g.mat();
      pb->accumulate(gb);
    }
  });
}

/// a * b^T for row-major operands of shape [m,k] and [n,k].
template <typename S>
Var<S> matmul_nt(const Var<S>& a, const Var<S>& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt: incompatible shapes");
  }
  Tensor<S> out({a.dim(0), b.dim(0)});
  out.mat().noalias() = a.value().mat() * b.value().mat().transpose();
  if (!detail::track_grad<S>({&a, &b})) return Var<S>::constant(std::move(out));
  auto pa = a.node(), pb = b.node();
  return detail::make_node<S>(std::move(out), {pa, pb}, [pa, pb](const Tensor<S>& g) {
    if (pa->requires_grad) {
      Tensor<S> ga(pa->value.shape());
      ga.mat().noalias() = g.mat() * pb->value.mat();
      pa->accumulate(ga);
    }
    if (pb->requires_grad) {
      Tensor<S> gb(pb->value.shape());
      gb.mat().noalias() = g.mat().transpose() * pa->value.mat();
      pb->accumulate(gb);
    }
  });
}

/// y = x * W^T + b for x [B,I], W [O,I], optional b [O].
template <typename S>
Var<S> linear(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
  if (x.shape().size() != 2 || w.shape().size() != 2 || x.dim(1) != w.dim(1)) {
    throw ShapeError("linear: incompatible shapes " + shape_str(x.shape()) + " with W " +
                     shape_str(w.shape()));
  }
  const Index batch = x.dim(0), out_dim = w.dim(0);
  Tensor<S> out({batch, out_dim});
  out.mat().noalias() = x.value().mat() * w.value().mat().transpose();
  if (b.defined()) {
    if (b.numel() != out_dim) throw ShapeError("linear: bias size mismatch");
    out.mat().rowwise() += b.value().mat_view(1, out_dim).row(0);
  }
  const bool track = b.defined() ? detail::track_grad<S>({&x, &w, &b})
                                 : detail::track_grad<S>({&x, &w});
  if (!track) return Var<S>::constant(std::move(out));
  auto px = x.node(), pw = w.node();
  NodePtr<S> pb = b.defined() ? b.node() : nullptr;
  std::vector<NodePtr<S>> parents = {px, pw};
  if (pb) parents.push_back(pb);
  return detail::make_node<S>(std::move(out), std::move(parents),
                              [px, pw, pb](const Tensor<S>& g) {
    if (px->requires_grad) {
      Tensor<S> gx(px->value.shape());
      gx.mat().noalias() = g.mat() * pw->value.mat();
      px->accumulate(gx);
    }
    if (pw->requires_grad) {
      Tensor<S> gw(pw->value.shape());
      gw.mat().noalias() = g.mat().transpose() * px->value.mat();
      pw->accumulate(gw);
    }
    if (pb && pb->requires_grad) {
      Tensor<S> gb(pb->value.shape());
      gb.mat_view(1, gb.numel()) = g.mat().colwise().sum();
      pb->accumulate(gb);
    }
  });
}

template <typename S>
Var<S> softmax_rows(const Var<S>& x) {
  if (x.shape().size() != 2) throw ShapeError("softmax_rows: rank-2 input required");
  const Index rows = x.dim(0), cols = x.dim(1);
  Tensor<S> out(x.shape());
  for (Index i = 0; i < rows; ++i) {
    const S* xi = x.value().data() + i * cols;
    S m = xi[0];
    for (Index j = 1; j < cols; ++j) m = std::max(m, xi[j]);
    S denom = S(0);
    S* yi = out.data() + i * cols;
    for (Index j = 0; j < cols; ++j) {
      yi[j] = std::exp(xi[j] - m);
      denom += yi[j];
    }
    for (Index j = 0; j < cols; ++j) yi[j] /= denom;
  }
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  auto out_var = detail::make_node<S>(std::move(out), {px}, nullptr);
  // weak: a strong self-reference inside backward_op would cycle and leak
  std::weak_ptr<Node<S>> wself = out_var.node();
  out_var.node()->backward_op = [px, wself](const Tensor<S>& g) {
    auto self = wself.lock();
    if (!self) return;
    const Index r = self->value.dim(0), c = self->value.dim(1);
    Tensor<S> gx(self->value.shape());
    for (Index i = 0; i < r; ++i) {
      const S* y = self->value.data() + i * c;
      const S* gi = g.data() + i * c;
      S dot = S(0);
      for (Index j = 0; j < c; ++j) dot += gi[j] * y[j];
      S* go = gx.data() + i * c;
      for (Index j = 0; j < c; ++j) go[j] = y[j] * (gi[j] - dot);
    }
    px->accumulate(gx);
  };
  return out_var;
}

/// Mean negative log-likelihood of integer labels under softmax(logits).
template <typename S>
Var<S> cross_entropy(const Var<S>& logits, const std::vector<std::int64_t>& labels) {
  if (logits.shape().size() != 2) throw ShapeError("cross_entropy: rank-2 logits required");
  const Index batch = logits.dim(0), classes = logits.dim(1);
  if (Index(labels.size()) != batch) {
    throw ShapeError("cross_entropy: label count mismatch");
  }
  for (std::int64_t y : labels) {
    if (y < 0 || y >= classes) {
      throw DataError("cross_entropy: label " + std::to_string(y) +
                      " out of range [0," + std::to_string(classes) + ")");
    }
  }
  Tensor<S> lse({batch});
  S loss = S(0);
  for (Index i = 0; i < batch; ++i) {
    const S* xi = logits.value().data() + i * classes;
    S m = xi[0];
    for (Index j = 1; j < classes; ++j) m = std::max(m, xi[j]);
    S denom = S(0);
    for (Index j = 0; j < classes; ++j) denom += std::exp(xi[j] - m);
    lse[i] = m + std::log(denom);
    loss += lse[i] - xi[labels[std::size_t(i)]];
  }
  Tensor<S> out = Tensor<S>::scalar(loss / S(batch));
  if (!detail::track_grad<S>({&logits})) return Var<S>::constant(std::move(out));
  auto px = logits.node();
  auto labels_copy = labels;
  return detail::make_node<S>(std::move(out), {px},
                              [px, lse, labels_copy](const Tensor<S>& g) {
    const Index b = px->value.dim(0), c = px->value.dim(1);
    const S gscale = g[0] / S(b);
    Tensor<S> gx(px->value.shape());
    for (Index i = 0; i < b; ++i) {
      const S* xi = px->value.data() + i * c;
      S* go = gx.data() + i * c;
      for (Index j = 0; j < c; ++j) go[j] = std::exp(xi[j] - lse[i]) * gscale;
      go[labels_copy[std::size_t(i)]] -= gscale;
    }
    px->accumulate(gx);
  });
}

template <typename S>
Var<S> sum_all(const Var<S>& x) {
  Tensor<S> out = Tensor<S>::scalar(x.value().array().sum());
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  return detail::make_node<S>(std::move(out), {px}, [px](const Tensor<S>& g) {
    Tensor<S> gx = Tensor<S>::full(px->value.shape(), g[0]);
    px->accumulate(gx);
  });
}

template <typename S>
Var<S> mean_all(const Var<S>& x) {
  return scale(sum_all(x), S(1) / S(x.numel()));
}

/// First n rows of a rank-2 tensor.
template <typename S>
Var<S> rows_head(const Var<S>& x, Index n) {
  if (x.shape().size() != 2 || n > x.dim(0)) throw ShapeError("rows_head: bad slice");
  const Index cols = x.dim(1);
  Tensor<S> out({n, cols});
  std::copy(x.value().data(), x.value().data() + n * cols, out.data());
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  return detail::make_node<S>(std::move(out), {px}, [px, n, cols](const Tensor<S>& g) {
    Tensor<S> gx(px->value.shape());
    std::copy(g.data(), g.data() + n * cols, gx.data());
    px->accumulate(gx);
  });
}

/// Stack rank-2 tensors with equal column counts along the row dimension.
template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty input");
  const Index cols = parts[0].dim(1);
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.shape().size() != 2 || p.dim(1) != cols) {
      throw ShapeError("concat_rows: column mismatch");
    }
    rows += p.dim(0);
  }
  Tensor<S> out({rows, cols});
  Index offset = 0;
  bool track = false;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.numel(), out.data() + offset);
    offset += p.numel();
    track = track || p.requires_grad();
  }
  if (!grad_mode() || !track) return Var<S>::constant(std::move(out));
  std::vector<NodePtr<S>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) parents.push_back(p.node());
  auto parents_copy = parents;
  return detail::make_node<S>(std::move(out), std::move(parents),
                              [parents_copy](const Tensor<S>& g) {
    Index offset = 0;
    for (const auto& p : parents_copy) {
      const Index n = p->value.numel();
      if (p->requires_grad) {
        Tensor<S> gp(p->value.shape());
        std::copy(g.data() + offset, g.data() + offset + n, gp.data());
        p->accumulate(gp);
      }
      offset += n;
    }
  });
}

/// Column j of a rank-2 tensor, as an [R,1] tensor.
template <typename S>
Var<S> col(const Var<S>& x, Index j) {
  if (x.shape().size() != 2 || j >= x.dim(1)) throw ShapeError("col: bad index");
  const Index rows = x.dim(0), cols = x.dim(1);
  Tensor<S> out({rows, 1});
  for (Index i = 0; i < rows; ++i) out[i] = x.value()[i * cols + j];
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  return detail::make_node<S>(std::move(out), {px}, [px, j](const Tensor<S>& g) {
    const Index rows = px->value.dim(0), cols = px->value.dim(1);
    Tensor<S> gx(px->value.shape());
    for (Index i = 0; i < rows; ++i) gx[i * cols + j] = g[i];
    px->accumulate(gx);
  });
}

/// y[i,j] = x[i,j] * c[i] for x [R,C] and c [R,1].
template <typename S>
Var<S> rowwise_scale(const Var<S>& x, const Var<S>& c) {
  if (x.shape().size() != 2 || c.shape().size() != 2 || c.dim(1) != 1 ||
      c.dim(0) != x.dim(0)) {
    throw ShapeError("rowwise_scale: incompatible shapes");
  }
  const Index rows = x.dim(0), cols = x.dim(1);
  Tensor<S> out(x.shape());
  for (Index i = 0; i < rows; ++i) {
    const S s = c.value()[i];
    const S* xi = x.value().data() + i * cols;
    S* yi = out.data() + i * cols;
    for (Index j = 0; j < cols; ++j) yi[j] = xi[j] * s;
  }
  if (!detail::track_grad<S>({&x, &c})) return Var<S>::constant(std::move(out));
  auto px = x.node(), pc = c.node();
  return detail::make_node<S>(std::move(out), {px, pc}, [px, pc](const Tensor<S>& g) {
    const Index rows = px->value.dim(0), cols = px->value.dim(1);
    if (px->requires_grad) {
      Tensor<S> gx(px->value.shape());
      for (Index i = 0; i < rows; ++i) {
        const S s = pc->value[i];
        const S* gi = g.data() + i * cols;
        S* go = gx.data() + i * cols;
        for (Index j = 0; j < cols; ++j) go[j] = gi[j] * s;
      }
      px->accumulate(gx);
    }
    if (pc->requires_grad) {
      Tensor<S> gc(pc->value.shape());
      for (Index i = 0; i < rows; ++i) {
        const S* gi = g.data() + i * cols;
        const S* xi = px->value.data() + i * cols;
        S dot = S(0);
        for (Index j = 0; j < cols; ++j) dot += gi[j] * xi[j];
        gc[i] = dot;
      }
      pc->accumulate(gc);
    }
  });
}

/// Broadcast an [R,1] column vector to [R,cols].
template <typename S>
Var<S> colwise_expand(const Var<S>& v, Index cols) {
  if (v.shape().size() != 2 || v.dim(1) != 1) {
    throw ShapeError("colwise_expand: [R,1] input required");
  }
  const Index rows = v.dim(0);
  Tensor<S> out({rows, cols});
  for (Index i = 0; i < rows; ++i) {
    S* yi = out.data() + i * cols;
    for (Index j = 0; j < cols; ++j) yi[j] = v.value()[i];
  }
  if (!detail::track_grad<S>({&v})) return Var<S>::constant(std::move(out));
  auto pv = v.node();
  return detail::make_node<S>(std::move(out), {pv}, [pv, cols](const Tensor<S>& g) {
    const Index rows = pv->value.dim(0);
    Tensor<S> gv(pv->value.shape());
    for (Index i = 0; i < rows; ++i) {
      S s = S(0);
      const S* gi = g.data() + i * cols;
      for (Index j = 0; j < cols; ++j) s += gi[j];
      gv[i] = s;
    }
    pv->accumulate(gv);
  });
}

/// Row-wise log-sum-exp restricted to entries whose `include` flag is set.
/// Rows with an empty active set produce a large negative constant and a zero
/// gradient, so callers can feed the result straight into softplus.
template <typename S>
Var<S> masked_logsumexp_rows(const Var<S>& x, const std::vector<char>& include) {
  if (x.shape().size() != 2) throw ShapeError("masked_logsumexp_rows: rank-2 required");
  const Index rows = x.dim(0), cols = x.dim(1);
  if (Index(include.size()) != rows * cols) {
    throw ShapeError("masked_logsumexp_rows: mask size mismatch");
  }
  constexpr S kEmpty = S(-1e30);
  Tensor<S> out({rows, 1});
  for (Index i = 0; i < rows; ++i) {
    const S* xi = x.value().data() + i * cols;
    const char* mi = include.data() + i * cols;
    S m = -std::numeric_limits<S>::infinity();
    for (Index j = 0; j < cols; ++j) {
      if (mi[j]) m = std::max(m, xi[j]);
    }
    if (!std::isfinite(m)) {
      out[i] = kEmpty;
      continue;
    }
    S denom = S(0);
    for (Index j = 0; j < cols; ++j) {
      if (mi[j]) denom += std::exp(xi[j] - m);
    }
    out[i] = m + std::log(denom);
  }
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  auto mask = include;
  auto lse = out;
  return detail::make_node<S>(std::move(out), {px}, [px, mask, lse](const Tensor<S>& g) {
    const Index rows = px->value.dim(0), cols = px->value.dim(1);
    Tensor<S> gx(px->value.shape());
    for (Index i = 0; i < rows; ++i) {
      if (lse[i] <= S(-1e29)) continue;  // empty active set
      const S* xi = px->value.data() + i * cols;
      const char* mi = mask.data() + i * cols;
      S* go = gx.data() + i * cols;
      for (Index j = 0; j < cols; ++j) {
        if (mi[j]) go[j] = g[i] * std::exp(xi[j] - lse[i]);
      }
    }
    px->accumulate(gx);
  });
}

/// Scalar sum of x weighted by a constant tensor of the same shape.
template <typename S>
Var<S> weighted_sum(const Var<S>& x, const Tensor<S>& w) {
  if (x.shape() != w.shape()) throw ShapeError("weighted_sum: shape mismatch");
  Tensor<S> out = Tensor<S>::scalar((x.value().array() * w.array()).sum());
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  Tensor<S> wc = w;
  return detail::make_node<S>(std::move(out), {px}, [px, wc](const Tensor<S>& g) {
    Tensor<S> gx(px->value.shape(), wc.array() * g[0]);
    px->accumulate(gx);
  });
}

/// Row-wise x / (||x|| + eps).
template <typename S>
Var<S> l2_normalize_rows(const Var<S>& x, S eps = S(1e-12)) {
  if (x.shape().size() != 2) throw ShapeError("l2_normalize_rows: rank-2 required");
  const Index rows = x.dim(0), cols = x.dim(1);
  Tensor<S> out(x.shape());
  Tensor<S> norms({rows});
  for (Index i = 0; i < rows; ++i) {
    const S* xi = x.value().data() + i * cols;
    S sq = S(0);
    for (Index j = 0; j < cols; ++j) sq += xi[j] * xi[j];
    const S n = std::sqrt(sq);
    norms[i] = n;
    S* yi = out.data() + i * cols;
    for (Index j = 0; j < cols; ++j) yi[j] = xi[j] / (n + eps);
  }
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  return detail::make_node<S>(std::move(out), {px}, [px, norms, eps](const Tensor<S>& g) {
    const Index rows = px->value.dim(0), cols = px->value.dim(1);
    Tensor<S> gx(px->value.shape());
    for (Index i = 0; i < rows; ++i) {
      const S n = norms[i];
      const S denom = n + eps;
      const S* xi = px->value.data() + i * cols;
      const S* gi = g.data() + i * cols;
      S dot = S(0);
      for (Index j = 0; j < cols; ++j) dot += gi[j] * xi[j];
      // Grouped as (g - (dot/n) * y) / denom: the naive dot*x/(n*denom^2)
      // underflows to 0/0 in single precision when a row is all zeros.
      const S coeff = dot / std::max(n, S(1e-30));
      S* go = gx.data() + i * cols;
      for (Index j = 0; j < cols; ++j) {
        go[j] = (gi[j] - coeff * (xi[j] / denom)) / denom;
      }
    }
    px->accumulate(gx);
  });
}

}  // namespace semc
