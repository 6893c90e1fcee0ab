// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "semc/autograd/var.hpp"
#include "semc/core/error.hpp"
#include "semc/core/tensor.hpp"

namespace semc {

namespace detail {

/// Unfold one image's group of channels into a [C*kh*kw, oh*ow] patch matrix.
template <typename S>
void im2col(const S* x, Index channels, Index height, Index width, Index kh, Index kw,
            Index stride, Index pad, Index oh, Index ow, S* cols) {
  for (Index c = 0; c < channels; ++c) {
    for (Index ki = 0; ki < kh; ++ki) {
      for (Index kj = 0; kj < kw; ++kj) {
        S* row = cols + ((c * kh + ki) * kw + kj) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * stride - pad + ki;
          S* dst = row + oy * ow;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + ow, S(0));
            continue;
          }
          const S* src_row = x + (c * height + iy) * width;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * stride - pad + kj;
            dst[ox] = (ix >= 0 && ix < width) ? src_row[ix] : S(0);
          }
        }
      }
    }
  }
}

/// Scatter-add the transpose of im2col: fold a patch matrix back into an image.
template <typename S>
void col2im(const S* cols, Index channels, Index height, Index width, Index kh, Index kw,
            Index stride, Index pad, Index oh, Index ow, S* x) {
  for (Index c = 0; c < channels; ++c) {
    for (Index ki = 0; ki < kh; ++ki) {
      for (Index kj = 0; kj < kw; ++kj) {
        const S* row = cols + ((c * kh + ki) * kw + kj) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * stride - pad + ki;
          if (iy < 0 || iy >= height) continue;
          const S* src = row + oy * ow;
          S* dst_row = x + (c * height + iy) * width;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * stride - pad + kj;
            if (ix >= 0 && ix < width) dst_row[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Grouped 2D convolution over NCHW input, weight [Cout, Cin/groups, kh, kw].
/// Pass Var<S>{} as bias to omit it.
template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& b, Index stride,
              Index pad, Index groups = 1) {
  if (x.shape().size() != 4) throw ShapeError("conv2d: NCHW input required");
  if (w.shape().size() != 4) throw ShapeError("conv2d: rank-4 weight required");
  const Index batch = x.dim(0), cin = x.dim(1), height = x.dim(2), width = x.dim(3);
  const Index cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (groups < 1 || cin % groups != 0 || cout % groups != 0) {
    throw ShapeError("conv2d: channels not divisible by groups");
  }
  const Index cg = cin / groups, og = cout / groups;
  if (w.dim(1) != cg) {
    throw ShapeError("conv2d: weight expects " + std::to_string(w.dim(1)) +
                     " input channels per group, got " + std::to_string(cg));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be positive");
  const Index oh = (height + 2 * pad - kh) / stride + 1;
  const Index ow = (width + 2 * pad - kw) / stride + 1;
  if (height + 2 * pad < kh || width + 2 * pad < kw) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  if (b.defined() && b.numel() != cout) throw ShapeError("conv2d: bias size mismatch");

  const Index patch = cg * kh * kw;
  Tensor<S> out({batch, cout, oh, ow});
  std::vector<S> cols(std::size_t(patch * oh * ow));
  using MapM = typename Tensor<S>::MatrixMap;
  using CMapM = typename Tensor<S>::ConstMatrixMap;
  for (Index bi = 0; bi < batch; ++bi) {
    for (Index gi = 0; gi < groups; ++gi) {
      const S* xin = x.value().data() + (bi * cin + gi * cg) * height * width;
      detail::im2col(xin, cg, height, width, kh, kw, stride, pad, oh, ow, cols.data());
      CMapM wm(w.value().data() + gi * og * patch, og, patch);
      CMapM cm(cols.data(), patch, oh * ow);
      MapM ym(out.data() + (bi * cout + gi * og) * oh * ow, og, oh * ow);
      ym.noalias() = wm * cm;
    }
    if (b.defined()) {
      for (Index oc = 0; oc < cout; ++oc) {
        S* plane = out.data() + (bi * cout + oc) * oh * ow;
        const S bias = b.value()[oc];
        for (Index i = 0; i < oh * ow; ++i) plane[i] += bias;
      }
    }
  }

  const bool track = b.defined() ? detail::track_grad<S>({&x, &w, &b})
                                 : detail::track_grad<S>({&x, &w});
  if (!track) return Var<S>::constant(std::move(out));
  auto px = x.node(), pw = w.node();
  NodePtr<S> pb = b.defined() ? b.node() : nullptr;
  std::vector<NodePtr<S>> parents = {px, pw};
  if (pb) parents.push_back(pb);
  return detail::make_node<S>(
      std::move(out), std::move(parents),
      [px, pw, pb, stride, pad, groups, oh, ow](const Tensor<S>& g) {
        const Index batch = px->value.dim(0), cin = px->value.dim(1);
        const Index height = px->value.dim(2), width = px->value.dim(3);
        const Index cout = pw->value.dim(0), kh = pw->value.dim(2), kw = pw->value.dim(3);
        const Index cg = cin / groups, og = cout / groups;
        const Index patch = cg * kh * kw;
        using MapM = typename Tensor<S>::MatrixMap;
        using CMapM = typename Tensor<S>::ConstMatrixMap;
        const bool need_x = px->requires_grad;
        const bool need_w = pw->requires_grad;
        Tensor<S> gx = need_x ? Tensor<S>(px->value.shape()) : Tensor<S>();
        Tensor<S> gw = need_w ? Tensor<S>(pw->value.shape()) : Tensor<S>();
        std::vector<S> cols(std::size_t(patch * oh * ow));
        std::vector<S> dcols(need_x ? std::size_t(patch * oh * ow) : 0);
        for (Index bi = 0; bi < batch; ++bi) {
          for (Index gi = 0; gi < groups; ++gi) {
            CMapM gm(g.data() + (bi * cout + gi * og) * oh * ow, og, oh * ow);
            if (need_w) {
              const S* xin =
                  px->value.data() + (bi * cin + gi * cg) * height * width;
              detail::im2col(xin, cg, height, width, kh, kw, stride, pad, oh, ow,
                             cols.data());
              CMapM cm(cols.data(), patch, oh * ow);
              MapM gwm(gw.data() + gi * og * patch, og, patch);
              gwm.noalias() += gm * cm.transpose();
            }
            if (need_x) {
              CMapM wm(pw->value.data() + gi * og * patch, og, patch);
              MapM dcm(dcols.data(), patch, oh * ow);
              dcm.noalias() = wm.transpose() * gm;
              S* gxp = gx.data() + (bi * cin + gi * cg) * height * width;
              detail::col2im(dcols.data(), cg, height, width, kh, kw, stride, pad, oh,
                             ow, gxp);
            }
          }
        }
        if (need_x) px->accumulate(gx);
        if (need_w) pw->accumulate(gw);
        if (pb && pb->requires_grad) {
          Tensor<S> gb(pb->value.shape());
          for (Index bi = 0; bi < batch; ++bi) {
            for (Index oc = 0; oc < cout; ++oc) {
              const S* plane = g.data() + (bi * cout + oc) * oh * ow;
              S s = S(0);
              for (Index i = 0; i < oh * ow; ++i) s += plane[i];
              gb[oc] += s;
            }
          }
          pb->accumulate(gb);
        }
      });
}

/// Batch normalization over the channel dimension of NCHW input. In training
/// mode the batch statistics normalize the activations and update the running
/// buffers in place; in inference mode the running buffers are used as fixed
/// constants.
template <typename S>
Var<S> batchnorm2d(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta,
                   Tensor<S>& running_mean, Tensor<S>& running_var, bool training,
                   S momentum = S(0.1), S eps = S(1e-5)) {
  if (x.shape().size() != 4) throw ShapeError("batchnorm2d: NCHW input required");
  const Index batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  if (gamma.numel() != channels || beta.numel() != channels ||
      running_mean.numel() != channels || running_var.numel() != channels) {
    throw ShapeError("batchnorm2d: per-channel parameter size mismatch");
  }
  const Index plane = height * width;
  const Index n = batch * plane;
  Tensor<S> mean({channels}), invstd({channels});
  if (training) {
    for (Index c = 0; c < channels; ++c) {
      S sum = S(0), sq = S(0);
      for (Index bi = 0; bi < batch; ++bi) {
        const S* p = x.value().data() + (bi * channels + c) * plane;
        for (Index i = 0; i < plane; ++i) {
          sum += p[i];
          sq += p[i] * p[i];
        }
      }
      const S m = sum / S(n);
      const S var = std::max(sq / S(n) - m * m, S(0));
      mean[c] = m;
      invstd[c] = S(1) / std::sqrt(var + eps);
      const S unbiased = n > 1 ? var * S(n) / S(n - 1) : var;
      running_mean[c] = (S(1) - momentum) * running_mean[c] + momentum * m;
      running_var[c] = (S(1) - momentum) * running_var[c] + momentum * unbiased;
    }
  } else {
    for (Index c = 0; c < channels; ++c) {
      mean[c] = running_mean[c];
      invstd[c] = S(1) / std::sqrt(running_var[c] + eps);
    }
  }

  Tensor<S> xhat(x.shape());
  Tensor<S> out(x.shape());
  for (Index bi = 0; bi < batch; ++bi) {
    for (Index c = 0; c < channels; ++c) {
      const S* p = x.value().data() + (bi * channels + c) * plane;
      S* ph = xhat.data() + (bi * channels + c) * plane;
      S* po = out.data() + (bi * channels + c) * plane;
      const S m = mean[c], is = invstd[c];
      const S gm = gamma.value()[c], bt = beta.value()[c];
      for (Index i = 0; i < plane; ++i) {
        ph[i] = (p[i] - m) * is;
        po[i] = gm * ph[i] + bt;
      }
    }
  }

  if (!detail::track_grad<S>({&x, &gamma, &beta})) return Var<S>::constant(std::move(out));
  auto px = x.node(), pg = gamma.node(), pbt = beta.node();
  return detail::make_node<S>(
      std::move(out), {px, pg, pbt},
      [px, pg, pbt, xhat, invstd, training](const Tensor<S>& g) {
        const Index batch = px->value.dim(0), channels = px->value.dim(1);
        const Index plane = px->value.dim(2) * px->value.dim(3);
        const Index n = batch * plane;
        Tensor<S> sum_g({channels}), sum_gx({channels});
        for (Index bi = 0; bi < batch; ++bi) {
          for (Index c = 0; c < channels; ++c) {
            const S* gp = g.data() + (bi * channels + c) * plane;
            const S* hp = xhat.data() + (bi * channels + c) * plane;
            S sg = S(0), sgx = S(0);
            for (Index i = 0; i < plane; ++i) {
              sg += gp[i];
              sgx += gp[i] * hp[i];
            }
            sum_g[c] += sg;
            sum_gx[c] += sgx;
          }
        }
        if (pg->requires_grad) pg->accumulate(sum_gx);
        if (pbt->requires_grad) pbt->accumulate(sum_g);
        if (px->requires_grad) {
          Tensor<S> gx(px->value.shape());
          for (Index bi = 0; bi < batch; ++bi) {
            for (Index c = 0; c < channels; ++c) {
              const S* gp = g.data() + (bi * channels + c) * plane;
              const S* hp = xhat.data() + (bi * channels + c) * plane;
              S* go = gx.data() + (bi * channels + c) * plane;
              const S gm = pg->value[c], is = invstd[c];
              if (training) {
                const S mg = sum_g[c] / S(n), mgx = sum_gx[c] / S(n);
                for (Index i = 0; i < plane; ++i) {
                  go[i] = gm * is * (gp[i] - mg - hp[i] * mgx);
                }
              } else {
                for (Index i = 0; i < plane; ++i) go[i] = gm * is * gp[i];
              }
            }
          }
          px->accumulate(gx);
        }
      });
}

/// Max pooling with -inf padding; gradients flow to the argmax element only.
template <typename S>
Var<S> maxpool2d(const Var<S>& x, Index kernel, Index stride, Index pad) {
  if (x.shape().size() != 4) throw ShapeError("maxpool2d: NCHW input required");
  const Index batch = x.dim(0), channels = x.dim(1), height = x.dim(2), width = x.dim(3);
  if (pad >= kernel) throw ShapeError("maxpool2d: padding must be smaller than kernel");
  const Index oh = (height + 2 * pad - kernel) / stride + 1;
  const Index ow = (width + 2 * pad - kernel) / stride + 1;
  Tensor<S> out({batch, channels, oh, ow});
  std::vector<Index> argmax(std::size_t(out.numel()));
  Index oidx = 0;
  for (Index bi = 0; bi < batch; ++bi) {
    for (Index c = 0; c < channels; ++c) {
      const S* p = x.value().data() + (bi * channels + c) * height * width;
      for (Index oy = 0; oy < oh; ++oy) {
        for (Index ox = 0; ox < ow; ++ox, ++oidx) {
          S best = -std::numeric_limits<S>::infinity();
          Index best_at = -1;
          for (Index ki = 0; ki < kernel; ++ki) {
            const Index iy = oy * stride - pad + ki;
            if (iy < 0 || iy >= height) continue;
            for (Index kj = 0; kj < kernel; ++kj) {
              const Index ix = ox * stride - pad + kj;
              if (ix < 0 || ix >= width) continue;
              const S v = p[iy * width + ix];
              if (v > best) {
                best = v;
                best_at = (bi * channels + c) * height * width + iy * width + ix;
              }
            }
          }
          out[oidx] = best;
          argmax[std::size_t(oidx)] = best_at;
        }
      }
    }
  }
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  return detail::make_node<S>(std::move(out), {px}, [px, argmax](const Tensor<S>& g) {
    Tensor<S> gx(px->value.shape());
    for (Index i = 0; i < g.numel(); ++i) {
      if (argmax[std::size_t(i)] >= 0) gx[argmax[std::size_t(i)]] += g[i];
    }
    px->accumulate(gx);
  });
}

/// Spatial mean per (batch, channel): NCHW -> [B,C].
template <typename S>
Var<S> global_avg_pool(const Var<S>& x) {
  if (x.shape().size() != 4) throw ShapeError("global_avg_pool: NCHW input required");
  const Index batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<S> out({batch, channels});
  for (Index bi = 0; bi < batch; ++bi) {
    for (Index c = 0; c < channels; ++c) {
      const S* p = x.value().data() + (bi * channels + c) * plane;
      S s = S(0);
      for (Index i = 0; i < plane; ++i) s += p[i];
      out[bi * channels + c] = s / S(plane);
    }
  }
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  return detail::make_node<S>(std::move(out), {px}, [px](const Tensor<S>& g) {
    const Index batch = px->value.dim(0), channels = px->value.dim(1);
    const Index plane = px->value.dim(2) * px->value.dim(3);
    Tensor<S> gx(px->value.shape());
    for (Index bi = 0; bi < batch; ++bi) {
      for (Index c = 0; c < channels; ++c) {
        const S v = g[bi * channels + c] / S(plane);
        S* gp = gx.data() + (bi * channels + c) * plane;
        for (Index i = 0; i < plane; ++i) gp[i] = v;
      }
    }
    px->accumulate(gx);
  });
}

/// Spatial max per (batch, channel): NCHW -> [B,C].
template <typename S>
Var<S> global_max_pool(const Var<S>& x) {
  if (x.shape().size() != 4) throw ShapeError("global_max_pool: NCHW input required");
  const Index batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<S> out({batch, channels});
  std::vector<Index> argmax(std::size_t(batch * channels));
  for (Index bi = 0; bi < batch; ++bi) {
    for (Index c = 0; c < channels; ++c) {
      const S* p = x.value().data() + (bi * channels + c) * plane;
      Index best = 0;
      for (Index i = 1; i < plane; ++i) {
        if (p[i] > p[best]) best = i;
      }
      out[bi * channels + c] = p[best];
      argmax[std::size_t(bi * channels + c)] = (bi * channels + c) * plane + best;
    }
  }
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  return detail::make_node<S>(std::move(out), {px}, [px, argmax](const Tensor<S>& g) {
    Tensor<S> gx(px->value.shape());
    for (Index i = 0; i < g.numel(); ++i) gx[argmax[std::size_t(i)]] += g[i];
    px->accumulate(gx);
  });
}

/// Mean over channels: NCHW -> [B,1,H,W].
template <typename S>
Var<S> channel_mean(const Var<S>& x) {
  if (x.shape().size() != 4) throw ShapeError("channel_mean: NCHW input required");
  const Index batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<S> out({batch, Index(1), x.dim(2), x.dim(3)});
  for (Index bi = 0; bi < batch; ++bi) {
    S* po = out.data() + bi * plane;
    for (Index c = 0; c < channels; ++c) {
      const S* p = x.value().data() + (bi * channels + c) * plane;
      for (Index i = 0; i < plane; ++i) po[i] += p[i];
    }
    for (Index i = 0; i < plane; ++i) po[i] /= S(channels);
  }
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  return detail::make_node<S>(std::move(out), {px}, [px](const Tensor<S>& g) {
    const Index batch = px->value.dim(0), channels = px->value.dim(1);
    const Index plane = px->value.dim(2) * px->value.dim(3);
    Tensor<S> gx(px->value.shape());
    for (Index bi = 0; bi < batch; ++bi) {
      const S* gp = g.data() + bi * plane;
      for (Index c = 0; c < channels; ++c) {
        S* go = gx.data() + (bi * channels + c) * plane;
        for (Index i = 0; i < plane; ++i) go[i] = gp[i] / S(channels);
      }
    }
    px->accumulate(gx);
  });
}

/// Max over channels: NCHW -> [B,1,H,W].
template <typename S>
Var<S> channel_max(const Var<S>& x) {
  if (x.shape().size() != 4) throw ShapeError("channel_max: NCHW input required");
  const Index batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<S> out({batch, Index(1), x.dim(2), x.dim(3)});
  std::vector<Index> argmax(std::size_t(batch * plane));
  for (Index bi = 0; bi < batch; ++bi) {
    for (Index i = 0; i < plane; ++i) {
      Index best_c = 0;
      S best = x.value()[(bi * channels) * plane + i];
      for (Index c = 1; c < channels; ++c) {
        const S v = x.value()[(bi * channels + c) * plane + i];
        if (v > best) {
          best = v;
          best_c = c;
        }
      }
      out[bi * plane + i] = best;
      argmax[std::size_t(bi * plane + i)] = (bi * channels + best_c) * plane + i;
    }
  }
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  return detail::make_node<S>(std::move(out), {px}, [px, argmax](const Tensor<S>& g) {
    Tensor<S> gx(px->value.shape());
    for (Index i = 0; i < g.numel(); ++i) gx[argmax[std::size_t(i)]] += g[i];
    px->accumulate(gx);
  });
}

/// Concatenate NCHW tensors along the channel dimension.
template <typename S>
Var<S> concat_channels(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: empty input");
  const Index batch = parts[0].dim(0), height = parts[0].dim(2), width = parts[0].dim(3);
  Index channels = 0;
  bool track = false;
  for (const auto& p : parts) {
    if (p.shape().size() != 4 || p.dim(0) != batch || p.dim(2) != height ||
        p.dim(3) != width) {
      throw ShapeError("concat_channels: incompatible shapes");
    }
    channels += p.dim(1);
    track = track || p.requires_grad();
  }
  const Index plane = height * width;
  Tensor<S> out({batch, channels, height, width});
  for (Index bi = 0; bi < batch; ++bi) {
    Index coff = 0;
    for (const auto& p : parts) {
      const Index pc = p.dim(1);
      std::copy(p.value().data() + bi * pc * plane,
                p.value().data() + (bi + 1) * pc * plane,
                out.data() + (bi * channels + coff) * plane);
      coff += pc;
    }
  }
  if (!grad_mode() || !track) return Var<S>::constant(std::move(out));
  std::vector<NodePtr<S>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) parents.push_back(p.node());
  auto parents_copy = parents;
  return detail::make_node<S>(std::move(out), std::move(parents),
                              [parents_copy, channels, plane](const Tensor<S>& g) {
    const Index batch = parents_copy[0]->value.dim(0);
    for (Index bi = 0; bi < batch; ++bi) {
      Index coff = 0;
      for (const auto& p : parents_copy) {
        const Index pc = p->value.dim(1);
        if (p->requires_grad) {
          if (!p->grad.numel()) p->grad = Tensor<S>(p->value.shape());
          const S* src = g.data() + (bi * channels + coff) * plane;
          S* dst = p->grad.data() + bi * pc * plane;
          for (Index i = 0; i < pc * plane; ++i) dst[i] += src[i];
        }
        coff += pc;
      }
    }
  });
}

/// Permutation used by channel shuffling: with C channels in g groups, output
/// channel s*g + r reads input channel r*(C/g) + s.
inline std::vector<Index> shuffle_permutation(Index channels, Index groups) {
  if (groups < 1 || channels % groups != 0) {
    throw ShapeError("channel_shuffle: " + std::to_string(channels) +
                     " channels not divisible into " + std::to_string(groups) +
                     " groups");
  }
  const Index per = channels / groups;
  std::vector<Index> perm(static_cast<std::size_t>(channels));
  for (Index r = 0; r < groups; ++r) {
    for (Index s = 0; s < per; ++s) perm[std::size_t(s * groups + r)] = r * per + s;
  }
  return perm;
}

template <typename S>
Var<S> channel_shuffle(const Var<S>& x, Index groups) {
  if (x.shape().size() != 4) throw ShapeError("channel_shuffle: NCHW input required");
  const Index batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  const auto perm = shuffle_permutation(channels, groups);
  Tensor<S> out(x.shape());
  for (Index bi = 0; bi < batch; ++bi) {
    for (Index c = 0; c < channels; ++c) {
      std::copy(x.value().data() + (bi * channels + perm[std::size_t(c)]) * plane,
                x.value().data() + (bi * channels + perm[std::size_t(c)] + 1) * plane,
                out.data() + (bi * channels + c) * plane);
    }
  }
  if (!detail::track_grad<S>({&x})) return Var<S>::constant(std::move(out));
  auto px = x.node();
  return detail::make_node<S>(std::move(out), {px}, [px, perm](const Tensor<S>& g) {
    const Index batch = px->value.dim(0), channels = px->value.dim(1);
    const Index plane = px->value.dim(2) * px->value.dim(3);
    Tensor<S> gx(px->value.shape());
    for (Index bi = 0; bi < batch; ++bi) {
      for (Index c = 0; c < channels; ++c) {
        std::copy(g.data() + (bi * channels + c) * plane,
                  g.data() + (bi * channels + c + 1) * plane,
                  gx.data() + (bi * channels + perm[std::size_t(c)]) * plane);
      }
    }
    px->accumulate(gx);
  });
}

/// Multiply each (b,c) plane of NCHW x by the scalar w[b,c].
template <typename S>
Var<S> scale_channels(const Var<S>& x, const Var<S>& w) {
  if (x.shape().size() != 4 || w.shape().size() != 2 || w.dim(0) != x.dim(0) ||
      w.dim(1) != x.dim(1)) {
    throw ShapeError("scale_channels: expected NCHW x and [B,C] weights");
  }
  const Index batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<S> out(x.shape());
  for (Index bc = 0; bc < batch * channels; ++bc) {
    const S s = w.value()[bc];
    const S* p = x.value().data() + bc * plane;
    S* po = out.data() + bc * plane;
    for (Index i = 0; i < plane; ++i) po[i] = p[i] * s;
  }
  if (!detail::track_grad<S>({&x, &w})) return Var<S>::constant(std::move(out));
  auto px = x.node(), pw = w.node();
  return detail::make_node<S>(std::move(out), {px, pw}, [px, pw](const Tensor<S>& g) {
    const Index bc_total = px->value.dim(0) * px->value.dim(1);
    const Index plane = px->value.dim(2) * px->value.dim(3);
    if (px->requires_grad) {
      Tensor<S> gx(px->value.shape());
      for (Index bc = 0; bc < bc_total; ++bc) {
        const S s = pw->value[bc];
        const S* gp = g.data() + bc * plane;
        S* go = gx.data() + bc * plane;
        for (Index i = 0; i < plane; ++i) go[i] = gp[i] * s;
      }
      px->accumulate(gx);
    }
    if (pw->requires_grad) {
      Tensor<S> gw(pw->value.shape());
      for (Index bc = 0; bc < bc_total; ++bc) {
        const S* gp = g.data() + bc * plane;
        const S* xp = px->value.data() + bc * plane;
        S s = S(0);
        for (Index i = 0; i < plane; ++i) s += gp[i] * xp[i];
        gw[bc] = s;
      }
      pw->accumulate(gw);
    }
  });
}

/// Multiply every channel of NCHW x by the per-pixel map s of shape [B,1,H,W].
template <typename S>
Var<S> scale_spatial(const Var<S>& x, const Var<S>& s) {
  if (x.shape().size() != 4 || s.shape().size() != 4 || s.dim(0) != x.dim(0) ||
      s.dim(1) != 1 || s.dim(2) != x.dim(2) || s.dim(3) != x.dim(3)) {
    throw ShapeError("scale_spatial: expected NCHW x and [B,1,H,W] map");
  }
  const Index batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  Tensor<S> out(x.shape());
  for (Index bi = 0; bi < batch; ++bi) {
    const S* sp = s.value().data() + bi * plane;
    for (Index c = 0; c < channels; ++c) {
      const S* p = x.value().data() + (bi * channels + c) * plane;
      S* po = out.data() + (bi * channels + c) * plane;
      for (Index i = 0; i < plane; ++i) po[i] = p[i] * sp[i];
    }
  }
  if (!detail::track_grad<S>({&x, &s})) return Var<S>::constant(std::move(out));
  auto px = x.node(), ps = s.node();
  return detail::make_node<S>(std::move(out), {px, ps}, [px, ps](const Tensor<S>& g) {
    const Index batch = px->value.dim(0), channels = px->value.dim(1);
    const Index plane = px->value.dim(2) * px->value.dim(3);
    if (px->requires_grad) {
      Tensor<S> gx(px->value.shape());
      for (Index bi = 0; bi < batch; ++bi) {
        const S* sp = ps->value.data() + bi * plane;
        for (Index c = 0; c < channels; ++c) {
          const S* gp = g.data() + (bi * channels + c) * plane;
          S* go = gx.data() + (bi * channels + c) * plane;
          for (Index i = 0; i < plane; ++i) go[i] = gp[i] * sp[i];
        }
      }
      px->accumulate(gx);
    }
    if (ps->requires_grad) {
      Tensor<S> gs(ps->value.shape());
      for (Index bi = 0; bi < batch; ++bi) {
        S* go = gs.data() + bi * plane;
        for (Index c = 0; c < channels; ++c) {
          const S* gp = g.data() + (bi * channels + c) * plane;
          const S* xp = px->value.data() + (bi * channels + c) * plane;
          for (Index i = 0; i < plane; ++i) go[i] += gp[i] * xp[i];
        }
      }
      ps->accumulate(gs);
    }
  });
}

}  // namespace semc
