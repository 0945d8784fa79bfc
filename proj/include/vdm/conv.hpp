// Plain 2-D convolution (stride 1, zero padding (k-1)/2, shape preserving)
// and the standard residual block. Forward is im2col + one Eigen GEMM per
// batch item.
//
// Parameters and activation caches are separate structs: a *Layer owns the
// weights and their gradient buffers, a *Op owns the cached input of one
// application site. Weight sharing (the feature extractor runs on five
// pictures with one parameter set) is then just several Ops accumulating
// into one Layer. Backward rebuilds the column matrix from the cached input
// instead of holding it.
#pragma once

#include <string>
#include <vector>

#include "vdm/param.hpp"
#include "vdm/tensor.hpp"

namespace vdm {

template <typename S>
struct ConvParams {
  Tensor4<S> weight;  // (c_out, c_in, k, k), k odd
  VecX<S> bias;       // c_out

  Index c_out() const { return weight.n(); }
  Index c_in() const { return weight.c(); }
  Index kernel() const { return weight.h(); }

  void validate() const {
    if (weight.h() != weight.w() || weight.h() % 2 == 0)
      throw std::invalid_argument("ConvParams: kernel must be square and odd");
    if (bias.size() != weight.n())
      throw std::invalid_argument("ConvParams: bias size != c_out");
  }
};

// cols is (c_in*k*k) x (h*w); cols((c*k+i)*k+j, y*w+x) = x_pad(c, y+i-p, x+j-p)
template <typename S>
void im2col(const Tensor4<S>& x, Index item, Index k, MatX<S>& cols) {
  const Index c_in = x.c(), h = x.h(), w = x.w(), pad = (k - 1) / 2;
  cols.resize(c_in * k * k, h * w);
  for (Index c = 0; c < c_in; ++c) {
    auto src = x.plane(item, c);
    for (Index i = 0; i < k; ++i) {
      for (Index j = 0; j < k; ++j) {
        const Index row = (c * k + i) * k + j;
        for (Index y = 0; y < h; ++y) {
          const Index sy = y + i - pad;
          S* dst = cols.data() + row + (y * w) * cols.rows();
          if (sy < 0 || sy >= h) {
            for (Index xx = 0; xx < w; ++xx) dst[xx * cols.rows()] = S(0);
            continue;
          }
          for (Index xx = 0; xx < w; ++xx) {
            const Index sx = xx + j - pad;
            dst[xx * cols.rows()] = (sx < 0 || sx >= w) ? S(0) : src(sy, sx);
          }
        }
      }
    }
  }
}

template <typename S>
void col2im_add(const MatX<S>& cols, Index item, Index k, Tensor4<S>& dx) {
  const Index c_in = dx.c(), h = dx.h(), w = dx.w(), pad = (k - 1) / 2;
  for (Index c = 0; c < c_in; ++c) {
    auto dst = dx.plane(item, c);
    for (Index i = 0; i < k; ++i) {
      for (Index j = 0; j < k; ++j) {
        const Index row = (c * k + i) * k + j;
        for (Index y = 0; y < h; ++y) {
          const Index sy = y + i - pad;
          if (sy < 0 || sy >= h) continue;
          const S* src = cols.data() + row + (y * w) * cols.rows();
          for (Index xx = 0; xx < w; ++xx) {
            const Index sx = xx + j - pad;
            if (sx < 0 || sx >= w) continue;
            dst(sy, sx) += src[xx * cols.rows()];
          }
        }
      }
    }
  }
}

template <typename S>
Tensor4<S> conv2d(const Tensor4<S>& x, const ConvParams<S>& p) {
  p.validate();
  if (x.c() != p.c_in())
    throw std::invalid_argument("conv2d: input channels " +
                                std::to_string(x.c()) + " != weight c_in " +
                                std::to_string(p.c_in()));
  const Index k = p.kernel();
  Tensor4<S> y(x.n(), p.c_out(), x.h(), x.w());
  Eigen::Map<const RowMat<S>> wmat(p.weight.data(), p.c_out(),
                                   p.c_in() * k * k);
  MatX<S> cols;
  for (Index n = 0; n < x.n(); ++n) {
    im2col(x, n, k, cols);
    auto out = y.item_matrix(n);
    out.noalias() = wmat * cols;
    out.colwise() += p.bias.matrix();
  }
  return y;
}

// Accumulates into dw/db; dx may be null when the input gradient is unused.
template <typename S>
void conv2d_backward(const Tensor4<S>& x, const ConvParams<S>& p,
                     const Tensor4<S>& gy, Tensor4<S>* dx, Tensor4<S>& dw,
                     VecX<S>& db) {
  const Index k = p.kernel();
  Eigen::Map<const RowMat<S>> wmat(p.weight.data(), p.c_out(),
                                   p.c_in() * k * k);
  Eigen::Map<RowMat<S>> dwmat(dw.data(), p.c_out(), p.c_in() * k * k);
  MatX<S> cols, dcols;
  for (Index n = 0; n < x.n(); ++n) {
    auto g = gy.item_matrix(n);
    im2col(x, n, k, cols);
    dwmat.noalias() += g * cols.transpose();
    db.matrix() += g.rowwise().sum();
    if (dx) {
      dcols.noalias() = wmat.transpose() * g;
      col2im_add(dcols, n, k, *dx);
    }
  }
}

template <typename S>
Tensor4<S> relu(const Tensor4<S>& x) {
  Tensor4<S> y = x;
  y.flat() = y.flat().max(S(0));
  return y;
}

// y = x + conv2(relu(conv1(x))), channel preserving
template <typename S>
Tensor4<S> res_block(const Tensor4<S>& x, const ConvParams<S>& p1,
                     const ConvParams<S>& p2) {
  if (p1.c_in() != x.c() || p2.c_out() != x.c())
    throw std::invalid_argument("res_block: channel mismatch");
  Tensor4<S> y = conv2d(relu(conv2d(x, p1)), p2);
  y.flat() += x.flat();
  return y;
}

// ---------------------------------------------------------------------------
// Parameter holders

template <typename S>
struct ConvLayer {
  ConvParams<S> p;
  Tensor4<S> grad_w;
  VecX<S> grad_b;

  void init(Index c_out, Index c_in, Index k, Rng& rng, bool zero_init) {
    p.weight = Tensor4<S>(c_out, c_in, k, k);
    p.bias = VecX<S>::Zero(c_out);
    if (!zero_init) {
      const double bound = std::sqrt(6.0 / double(c_in * k * k));
      fill_uniform(p.weight, rng, -bound, bound);
    }
    grad_w = Tensor4<S>(c_out, c_in, k, k);
    grad_b = VecX<S>::Zero(c_out);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back(ParamRef<S>{
        prefix + ".weight",
        {p.weight.n(), p.weight.c(), p.weight.h(), p.weight.w()},
        p.weight.data(), grad_w.data(), p.weight.size()});
    out.push_back(ParamRef<S>{prefix + ".bias",
                              {static_cast<Index>(p.bias.size())},
                              p.bias.data(), grad_b.data(), p.bias.size()});
  }

  Index param_count() const { return p.weight.size() + p.bias.size(); }
};

template <typename S>
struct ResLayer {
  ConvLayer<S> c1, c2;

  // residual-branch weights start at 0.1x so the block opens near identity
  void init(Index channels, Index k, Rng& rng) {
    c1.init(channels, channels, k, rng, false);
    c2.init(channels, channels, k, rng, false);
    c1.p.weight.flat() *= S(0.1);
    c2.p.weight.flat() *= S(0.1);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    c1.collect(prefix + ".conv1", out);
    c2.collect(prefix + ".conv2", out);
  }

  Index param_count() const { return c1.param_count() + c2.param_count(); }
};

// ---------------------------------------------------------------------------
// Application sites (activation caches)

template <typename S>
struct ConvOp {
  Tensor4<S> cached_x;

  Tensor4<S> forward(const ConvLayer<S>& layer, const Tensor4<S>& x,
                     bool cache = true) {
    if (cache) cached_x = x;
    return conv2d(x, layer.p);
  }

  Tensor4<S> backward(ConvLayer<S>& layer, const Tensor4<S>& gy) {
    Tensor4<S> dx(cached_x.n(), cached_x.c(), cached_x.h(), cached_x.w());
    conv2d_backward(cached_x, layer.p, gy, &dx, layer.grad_w, layer.grad_b);
    return dx;
  }

  void backward_no_dx(ConvLayer<S>& layer, const Tensor4<S>& gy) {
    conv2d_backward(cached_x, layer.p, gy, static_cast<Tensor4<S>*>(nullptr),
                    layer.grad_w, layer.grad_b);
  }
};

template <typename S>
struct ReluOp {
  Tensor4<S> cached_x;

  Tensor4<S> forward(const Tensor4<S>& x, bool cache = true) {
    if (cache) cached_x = x;
    return relu(x);
  }

  Tensor4<S> backward(const Tensor4<S>& gy) {
    Tensor4<S> dx = gy;
    dx.flat() *= (cached_x.flat() > S(0)).template cast<S>();
    return dx;
  }
};

template <typename S>
struct ResOp {
  ConvOp<S> o1, o2;
  ReluOp<S> act;

  Tensor4<S> forward(const ResLayer<S>& layer, const Tensor4<S>& x,
                     bool cache = true) {
    Tensor4<S> y = o2.forward(
        layer.c2, act.forward(o1.forward(layer.c1, x, cache), cache), cache);
    y.flat() += x.flat();
    return y;
  }

  Tensor4<S> backward(ResLayer<S>& layer, const Tensor4<S>& gy) {
    Tensor4<S> dx = o1.backward(layer.c1, act.backward(o2.backward(layer.c2, gy)));
    dx.flat() += gy.flat();
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Convenience wrappers for the common one-site case

template <typename S>
struct Conv2d {
  ConvLayer<S> layer;
  ConvOp<S> op;

  void init(Index c_out, Index c_in, Index k, Rng& rng, bool zero_init) {
    layer.init(c_out, c_in, k, rng, zero_init);
  }
  Tensor4<S> forward(const Tensor4<S>& x, bool cache = true) {
    return op.forward(layer, x, cache);
  }
  Tensor4<S> backward(const Tensor4<S>& gy) { return op.backward(layer, gy); }
  void backward_no_dx(const Tensor4<S>& gy) { op.backward_no_dx(layer, gy); }
  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    layer.collect(prefix, out);
  }
  Index param_count() const { return layer.param_count(); }
};

template <typename S>
struct ResBlock {
  ResLayer<S> layer;
  ResOp<S> op;

  void init(Index channels, Index k, Rng& rng) { layer.init(channels, k, rng); }
  Tensor4<S> forward(const Tensor4<S>& x, bool cache = true) {
    return op.forward(layer, x, cache);
  }
  Tensor4<S> backward(const Tensor4<S>& gy) { return op.backward(layer, gy); }
  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    layer.collect(prefix, out);
  }
  Index param_count() const { return layer.param_count(); }
};

}  // namespace vdm
