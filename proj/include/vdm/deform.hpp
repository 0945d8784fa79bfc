// Deformable 2-D convolution: kernel taps are displaced by per-position,
// per-group learned offsets and sampled bilinearly, zero outside the image.
// Offset layout for G groups and a k x k kernel: channel 2*(g*k*k + t) is
// the row displacement and 2*(g*k*k + t)+1 the column displacement of tap
// t = i*k + j; input channel c belongs to group c / (c_in/G).
//
// With all offsets zero this reduces exactly to conv2d (bilinear weights
// collapse to the single integer sample).
#pragma once

#include <cmath>

#include "vdm/conv.hpp"
#include "vdm/tensor.hpp"

namespace vdm {

namespace detail {

template <typename S>
inline S bilinear_sample(Eigen::Map<const RowMat<S>> plane, S py, S px) {
  const Index h = plane.rows(), w = plane.cols();
  if (py <= S(-1) || py >= S(h) || px <= S(-1) || px >= S(w)) return S(0);
  const Index y0 = static_cast<Index>(std::floor(py));
  const Index x0 = static_cast<Index>(std::floor(px));
  const S ly = py - S(y0), lx = px - S(x0);
  auto at = [&](Index y, Index x) -> S {
    return (y < 0 || y >= h || x < 0 || x >= w) ? S(0) : plane(y, x);
  };
  const S v00 = at(y0, x0), v01 = at(y0, x0 + 1);
  const S v10 = at(y0 + 1, x0), v11 = at(y0 + 1, x0 + 1);
  return (S(1) - ly) * ((S(1) - lx) * v00 + lx * v01) +
         ly * ((S(1) - lx) * v10 + lx * v11);
}

}  // namespace detail

template <typename S>
void check_offsets(const Tensor4<S>& x, const Tensor4<S>& offsets, Index k,
                   Index groups) {
  if (offsets.c() != 2 * k * k * groups)
    throw std::invalid_argument(
        "deform_conv2d: offset channels " + std::to_string(offsets.c()) +
        " != 2*k*k*G = " + std::to_string(2 * k * k * groups));
  if (x.c() % groups != 0)
    throw std::invalid_argument("deform_conv2d: c_in not divisible by G");
  if (offsets.n() != x.n() || offsets.h() != x.h() || offsets.w() != x.w())
    throw std::invalid_argument("deform_conv2d: offset spatial shape mismatch");
  if (!offsets.flat().isFinite().all())
    throw std::invalid_argument("deform_conv2d: non-finite offsets");
}

// cols is (c_in*k*k) x (h*w), like im2col but bilinearly displaced.
template <typename S>
void deform_im2col(const Tensor4<S>& x, const Tensor4<S>& offsets, Index item,
                   Index k, Index groups, MatX<S>& cols) {
  const Index c_in = x.c(), h = x.h(), w = x.w(), pad = (k - 1) / 2;
  const Index cpg = c_in / groups;
  cols.resize(c_in * k * k, h * w);
  for (Index c = 0; c < c_in; ++c) {
    const Index g = c / cpg;
    auto src = x.plane(item, c);
    for (Index i = 0; i < k; ++i) {
      for (Index j = 0; j < k; ++j) {
        const Index t = i * k + j;
        const Index row = c * k * k + t;
        auto off_y = offsets.plane(item, 2 * (g * k * k + t));
        auto off_x = offsets.plane(item, 2 * (g * k * k + t) + 1);
        for (Index y = 0; y < h; ++y) {
          for (Index xx = 0; xx < w; ++xx) {
            const S py = S(y + i - pad) + off_y(y, xx);
            const S px = S(xx + j - pad) + off_x(y, xx);
            cols(row, y * w + xx) = detail::bilinear_sample<S>(src, py, px);
          }
        }
      }
    }
  }
}

template <typename S>
Tensor4<S> deform_conv2d(const Tensor4<S>& x, const Tensor4<S>& offsets,
                         const ConvParams<S>& p, Index groups) {
  p.validate();
  const Index k = p.kernel();
  check_offsets(x, offsets, k, groups);
  if (x.c() != p.c_in())
    throw std::invalid_argument("deform_conv2d: input channel mismatch");
  Tensor4<S> y(x.n(), p.c_out(), x.h(), x.w());
  Eigen::Map<const RowMat<S>> wmat(p.weight.data(), p.c_out(),
                                   p.c_in() * k * k);
  MatX<S> cols;
  for (Index n = 0; n < x.n(); ++n) {
    deform_im2col(x, offsets, n, k, groups, cols);
    auto out = y.item_matrix(n);
    out.noalias() = wmat * cols;
    out.colwise() += p.bias.matrix();
  }
  return y;
}

// dcols scattered back through the bilinear sampling: gradient w.r.t. the
// four corner pixels and w.r.t. the fractional sample position.
template <typename S>
void deform_conv2d_backward(const Tensor4<S>& x, const Tensor4<S>& offsets,
                            const ConvParams<S>& p, Index groups,
                            const Tensor4<S>& gy, Tensor4<S>* dx,
                            Tensor4<S>* doffsets, Tensor4<S>& dw, VecX<S>& db) {
  const Index k = p.kernel();
  const Index c_in = x.c(), h = x.h(), w = x.w(), pad = (k - 1) / 2;
  const Index cpg = c_in / groups;
  Eigen::Map<const RowMat<S>> wmat(p.weight.data(), p.c_out(),
                                   p.c_in() * k * k);
  Eigen::Map<RowMat<S>> dwmat(dw.data(), p.c_out(), p.c_in() * k * k);
  MatX<S> cols, dcols;
  for (Index n = 0; n < x.n(); ++n) {
    auto g = gy.item_matrix(n);
    deform_im2col(x, offsets, n, k, groups, cols);
    dwmat.noalias() += g * cols.transpose();
    db.matrix() += g.rowwise().sum();
    if (!dx && !doffsets) continue;
    dcols.noalias() = wmat.transpose() * g;
    for (Index c = 0; c < c_in; ++c) {
      const Index grp = c / cpg;
      auto src = x.plane(n, c);
      for (Index i = 0; i < k; ++i) {
        for (Index j = 0; j < k; ++j) {
          const Index t = i * k + j;
          const Index row = c * k * k + t;
          auto off_y = offsets.plane(n, 2 * (grp * k * k + t));
          auto off_x = offsets.plane(n, 2 * (grp * k * k + t) + 1);
          for (Index y = 0; y < h; ++y) {
            for (Index xx = 0; xx < w; ++xx) {
              const S gcol = dcols(row, y * w + xx);
              if (gcol == S(0)) continue;
              const S py = S(y + i - pad) + off_y(y, xx);
              const S px = S(xx + j - pad) + off_x(y, xx);
              if (py <= S(-1) || py >= S(h) || px <= S(-1) || px >= S(w))
                continue;
              const Index y0 = static_cast<Index>(std::floor(py));
              const Index x0 = static_cast<Index>(std::floor(px));
              const S ly = py - S(y0), lx = px - S(x0);
              auto in = [&](Index yy, Index xc) {
                return yy >= 0 && yy < h && xc >= 0 && xc < w;
              };
              const S v00 = in(y0, x0) ? src(y0, x0) : S(0);
              const S v01 = in(y0, x0 + 1) ? src(y0, x0 + 1) : S(0);
              const S v10 = in(y0 + 1, x0) ? src(y0 + 1, x0) : S(0);
              const S v11 = in(y0 + 1, x0 + 1) ? src(y0 + 1, x0 + 1) : S(0);
              if (dx) {
                auto d = dx->plane(n, c);
                if (in(y0, x0)) d(y0, x0) += gcol * (S(1) - ly) * (S(1) - lx);
                if (in(y0, x0 + 1)) d(y0, x0 + 1) += gcol * (S(1) - ly) * lx;
                if (in(y0 + 1, x0)) d(y0 + 1, x0) += gcol * ly * (S(1) - lx);
                if (in(y0 + 1, x0 + 1)) d(y0 + 1, x0 + 1) += gcol * ly * lx;
              }
              if (doffsets) {
                const S dpy = (S(1) - lx) * (v10 - v00) + lx * (v11 - v01);
                const S dpx = (S(1) - ly) * (v01 - v00) + ly * (v11 - v10);
                doffsets->plane(n, 2 * (grp * k * k + t))(y, xx) += gcol * dpy;
                doffsets->plane(n, 2 * (grp * k * k + t) + 1)(y, xx) +=
                    gcol * dpx;
              }
            }
          }
        }
      }
    }
  }
}

// Deformable conv parameters; offsets come in as a second input at the
// application site.
template <typename S>
struct DeformLayer {
  ConvParams<S> p;
  Index groups = 1;
  Tensor4<S> grad_w;
  VecX<S> grad_b;

  void init(Index c_out, Index c_in, Index k, Index g, Rng& rng) {
    groups = g;
    p.weight = Tensor4<S>(c_out, c_in, k, k);
    const double bound = std::sqrt(6.0 / double(c_in * k * k));
    fill_uniform(p.weight, rng, -bound, bound);
    p.bias = VecX<S>::Zero(c_out);
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
struct DeformOp {
  Tensor4<S> cached_x, cached_off;

  Tensor4<S> forward(const DeformLayer<S>& layer, const Tensor4<S>& x,
                     const Tensor4<S>& offsets, bool cache = true) {
    if (cache) {
      cached_x = x;
      cached_off = offsets;
    }
    return deform_conv2d(x, offsets, layer.p, layer.groups);
  }

  // returns (dx, doffsets)
  std::pair<Tensor4<S>, Tensor4<S>> backward(DeformLayer<S>& layer,
                                             const Tensor4<S>& gy) {
    Tensor4<S> dx(cached_x.n(), cached_x.c(), cached_x.h(), cached_x.w());
    Tensor4<S> doff(cached_off.n(), cached_off.c(), cached_off.h(),
                    cached_off.w());
    deform_conv2d_backward(cached_x, cached_off, layer.p, layer.groups, gy,
                           &dx, &doff, layer.grad_w, layer.grad_b);
    return {std::move(dx), std::move(doff)};
  }
};

}  // namespace vdm
