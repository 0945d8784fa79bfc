// Global-feature attention operators on token matrices (n tokens x d
// channels): row-wise softmax, row-wise top-k masking, and the SA / kSA /
// EkSA variants. SA and kSA materialize the n x n weight map; EkSA exchanges
// the multiplication order so the only attention map ever formed is d x d.
// Backward treats the top-k mask as fixed (gradient flows through selected
// entries only, which is what softmax-backward on the masked map yields).
#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "vdm/param.hpp"
#include "vdm/tensor.hpp"

namespace vdm {

enum class AttentionVariant { SA, kSA, EkSA, None };

inline std::string to_string(AttentionVariant v) {
  switch (v) {
    case AttentionVariant::SA: return "SA";
    case AttentionVariant::kSA: return "kSA";
    case AttentionVariant::EkSA: return "EkSA";
    case AttentionVariant::None: return "None";
  }
  return "?";
}

struct AttentionConfig {
  AttentionVariant variant = AttentionVariant::EkSA;
  Index k = 50;          // kSA: over n tokens; EkSA: over the d-wide map rows
  bool residual = true;
  double scale_init = 0.0;
};

// Records the materialized attention-map size of the last call.
struct AttentionStats {
  Index map_rows = 0;
  Index map_cols = 0;
  Index map_elements() const { return map_rows * map_cols; }
};

// kSA materializes n x n; keep it for small inputs and ablations.
inline constexpr Index kMaxDenseTokens = Index(1) << 16;

template <typename S>
MatX<S> softmax_rows(const MatX<S>& y) {
  const S neg_inf = -std::numeric_limits<S>::infinity();
  MatX<S> p(y.rows(), y.cols());
  for (Index i = 0; i < y.rows(); ++i) {
    S m = neg_inf;
    for (Index j = 0; j < y.cols(); ++j) m = std::max(m, y(i, j));
    if (m == neg_inf)
      throw std::invalid_argument("softmax_rows: all-(-inf) row");
    S sum = S(0);
    for (Index j = 0; j < y.cols(); ++j) {
      const S e = std::exp(y(i, j) - m);  // exp(-inf) == 0 exactly
      p(i, j) = e;
      sum += e;
    }
    p.row(i) /= sum;
  }
  return p;
}

// dY from dP given P = softmax_rows(Y); rows with P=0 entries get 0 there.
template <typename S>
MatX<S> softmax_rows_backward(const MatX<S>& p, const MatX<S>& dp) {
  MatX<S> dy(p.rows(), p.cols());
  for (Index i = 0; i < p.rows(); ++i) {
    const S dot = p.row(i).dot(dp.row(i));
    dy.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
  }
  return dy;
}

// Keeps the k largest entries per row, sets the rest to -inf. Ties broken by
// lowest column index.
template <typename S>
MatX<S> topk_mask(const MatX<S>& a, Index k) {
  if (k < 1) throw std::invalid_argument("topk_mask: k must be >= 1");
  if (!a.allFinite())
    throw std::invalid_argument("topk_mask: non-finite input entries");
  if (k >= a.cols()) return a;
  const S neg_inf = -std::numeric_limits<S>::infinity();
  MatX<S> out = MatX<S>::Constant(a.rows(), a.cols(), neg_inf);
  std::vector<Index> idx(a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    std::iota(idx.begin(), idx.end(), Index(0));
    std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(),
                     [&](Index l, Index r) {
                       if (a(i, l) != a(i, r)) return a(i, l) > a(i, r);
                       return l < r;
                     });
    for (Index j = 0; j < k; ++j) out(i, idx[j]) = a(i, idx[j]);
  }
  return out;
}

// Per-token linear map y = x * W^T + b, W is (out x in).
template <typename S>
struct LinearParams {
  MatX<S> weight;
  VecX<S> bias;
};

template <typename S>
MatX<S> linear_apply(const MatX<S>& x, const LinearParams<S>& l) {
  MatX<S> y = x * l.weight.transpose();
  y.rowwise() += l.bias.matrix().transpose();
  return y;
}

template <typename S>
struct QKVTriple {
  MatX<S> q, k, v;  // each n x d

  void validate() const {
    if (q.rows() != k.rows() || q.rows() != v.rows() ||
        q.cols() != k.cols() || q.cols() != v.cols())
      throw std::invalid_argument("QKVTriple: Q/K/V shapes differ");
    if (!q.allFinite() || !k.allFinite() || !v.allFinite())
      throw std::invalid_argument("QKVTriple: non-finite entries");
  }
};

// SA(Q,K,V) = L[softmax(Q K^T) V] * scale
template <typename S>
MatX<S> attention_sa(const QKVTriple<S>& qkv, const LinearParams<S>& l,
                     S scale, AttentionStats* stats = nullptr) {
  qkv.validate();
  const Index n = qkv.q.rows();
  if (n > kMaxDenseTokens)
    throw std::invalid_argument("attention_sa: n exceeds dense-map guard");
  MatX<S> map = qkv.q * qkv.k.transpose();
  if (stats) *stats = {map.rows(), map.cols()};
  map = softmax_rows(map);
  return linear_apply<S>(map * qkv.v, l) * scale;
}

// kSA(Q,K,V) = L[softmax(T_k[Q K^T]) V] * scale
template <typename S>
MatX<S> attention_ksa(const QKVTriple<S>& qkv, Index k,
                      const LinearParams<S>& l, S scale,
                      AttentionStats* stats = nullptr) {
  qkv.validate();
  const Index n = qkv.q.rows();
  if (k > n) throw std::invalid_argument("attention_ksa: k > n tokens");
  if (n > kMaxDenseTokens)
    throw std::invalid_argument("attention_ksa: n exceeds dense-map guard");
  MatX<S> map = qkv.q * qkv.k.transpose();
  if (stats) *stats = {map.rows(), map.cols()};
  map = softmax_rows(topk_mask(map, k));
  return linear_apply<S>(map * qkv.v, l) * scale;
}

// EkSA(Q,K,V) = L[Q softmax(T_k[V^T K])] * scale; the map is d x d.
template <typename S>
MatX<S> attention_eksa(const QKVTriple<S>& qkv, Index k,
                       const LinearParams<S>& l, S scale,
                       AttentionStats* stats = nullptr) {
  qkv.validate();
  const Index d = qkv.q.cols();
  if (k > d) throw std::invalid_argument("attention_eksa: k > d");
  MatX<S> map = qkv.v.transpose() * qkv.k;
  if (stats) *stats = {map.rows(), map.cols()};
  map = softmax_rows(topk_mask(map, k));
  return linear_apply<S>(qkv.q * map, l) * scale;
}

// ---------------------------------------------------------------------------
// Differentiable attention core with cached intermediates. Parameters (the
// output linear map and scale) live in the owning block; this struct only
// propagates gradients.

template <typename S>
struct AttentionCore {
  AttentionVariant variant = AttentionVariant::SA;
  Index k = 0;

  MatX<S> cached_q, cached_k, cached_v;
  MatX<S> cached_probs;  // softmaxed map (n x n or d x d)
  MatX<S> cached_pre_linear;
  AttentionStats stats;

  MatX<S> forward(const QKVTriple<S>& qkv, const LinearParams<S>& l, S scale) {
    qkv.validate();
    cached_q = qkv.q;
    cached_k = qkv.k;
    cached_v = qkv.v;
    switch (variant) {
      case AttentionVariant::SA: {
        MatX<S> map = qkv.q * qkv.k.transpose();
        stats = {map.rows(), map.cols()};
        cached_probs = softmax_rows(map);
        cached_pre_linear = cached_probs * qkv.v;
        break;
      }
      case AttentionVariant::kSA: {
        if (k > qkv.q.rows())
          throw std::invalid_argument("attention_ksa: k > n tokens");
        MatX<S> map = qkv.q * qkv.k.transpose();
        stats = {map.rows(), map.cols()};
        cached_probs = softmax_rows(topk_mask(map, k));
        cached_pre_linear = cached_probs * qkv.v;
        break;
      }
      case AttentionVariant::EkSA: {
        if (k > qkv.q.cols())
          throw std::invalid_argument("attention_eksa: k > d");
        MatX<S> map = qkv.v.transpose() * qkv.k;
        stats = {map.rows(), map.cols()};
        cached_probs = softmax_rows(topk_mask(map, k));
        cached_pre_linear = qkv.q * cached_probs;
        break;
      }
      case AttentionVariant::None:
        throw std::logic_error("AttentionCore: variant None must be bypassed");
    }
    return linear_apply(cached_pre_linear, l) * scale;
  }

  // g is the gradient of the block output; fills dq/dk/dv and accumulates
  // into the linear-map and scale gradients.
  void backward(const MatX<S>& g, const LinearParams<S>& l, S scale,
                MatX<S>& dweight, VecX<S>& dbias, S& dscale, MatX<S>& dq,
                MatX<S>& dk, MatX<S>& dv) {
    const MatX<S> linear_out = linear_apply(cached_pre_linear, l);
    dscale += (g.array() * linear_out.array()).sum();
    const MatX<S> dlin = g * scale;
    dweight.noalias() += dlin.transpose() * cached_pre_linear;
    dbias.matrix() += dlin.colwise().sum().transpose();
    const MatX<S> dpre = dlin * l.weight;
    if (variant == AttentionVariant::EkSA) {
      dq.noalias() = dpre * cached_probs.transpose();
      const MatX<S> dprobs = cached_q.transpose() * dpre;
      const MatX<S> dmap = softmax_rows_backward(cached_probs, dprobs);
      dv.noalias() = cached_k * dmap.transpose();
      dk.noalias() = cached_v * dmap;
    } else {
      const MatX<S> dprobs = dpre * cached_v.transpose();
      dv.noalias() = cached_probs.transpose() * dpre;
      const MatX<S> dmap = softmax_rows_backward(cached_probs, dprobs);
      dq.noalias() = dmap * cached_k;
      dk.noalias() = dmap.transpose() * cached_q;
    }
  }
};

}  // namespace vdm
