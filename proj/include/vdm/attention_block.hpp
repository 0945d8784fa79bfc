// Global branch: the five input pictures are channel-concatenated, mapped by
// two 3x3 convs to the working feature width (the "initial features"), and
// every spatial position becomes one token. Q/K/V come from per-token linear
// maps, the configured attention variant runs on them, and the scaled result
// is added back onto the initial features when the residual connection is
// enabled. With scale initialized to zero the block is exactly the identity
// on its initial features.
#pragma once

#include <array>
#include <vector>

#include "vdm/attention.hpp"
#include "vdm/conv.hpp"

namespace vdm {

template <typename S>
struct LinearLayer {
  LinearParams<S> p;
  MatX<S> grad_w;
  VecX<S> grad_b;

  void init(Index out_f, Index in_f, Rng& rng) {
    p.weight.resize(out_f, in_f);
    const double bound = std::sqrt(6.0 / double(in_f));
    for (Index i = 0; i < out_f; ++i)
      for (Index j = 0; j < in_f; ++j)
        p.weight(i, j) = S(rng.uniform(-bound, bound));
    p.bias = VecX<S>::Zero(out_f);
    grad_w = MatX<S>::Zero(out_f, in_f);
    grad_b = VecX<S>::Zero(out_f);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back(ParamRef<S>{prefix + ".weight",
                              {p.weight.rows(), p.weight.cols()},
                              p.weight.data(), grad_w.data(),
                              p.weight.size()});
    out.push_back(ParamRef<S>{prefix + ".bias",
                              {static_cast<Index>(p.bias.size())},
                              p.bias.data(), grad_b.data(), p.bias.size()});
  }

  Index param_count() const { return p.weight.size() + p.bias.size(); }
};

template <typename S>
struct LinearOp {
  MatX<S> cached_x;

  MatX<S> forward(const LinearLayer<S>& layer, const MatX<S>& x,
                  bool cache = true) {
    if (cache) cached_x = x;
    return linear_apply(x, layer.p);
  }

  MatX<S> backward(LinearLayer<S>& layer, const MatX<S>& gy) {
    layer.grad_w.noalias() += gy.transpose() * cached_x;
    layer.grad_b.matrix() += gy.colwise().sum().transpose();
    return gy * layer.p.weight;
  }
};

// (n_tokens x C) token matrix of one batch item; token t = y*w + x
template <typename S>
MatX<S> to_tokens(const Tensor4<S>& f, Index item) {
  return f.item_matrix(item).transpose();
}

template <typename S>
void from_tokens(const MatX<S>& tokens, Tensor4<S>& f, Index item) {
  f.item_matrix(item) = tokens.transpose();
}

template <typename S>
struct EksaBlock {
  AttentionConfig cfg;
  ConvLayer<S> stem1, stem2;
  ConvOp<S> stem1_op, stem2_op;
  ReluOp<S> stem_act;
  LinearLayer<S> lin_q, lin_k, lin_v, lin_out;
  VecX<S> scale, grad_scale;  // single learnable scalar

  std::vector<LinearOp<S>> q_ops, k_ops, v_ops;
  std::vector<AttentionCore<S>> cores;
  Tensor4<S> cached_initial;
  AttentionStats last_stats;

  void init(Index channels, const AttentionConfig& c, Rng& rng) {
    cfg = c;
    if (cfg.variant == AttentionVariant::EkSA && cfg.k > channels)
      throw std::invalid_argument("attention: EkSA needs k <= channels");
    if (cfg.k < 1) throw std::invalid_argument("attention: k must be >= 1");
    stem1.init(channels, 15, 3, rng, false);
    stem2.init(channels, channels, 3, rng, false);
    lin_q.init(channels, channels, rng);
    lin_k.init(channels, channels, rng);
    lin_v.init(channels, channels, rng);
    lin_out.init(channels, channels, rng);
    scale = VecX<S>::Constant(1, S(cfg.scale_init));
    grad_scale = VecX<S>::Zero(1);
  }

  Tensor4<S> forward(const std::array<Tensor4<S>, 5>& pictures,
                     bool cache = true) {
    if (cfg.variant == AttentionVariant::None)
      throw std::logic_error("eksa_block: variant None must be bypassed");
    const auto& p0 = pictures[0];
    Tensor4<S> cat(p0.n(), 15, p0.h(), p0.w());
    for (Index i = 0; i < 5; ++i) {
      check_same_shape(p0, pictures[i], "eksa_block");
      for (Index n = 0; n < p0.n(); ++n)
        cat.item_matrix(n).middleRows(i * 3, 3) = pictures[i].item_matrix(n);
    }
    Tensor4<S> initial = stem2_op.forward(
        stem2, stem_act.forward(stem1_op.forward(stem1, cat, cache), cache),
        cache);
    if (cache) cached_initial = initial;

    const Index items = initial.n();
    q_ops.assign(items, {});
    k_ops.assign(items, {});
    v_ops.assign(items, {});
    cores.assign(items, {});
    Tensor4<S> out(initial.n(), initial.c(), initial.h(), initial.w());
    for (Index n = 0; n < items; ++n) {
      MatX<S> x = to_tokens(initial, n);
      QKVTriple<S> qkv{q_ops[n].forward(lin_q, x, cache),
                       k_ops[n].forward(lin_k, x, cache),
                       v_ops[n].forward(lin_v, x, cache)};
      cores[n].variant = cfg.variant;
      cores[n].k = cfg.k;
      MatX<S> o = cores[n].forward(qkv, lin_out.p, scale[0]);
      last_stats = cores[n].stats;
      from_tokens(o, out, n);
    }
    if (cfg.residual) out.flat() += initial.flat();
    return out;
  }

  // Gradient w.r.t. the raw input pictures is not propagated (nothing above
  // the block needs it).
  void backward(const Tensor4<S>& gy) {
    Tensor4<S> dinitial(cached_initial.n(), cached_initial.c(),
                        cached_initial.h(), cached_initial.w());
    for (Index n = 0; n < cached_initial.n(); ++n) {
      MatX<S> g = to_tokens(gy, n);
      MatX<S> dq, dk, dv;
      S dscale = S(0);
      cores[n].backward(g, lin_out.p, scale[0], lin_out.grad_w,
                        lin_out.grad_b, dscale, dq, dk, dv);
      grad_scale[0] += dscale;
      MatX<S> dx = q_ops[n].backward(lin_q, dq);
      dx += k_ops[n].backward(lin_k, dk);
      dx += v_ops[n].backward(lin_v, dv);
      from_tokens(dx, dinitial, n);
    }
    if (cfg.residual) dinitial.flat() += gy.flat();
    stem1_op.backward_no_dx(
        stem1, stem_act.backward(stem2_op.backward(stem2, dinitial)));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    stem1.collect(prefix + ".stem1", out);
    stem2.collect(prefix + ".stem2", out);
    lin_q.collect(prefix + ".q", out);
    lin_k.collect(prefix + ".k", out);
    lin_v.collect(prefix + ".v", out);
    lin_out.collect(prefix + ".out", out);
    out.push_back(ParamRef<S>{prefix + ".scale", {1}, scale.data(),
                              grad_scale.data(), 1});
  }

  Index param_count() const {
    return stem1.param_count() + stem2.param_count() + lin_q.param_count() +
           lin_k.param_count() + lin_v.param_count() + lin_out.param_count() +
           1;
  }
};

}  // namespace vdm
