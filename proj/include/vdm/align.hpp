// Local branch: per-picture feature extraction (Conv_1 + shared residual
// blocks) and alignment of each supporting picture to the reference through
// DfConv blocks. A DfConv block runs two deformable layers on the supporting
// features; the first layer's offsets are projected from the reference
// features, the second layer's from the refined intermediate result. The
// offset projections are zero-initialized so the whole alignment path starts
// out as a plain convolution pipeline.
//
// Variants: DfConv (Df, Conv+ReLU, Df), Df (no middle conv), DfRes (DfConv
// plus a residual connection from the supporting features).
#pragma once

#include <array>
#include <string>
#include <vector>

#include "vdm/conv.hpp"
#include "vdm/deform.hpp"

namespace vdm {

enum class AlignVariant { DfConv, Df, DfRes };

inline std::string to_string(AlignVariant v) {
  switch (v) {
    case AlignVariant::DfConv: return "DfConv";
    case AlignVariant::Df: return "Df";
    case AlignVariant::DfRes: return "DfRes";
  }
  return "?";
}

// Deformable layer whose offsets are projected from a separate source tensor
// by a zero-initialized 3x3 conv.
template <typename S>
struct OffsetDeformLayer {
  ConvLayer<S> offset_proj;  // channels -> 2*3*3*G
  DeformLayer<S> deform;

  void init(Index channels, Index groups, Rng& rng) {
    offset_proj.init(2 * 9 * groups, channels, 3, rng, /*zero_init=*/true);
    deform.init(channels, channels, 3, groups, rng);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    offset_proj.collect(prefix + ".offset", out);
    deform.collect(prefix + ".deform", out);
  }

  Index param_count() const {
    return offset_proj.param_count() + deform.param_count();
  }
};

template <typename S>
struct OffsetDeformOp {
  ConvOp<S> proj;
  DeformOp<S> df;

  Tensor4<S> forward(const OffsetDeformLayer<S>& layer,
                     const Tensor4<S>& offset_src, const Tensor4<S>& x,
                     bool cache = true) {
    Tensor4<S> offsets = proj.forward(layer.offset_proj, offset_src, cache);
    return df.forward(layer.deform, x, offsets, cache);
  }

  // returns (d_offset_src, dx)
  std::pair<Tensor4<S>, Tensor4<S>> backward(OffsetDeformLayer<S>& layer,
                                             const Tensor4<S>& gy) {
    auto [dx, doff] = df.backward(layer.deform, gy);
    Tensor4<S> dsrc = proj.backward(layer.offset_proj, doff);
    return {std::move(dsrc), std::move(dx)};
  }
};

template <typename S>
struct DfConvLayer {
  AlignVariant variant = AlignVariant::DfConv;
  OffsetDeformLayer<S> df1, df2;
  ConvLayer<S> mid;  // unused by the Df variant

  void init(Index channels, Index groups, AlignVariant v, Rng& rng) {
    variant = v;
    df1.init(channels, groups, rng);
    mid.init(channels, channels, 3, rng, false);
    df2.init(channels, groups, rng);
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    df1.collect(prefix + ".df1", out);
    if (variant != AlignVariant::Df) mid.collect(prefix + ".mid", out);
    df2.collect(prefix + ".df2", out);
  }

  Index param_count() const {
    Index total = df1.param_count() + df2.param_count();
    if (variant != AlignVariant::Df) total += mid.param_count();
    return total;
  }
};

template <typename S>
struct DfConvOp {
  OffsetDeformOp<S> o1, o2;
  ConvOp<S> mid;
  ReluOp<S> mid_act;

  Tensor4<S> forward(const DfConvLayer<S>& layer, const Tensor4<S>& fea_ref,
                     const Tensor4<S>& fea_i, bool cache = true) {
    check_same_shape(fea_ref, fea_i, "dfconv_block");
    Tensor4<S> interm = o1.forward(layer.df1, fea_ref, fea_i, cache);
    Tensor4<S> offset_src =
        layer.variant == AlignVariant::Df
            ? interm
            : mid_act.forward(mid.forward(layer.mid, interm, cache), cache);
    Tensor4<S> out = o2.forward(layer.df2, offset_src, fea_i, cache);
    if (layer.variant == AlignVariant::DfRes) out.flat() += fea_i.flat();
    return out;
  }

  // returns (d_fea_ref, d_fea_i)
  std::pair<Tensor4<S>, Tensor4<S>> backward(DfConvLayer<S>& layer,
                                             const Tensor4<S>& gy) {
    auto [dsrc2, dfea_i] = o2.backward(layer.df2, gy);
    Tensor4<S> dinterm = layer.variant == AlignVariant::Df
                             ? std::move(dsrc2)
                             : mid.backward(layer.mid, mid_act.backward(dsrc2));
    auto [dref, dfea_i1] = o1.backward(layer.df1, dinterm);
    dfea_i.flat() += dfea_i1.flat();
    if (layer.variant == AlignVariant::DfRes) dfea_i.flat() += gy.flat();
    return {std::move(dref), std::move(dfea_i)};
  }
};

// Free-function view of the block for tests and oracles.
template <typename S>
Tensor4<S> dfconv_block(const DfConvLayer<S>& layer, const Tensor4<S>& fea_ref,
                        const Tensor4<S>& fea_i) {
  DfConvOp<S> op;
  return op.forward(layer, fea_ref, fea_i, /*cache=*/false);
}

// ---------------------------------------------------------------------------
// Feature extraction: Conv_1 (3 -> channels) + n shared residual blocks,
// applied to each of the five pictures with one parameter set.

template <typename S>
struct FeatureExtractor {
  ConvLayer<S> conv1;
  std::vector<ResLayer<S>> res;
  std::array<ConvOp<S>, 5> conv1_ops;
  std::array<ReluOp<S>, 5> act_ops;
  std::vector<std::array<ResOp<S>, 5>> res_ops;

  void init(Index channels, Index n_blocks, Rng& rng) {
    conv1.init(channels, 3, 3, rng, false);
    res.resize(n_blocks);
    for (auto& r : res) r.init(channels, 3, rng);
    res_ops.resize(n_blocks);
  }

  Tensor4<S> forward_one(const Tensor4<S>& picture, Index slot,
                         bool cache = true) {
    if (picture.c() != 3)
      throw std::invalid_argument(
          "extract_features: pictures must have 3 channels");
    Tensor4<S> f = act_ops[slot].forward(
        conv1_ops[slot].forward(conv1, picture, cache), cache);
    for (size_t b = 0; b < res.size(); ++b)
      f = res_ops[b][slot].forward(res[b], f, cache);
    return f;
  }

  std::array<Tensor4<S>, 5> forward(const std::array<Tensor4<S>, 5>& pictures,
                                    bool cache = true) {
    std::array<Tensor4<S>, 5> out;
    for (Index i = 0; i < 5; ++i) out[i] = forward_one(pictures[i], i, cache);
    return out;
  }

  // gradient w.r.t. the raw pictures is not needed anywhere
  void backward_one(const Tensor4<S>& gy, Index slot) {
    Tensor4<S> g = gy;
    for (size_t b = res.size(); b-- > 0;)
      g = res_ops[b][slot].backward(res[b], g);
    conv1_ops[slot].backward_no_dx(conv1, act_ops[slot].backward(g));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    conv1.collect(prefix + ".conv1", out);
    for (size_t b = 0; b < res.size(); ++b)
      res[b].collect(prefix + ".res" + std::to_string(b), out);
  }

  Index param_count() const {
    Index total = conv1.param_count();
    for (const auto& r : res) total += r.param_count();
    return total;
  }
};

// ---------------------------------------------------------------------------
// Alignment stage: four DfConv application sites over 4 or 1 parameter sets.

template <typename S>
struct AlignStage {
  std::vector<DfConvLayer<S>> blocks;  // size 4 (independent) or 1 (shared)
  std::array<DfConvOp<S>, 4> ops;

  void init(Index channels, Index groups, Index n_blocks, AlignVariant v,
            Rng& rng) {
    if (n_blocks != 1 && n_blocks != 4)
      throw std::invalid_argument("align: align_blocks must be 1 or 4");
    blocks.resize(n_blocks);
    for (auto& b : blocks) b.init(channels, groups, v, rng);
  }

  DfConvLayer<S>& block_for(Index support_slot) {
    return blocks.size() == 4 ? blocks[support_slot] : blocks[0];
  }

  // stack[2] is the reference; it passes through unchanged.
  std::array<Tensor4<S>, 5> forward(const std::array<Tensor4<S>, 5>& stack,
                                    bool cache = true) {
    std::array<Tensor4<S>, 5> out;
    out[2] = stack[2];
    Index slot = 0;
    for (Index i = 0; i < 5; ++i) {
      if (i == 2) continue;
      out[i] = ops[slot].forward(block_for(slot), stack[2], stack[i], cache);
      ++slot;
    }
    return out;
  }

  std::array<Tensor4<S>, 5> backward(const std::array<Tensor4<S>, 5>& gy) {
    std::array<Tensor4<S>, 5> dstack;
    dstack[2] = gy[2];
    Index slot = 0;
    for (Index i = 0; i < 5; ++i) {
      if (i == 2) continue;
      auto [dref, dsup] = ops[slot].backward(block_for(slot), gy[i]);
      dstack[2].flat() += dref.flat();
      dstack[i] = std::move(dsup);
      ++slot;
    }
    return dstack;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    for (size_t b = 0; b < blocks.size(); ++b)
      blocks[b].collect(prefix + ".b" + std::to_string(b), out);
  }

  Index param_count() const {
    Index total = 0;
    for (const auto& b : blocks) total += b.param_count();
    return total;
  }
};

// Stateless free-function view of the alignment stage.
template <typename S>
std::array<Tensor4<S>, 5> align_all(AlignStage<S>& stage,
                                    const std::array<Tensor4<S>, 5>& stack) {
  return stage.forward(stack, /*cache=*/false);
}

// ---------------------------------------------------------------------------
// Local fusion: channel-concatenate the five aligned tensors, 1x1 conv back
// to the working width.

template <typename S>
struct LocalFusion {
  ConvLayer<S> fuse;
  ConvOp<S> op;

  void init(Index channels, Rng& rng) {
    fuse.init(channels, 5 * channels, 1, rng, false);
  }

  Tensor4<S> forward(const std::array<Tensor4<S>, 5>& aligned,
                     bool cache = true) {
    const auto& a0 = aligned[0];
    Tensor4<S> cat(a0.n(), 5 * a0.c(), a0.h(), a0.w());
    for (Index i = 0; i < 5; ++i) {
      check_same_shape(a0, aligned[i], "fuse_local");
      for (Index n = 0; n < a0.n(); ++n)
        cat.item_matrix(n).middleRows(i * a0.c(), a0.c()) =
            aligned[i].item_matrix(n);
    }
    return op.forward(fuse, cat, cache);
  }

  std::array<Tensor4<S>, 5> backward(const Tensor4<S>& gy) {
    Tensor4<S> dcat = op.backward(fuse, gy);
    const Index c = dcat.c() / 5;
    std::array<Tensor4<S>, 5> out;
    for (Index i = 0; i < 5; ++i) {
      out[i] = Tensor4<S>(dcat.n(), c, dcat.h(), dcat.w());
      for (Index n = 0; n < dcat.n(); ++n)
        out[i].item_matrix(n) = dcat.item_matrix(n).middleRows(i * c, c);
    }
    return out;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    fuse.collect(prefix, out);
  }

  Index param_count() const { return fuse.param_count(); }
};

}  // namespace vdm
