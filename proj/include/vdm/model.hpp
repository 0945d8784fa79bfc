// Full network: shared feature extraction, parallel DfConv alignment and
// attention branches, additive (or concat) integration, indicator-routed
// reconstruction branches, and output assembly that interleaves estimated
// pixels with the observed reference data.
//
// Deinterlacing runs at field resolution throughout; the final weave doubles
// the height. Demosaicing runs at frame resolution and overwrites observed
// CFA samples with the reference values, so known data always survives
// bit-exactly regardless of the parameters.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vdm/align.hpp"
#include "vdm/attention_block.hpp"
#include "vdm/degrade.hpp"

namespace vdm {

enum class FusionMode { Add, Concat };
enum class ReconMode { Separate, Single };

inline std::string to_string(FusionMode m) {
  return m == FusionMode::Add ? "Add" : "Concat";
}
inline std::string to_string(ReconMode m) {
  return m == ReconMode::Separate ? "Separate" : "Single";
}

struct ModelConfig {
  Task task = Task::Deinterlace;
  Index channels = 64;
  Index feature_res_blocks = 5;
  Index align_blocks = 4;
  AlignVariant align_variant = AlignVariant::DfConv;
  AttentionConfig attention;
  FusionMode fusion = FusionMode::Add;
  ReconMode recon_mode = ReconMode::Separate;
  Index recon_depth = 7;
  Index deform_groups = 8;
  std::uint64_t seed = 0;

  Index recon_branches() const {
    if (recon_mode == ReconMode::Single) return 1;
    return task == Task::Deinterlace ? 2 : 3;
  }

  void validate() const {
    if (channels < 1) throw std::invalid_argument("config: channels < 1");
    if (channels % deform_groups != 0)
      throw std::invalid_argument(
          "config: channels must be divisible by deform_groups");
    if (align_blocks != 1 && align_blocks != 4)
      throw std::invalid_argument("config: align_blocks must be 1 or 4");
    if (feature_res_blocks < 0 || recon_depth < 0)
      throw std::invalid_argument("config: negative block count");
    if (attention.variant != AttentionVariant::None) {
      if (attention.k < 1) throw std::invalid_argument("config: k < 1");
      if (attention.variant == AttentionVariant::EkSA &&
          attention.k > channels)
        throw std::invalid_argument("config: EkSA needs k <= channels");
    }
  }
};

// Branch names follow the indicator they serve.
inline std::string recon_branch_name(const ModelConfig& cfg, Index branch) {
  if (cfg.recon_mode == ReconMode::Single) return "single";
  if (cfg.task == Task::Deinterlace) return branch == 0 ? "e" : "o";
  return branch == 0 ? "r" : branch == 1 ? "g" : "b";
}

inline Index branch_for_indicator(const ModelConfig& cfg, IndicatorFlag f) {
  const bool field_flag =
      f == IndicatorFlag::EvenField || f == IndicatorFlag::OddField;
  if ((cfg.task == Task::Deinterlace) != field_flag)
    throw std::invalid_argument("indicator " + to_string(f) +
                                " inconsistent with task " +
                                to_string(cfg.task));
  if (cfg.recon_mode == ReconMode::Single) return 0;
  switch (f) {
    case IndicatorFlag::EvenField: return 0;
    case IndicatorFlag::OddField: return 1;
    case IndicatorFlag::ChannelR: return 0;
    case IndicatorFlag::ChannelG: return 1;
    case IndicatorFlag::ChannelB: return 2;
  }
  return 0;
}

template <typename S>
Tensor4<S> clamp01(const Tensor4<S>& x) {
  Tensor4<S> y = x;
  y.flat() = y.flat().max(S(0)).min(S(1));
  return y;
}

// Interleave the estimated pixels with the observed reference data.
// Deinterlace: recon_rgb is the estimated field (indicator parity); the
// reference field keeps its rows bit-exactly. Demosaic: observed CFA sample
// positions are overwritten with the reference values.
template <typename S>
Tensor4<S> assemble_output(const Tensor4<S>& recon_rgb,
                           const Tensor4<S>& reference, IndicatorFlag flag,
                           Task task, CfaPattern pattern = CfaPattern::RGGB,
                           bool clamp = true) {
  Tensor4<S> est = clamp ? clamp01(recon_rgb) : recon_rgb;
  if (task == Task::Deinterlace) {
    const FieldParity est_parity = flag == IndicatorFlag::EvenField
                                       ? FieldParity::Even
                                       : FieldParity::Odd;
    return weave(reference, est, opposite(est_parity));
  }
  check_same_shape(recon_rgb, reference, "assemble_output");
  for (Index n = 0; n < est.n(); ++n)
    for (Index y = 0; y < est.h(); ++y)
      for (Index x = 0; x < est.w(); ++x) {
        const Index c = cfa_channel_at(pattern, y, x);
        est(n, c, y, x) = reference(n, c, y, x);
      }
  return est;
}

template <typename S>
class Model {
 public:
  ModelConfig cfg;
  FeatureExtractor<S> feat;
  AlignStage<S> align;
  LocalFusion<S> local_fusion;
  EksaBlock<S> attn;
  ConvLayer<S> concat_fuse;
  ConvOp<S> concat_fuse_op;
  std::vector<std::vector<ResLayer<S>>> recon;  // [branch][depth]
  std::vector<std::vector<ResOp<S>>> recon_ops;
  ConvLayer<S> conv_out;
  ConvOp<S> conv_out_op;

  explicit Model(const ModelConfig& config) : cfg(config) {
    cfg.validate();
    Rng rng(cfg.seed);
    feat.init(cfg.channels, cfg.feature_res_blocks, rng);
    align.init(cfg.channels, cfg.deform_groups, cfg.align_blocks,
               cfg.align_variant, rng);
    local_fusion.init(cfg.channels, rng);
    if (cfg.attention.variant != AttentionVariant::None)
      attn.init(cfg.channels, cfg.attention, rng);
    if (cfg.fusion == FusionMode::Concat)
      concat_fuse.init(cfg.channels, 2 * cfg.channels, 1, rng, false);
    recon.resize(size_t(cfg.recon_branches()));
    recon_ops.resize(recon.size());
    for (auto& branch : recon) {
      branch.resize(size_t(cfg.recon_depth));
      for (auto& r : branch) r.init(cfg.channels, 3, rng);
    }
    for (auto& ops : recon_ops) ops.resize(size_t(cfg.recon_depth));
    conv_out.init(3, cfg.channels, 3, rng, false);
  }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    feat.collect("feat", out);
    align.collect("align", out);
    local_fusion.collect("fuse.local", out);
    if (cfg.attention.variant != AttentionVariant::None)
      attn.collect("attn", out);
    if (cfg.fusion == FusionMode::Concat)
      concat_fuse.collect("fuse.concat", out);
    for (size_t b = 0; b < recon.size(); ++b)
      for (size_t d = 0; d < recon[b].size(); ++d)
        recon[b][d].collect(
            "recon." + recon_branch_name(cfg, Index(b)) + ".res" +
                std::to_string(d),
            out);
    conv_out.collect("out", out);
    return out;
  }

  Index param_count() {
    return total_param_count(params());
  }

  std::vector<std::pair<std::string, Index>> param_breakdown() {
    std::vector<std::pair<std::string, Index>> rows;
    rows.emplace_back("feature_extractor", feat.param_count());
    rows.emplace_back("alignment", align.param_count());
    rows.emplace_back("local_fusion", local_fusion.param_count());
    if (cfg.attention.variant != AttentionVariant::None)
      rows.emplace_back("attention", attn.param_count());
    if (cfg.fusion == FusionMode::Concat)
      rows.emplace_back("concat_fusion", concat_fuse.param_count());
    for (size_t b = 0; b < recon.size(); ++b) {
      Index total = 0;
      for (const auto& r : recon[b]) total += r.param_count();
      rows.emplace_back("recon_" + recon_branch_name(cfg, Index(b)), total);
    }
    rows.emplace_back("conv_out", conv_out.param_count());
    return rows;
  }

  // Integrated feature tensor (local branch + attention branch).
  Tensor4<S> integrate(const std::array<Tensor4<S>, 5>& inputs, bool cache) {
    auto feats = feat.forward(inputs, cache);
    auto aligned = align.forward(feats, cache);
    Tensor4<S> local = local_fusion.forward(aligned, cache);
    if (cfg.attention.variant == AttentionVariant::None) return local;
    Tensor4<S> global = attn.forward(inputs, cache);
    if (cfg.fusion == FusionMode::Add) {
      Tensor4<S> integ = local;
      integ.flat() += global.flat();
      return integ;
    }
    Tensor4<S> cat(local.n(), 2 * local.c(), local.h(), local.w());
    for (Index n = 0; n < local.n(); ++n) {
      cat.item_matrix(n).topRows(local.c()) = local.item_matrix(n);
      cat.item_matrix(n).bottomRows(local.c()) = global.item_matrix(n);
    }
    return concat_fuse_op.forward(concat_fuse, cat, cache);
  }

  // Routed reconstruction: selected branch then Conv_out.
  Tensor4<S> reconstruct(const Tensor4<S>& integ, IndicatorFlag flag,
                         bool cache) {
    const Index b = branch_for_indicator(cfg, flag);
    Tensor4<S> f = integ;
    for (size_t d = 0; d < recon[size_t(b)].size(); ++d)
      f = recon_ops[size_t(b)][d].forward(recon[size_t(b)][d], f, cache);
    return conv_out_op.forward(conv_out, f, cache);
  }

  // Full forward to an assembled frame; the unclamped training path keeps
  // the loss gradient alive on estimated pixels.
  Tensor4<S> forward(const std::array<Tensor4<S>, 5>& inputs,
                     IndicatorFlag flag, CfaPattern pattern = CfaPattern::RGGB,
                     bool training = false) {
    validate_inputs(inputs);
    cached_flag_ = flag;
    cached_pattern_ = pattern;
    cached_reference_ = inputs[2];
    Tensor4<S> integ = integrate(inputs, training);
    Tensor4<S> rgb = reconstruct(integ, flag, training);
    return assemble_output(rgb, inputs[2], flag, cfg.task, pattern,
                           /*clamp=*/!training);
  }

  // Backward from the gradient of the assembled frame. Gradients on observed
  // (reference) pixels are discarded; they are constants of the forward map.
  void backward(const Tensor4<S>& dframe) {
    Tensor4<S> drgb = disassemble_grad(dframe);
    const Index b = branch_for_indicator(cfg, cached_flag_);
    Tensor4<S> g = conv_out_op.backward(conv_out, drgb);
    for (size_t d = recon[size_t(b)].size(); d-- > 0;)
      g = recon_ops[size_t(b)][d].backward(recon[size_t(b)][d], g);
    // integration
    Tensor4<S> dlocal;
    if (cfg.attention.variant == AttentionVariant::None) {
      dlocal = std::move(g);
    } else if (cfg.fusion == FusionMode::Add) {
      attn.backward(g);
      dlocal = std::move(g);
    } else {
      Tensor4<S> dcat = concat_fuse_op.backward(concat_fuse, g);
      dlocal = Tensor4<S>(dcat.n(), dcat.c() / 2, dcat.h(), dcat.w());
      Tensor4<S> dglobal = dlocal;
      for (Index n = 0; n < dcat.n(); ++n) {
        dlocal.item_matrix(n) = dcat.item_matrix(n).topRows(dlocal.c());
        dglobal.item_matrix(n) = dcat.item_matrix(n).bottomRows(dlocal.c());
      }
      attn.backward(dglobal);
    }
    auto daligned = local_fusion.backward(dlocal);
    auto dfeats = align.backward(daligned);
    for (Index i = 0; i < 5; ++i) feat.backward_one(dfeats[i], i);
  }

  void zero_grads() {
    auto ps = params();
    vdm::zero_grads(ps);
  }

 private:
  IndicatorFlag cached_flag_ = IndicatorFlag::EvenField;
  CfaPattern cached_pattern_ = CfaPattern::RGGB;
  Tensor4<S> cached_reference_;

  void validate_inputs(const std::array<Tensor4<S>, 5>& inputs) const {
    for (const auto& p : inputs) {
      if (p.c() != 3)
        throw std::invalid_argument("forward: inputs must have 3 channels");
      check_same_shape(inputs[0], p, "forward");
    }
  }

  Tensor4<S> disassemble_grad(const Tensor4<S>& dframe) const {
    if (cfg.task == Task::Demosaic) {
      Tensor4<S> drgb = dframe;
      for (Index n = 0; n < drgb.n(); ++n)
        for (Index y = 0; y < drgb.h(); ++y)
          for (Index x = 0; x < drgb.w(); ++x)
            drgb(n, cfa_channel_at(cached_pattern_, y, x), y, x) = S(0);
      return drgb;
    }
    const FieldParity est_parity = cached_flag_ == IndicatorFlag::EvenField
                                       ? FieldParity::Even
                                       : FieldParity::Odd;
    const Index r0 = first_row(est_parity);
    Tensor4<S> drgb(dframe.n(), 3, dframe.h() / 2, dframe.w());
    for (Index n = 0; n < dframe.n(); ++n)
      for (Index c = 0; c < 3; ++c)
        for (Index y = 0; y < drgb.h(); ++y)
          drgb.plane(n, c).row(y) = dframe.plane(n, c).row(r0 + 2 * y);
    return drgb;
  }
};

// Builds a model and reports its exact parameter count.
template <typename S>
std::pair<Model<S>, Index> build_model(const ModelConfig& cfg) {
  Model<S> m(cfg);
  Index count = m.param_count();
  return {std::move(m), count};
}

// Inference-time frame reconstruction. Deinterlacing reconstructs the
// missing field of picture N; demosaicing runs all three channel branches on
// the shared integrated features and interleaves each branch's own channel
// plane before the observed-sample overwrite.
template <typename S>
Tensor4<S> predict_frame(Model<S>& model,
                         const std::array<Tensor4<S>, 5>& inputs,
                         IndicatorFlag flag,
                         CfaPattern pattern = CfaPattern::RGGB) {
  if (model.cfg.task == Task::Deinterlace)
    return model.forward(inputs, flag, pattern, /*training=*/false);
  Tensor4<S> integ = model.integrate(inputs, /*cache=*/false);
  const auto& ref = inputs[2];
  Tensor4<S> combined(ref.n(), 3, ref.h(), ref.w());
  const std::array<IndicatorFlag, 3> flags{IndicatorFlag::ChannelR,
                                           IndicatorFlag::ChannelG,
                                           IndicatorFlag::ChannelB};
  for (Index c = 0; c < 3; ++c) {
    Tensor4<S> rgb = model.reconstruct(integ, flags[size_t(c)],
                                       /*cache=*/false);
    for (Index n = 0; n < ref.n(); ++n)
      combined.plane(n, c) = rgb.plane(n, c);
  }
  return assemble_output(combined, ref, flags[1], Task::Demosaic, pattern,
                         /*clamp=*/true);
}

}  // namespace vdm
