// Fixed forward (degradation) models and their inverse weave: interlacing
// keeps one field per frame with alternating parity, Bayer mosaicing zeroes
// the off-pattern channel samples. Row convention: the odd field is 0-based
// rows {0,2,...} (1-based odd scan lines).
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vdm/rng.hpp"
#include "vdm/tensor.hpp"

namespace vdm {

enum class FieldParity { Odd, Even };

inline FieldParity opposite(FieldParity p) {
  return p == FieldParity::Odd ? FieldParity::Even : FieldParity::Odd;
}

inline std::string to_string(FieldParity p) {
  return p == FieldParity::Odd ? "Odd" : "Even";
}

// first row (0-based) belonging to a parity
inline Index first_row(FieldParity p) {
  return p == FieldParity::Odd ? 0 : 1;
}

enum class CfaPattern { RGGB, BGGR, GRBG, GBRG };

inline std::string to_string(CfaPattern p) {
  switch (p) {
    case CfaPattern::RGGB: return "RGGB";
    case CfaPattern::BGGR: return "BGGR";
    case CfaPattern::GRBG: return "GRBG";
    case CfaPattern::GBRG: return "GBRG";
  }
  return "?";
}

inline CfaPattern cfa_from_string(const std::string& s) {
  if (s == "RGGB" || s == "rggb") return CfaPattern::RGGB;
  if (s == "BGGR" || s == "bggr") return CfaPattern::BGGR;
  if (s == "GRBG" || s == "grbg") return CfaPattern::GRBG;
  if (s == "GBRG" || s == "gbrg") return CfaPattern::GBRG;
  throw std::invalid_argument("unknown CFA pattern id: " + s);
}

// channel sampled at position (y, x): 0=R, 1=G, 2=B
inline Index cfa_channel_at(CfaPattern p, Index y, Index x) {
  const Index ty = y & 1, tx = x & 1;
  switch (p) {
    case CfaPattern::RGGB: return ty == 0 ? (tx == 0 ? 0 : 1) : (tx == 0 ? 1 : 2);
    case CfaPattern::BGGR: return ty == 0 ? (tx == 0 ? 2 : 1) : (tx == 0 ? 1 : 0);
    case CfaPattern::GRBG: return ty == 0 ? (tx == 0 ? 1 : 0) : (tx == 0 ? 2 : 1);
    case CfaPattern::GBRG: return ty == 0 ? (tx == 0 ? 1 : 2) : (tx == 0 ? 0 : 1);
  }
  return 0;
}

enum class IndicatorFlag { EvenField, OddField, ChannelR, ChannelG, ChannelB };

inline std::string to_string(IndicatorFlag f) {
  switch (f) {
    case IndicatorFlag::EvenField: return "EvenField";
    case IndicatorFlag::OddField: return "OddField";
    case IndicatorFlag::ChannelR: return "ChannelR";
    case IndicatorFlag::ChannelG: return "ChannelG";
    case IndicatorFlag::ChannelB: return "ChannelB";
  }
  return "?";
}

enum class Task { Deinterlace, Demosaic };

inline std::string to_string(Task t) {
  return t == Task::Deinterlace ? "Deinterlace" : "Demosaic";
}

// Ground-truth progressive clip; frames is (T, 3, H, W) in [0,1].
template <typename S>
struct ProgressiveClip {
  Tensor4<S> frames;
  std::optional<double> frame_rate;

  Index t() const { return frames.n(); }
  Index height() const { return frames.h(); }
  Index width() const { return frames.w(); }
};

template <typename S>
struct InterlacedSequence {
  Tensor4<S> fields;  // (T, 3, H/2, W)
  std::vector<FieldParity> parities;
  Index source_height = 0;

  FieldParity parity(Index t) const { return parities.at(size_t(t)); }
};

template <typename S>
struct MosaicSequence {
  Tensor4<S> frames;  // (T, 3, H, W), off-pattern samples zero
  CfaPattern pattern = CfaPattern::RGGB;
};

// Optional observation noise of the forward model; defaults to zero.
struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

template <typename S>
void fill_normal_add(Tensor4<S>& t, Rng& rng, double sigma) {
  for (Index i = 0; i < t.size(); ++i)
    t.flat()[i] += S(rng.normal() * sigma);
}

template <typename S>
InterlacedSequence<S> interlace(const ProgressiveClip<S>& clip,
                                FieldParity first_parity,
                                const NoiseSpec& noise = {}) {
  const Index t = clip.t(), h = clip.height(), w = clip.width();
  if (h % 2 != 0)
    throw std::invalid_argument("interlace: frame height must be even");
  if (t < 1) throw std::invalid_argument("interlace: empty clip");
  InterlacedSequence<S> seq;
  seq.source_height = h;
  seq.fields = Tensor4<S>(t, 3, h / 2, w);
  seq.parities.resize(size_t(t));
  FieldParity p = first_parity;
  for (Index i = 0; i < t; ++i) {
    seq.parities[size_t(i)] = p;
    const Index r0 = first_row(p);
    for (Index c = 0; c < 3; ++c)
      for (Index y = 0; y < h / 2; ++y)
        seq.fields.plane(i, c).row(y) = clip.frames.plane(i, c).row(r0 + 2 * y);
    p = opposite(p);
  }
  if (noise.sigma > 0.0) {
    Rng rng(noise.seed);
    fill_normal_add(seq.fields, rng, noise.sigma);
  }
  return seq;
}

template <typename S>
MosaicSequence<S> mosaic(const ProgressiveClip<S>& clip, CfaPattern pattern,
                         const NoiseSpec& noise = {}) {
  const Index t = clip.t(), h = clip.height(), w = clip.width();
  if (h % 2 != 0 || w % 2 != 0)
    throw std::invalid_argument("mosaic: frame dimensions must be even");
  MosaicSequence<S> seq;
  seq.pattern = pattern;
  seq.frames = Tensor4<S>(t, 3, h, w);
  for (Index i = 0; i < t; ++i)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        const Index c = cfa_channel_at(pattern, y, x);
        seq.frames(i, c, y, x) = clip.frames(i, c, y, x);
      }
  if (noise.sigma > 0.0) {
    // noise only on sampled positions so off-pattern zeros stay structural
    Rng rng(noise.seed);
    Tensor4<S> v(t, 3, h, w);
    fill_normal(v, rng, noise.sigma);
    for (Index i = 0; i < t; ++i)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const Index c = cfa_channel_at(pattern, y, x);
          seq.frames(i, c, y, x) += v(i, c, y, x);
        }
  }
  return seq;
}

// Interleaves a known field with an estimated complementary field.
// known_field/estimated_field are (N, 3, H/2, W).
template <typename S>
Tensor4<S> weave(const Tensor4<S>& known_field,
                 const Tensor4<S>& estimated_field, FieldParity known_parity) {
  check_same_shape(known_field, estimated_field, "weave");
  const Index n = known_field.n(), c = known_field.c();
  const Index hf = known_field.h(), w = known_field.w();
  Tensor4<S> frame(n, c, 2 * hf, w);
  const Index rk = first_row(known_parity);
  const Index re = 1 - rk;
  for (Index i = 0; i < n; ++i)
    for (Index ch = 0; ch < c; ++ch) {
      auto dst = frame.plane(i, ch);
      auto kf = known_field.plane(i, ch);
      auto ef = estimated_field.plane(i, ch);
      for (Index y = 0; y < hf; ++y) {
        dst.row(rk + 2 * y) = kf.row(y);
        dst.row(re + 2 * y) = ef.row(y);
      }
    }
  return frame;
}

// one frame (1, 3, H, W) sliced out of a (T, 3, H, W) stack
template <typename S>
Tensor4<S> slice_item(const Tensor4<S>& stack, Index t) {
  Tensor4<S> out(1, stack.c(), stack.h(), stack.w());
  out.item_matrix(0) = stack.item_matrix(t);
  return out;
}

inline Index clamp_index(Index i, Index t) {
  return std::max<Index>(0, std::min<Index>(i, t - 1));
}

template <typename S>
struct TrainingWindow {
  std::array<Tensor4<S>, 5> inputs;  // each (1, 3, h, w)
  Tensor4<S> target;                 // ground-truth frame (1, 3, H, W)
  IndicatorFlag indicator;
  Index center = 0;
};

// Five adjacent degraded pictures around N (indices clamped at the sequence
// ends), the ground-truth frame N as target, and the indicator of the data
// to reconstruct. Deinterlacing yields one window (the missing field of
// frame N); demosaicing yields one window per target channel.
template <typename S>
std::vector<TrainingWindow<S>> make_training_windows(
    const InterlacedSequence<S>& seq, const ProgressiveClip<S>& gt, Index n) {
  const Index t = seq.fields.n();
  if (n < 0 || n >= t)
    throw std::out_of_range("make_training_windows: frame index out of range");
  TrainingWindow<S> win;
  for (Index i = 0; i < 5; ++i)
    win.inputs[size_t(i)] = slice_item(seq.fields, clamp_index(n - 2 + i, t));
  win.target = slice_item(gt.frames, n);
  win.indicator = opposite(seq.parity(n)) == FieldParity::Even
                      ? IndicatorFlag::EvenField
                      : IndicatorFlag::OddField;
  win.center = n;
  std::vector<TrainingWindow<S>> out;
  out.push_back(std::move(win));
  return out;
}

template <typename S>
std::vector<TrainingWindow<S>> make_training_windows(
    const MosaicSequence<S>& seq, const ProgressiveClip<S>& gt, Index n) {
  const Index t = seq.frames.n();
  if (n < 0 || n >= t)
    throw std::out_of_range("make_training_windows: frame index out of range");
  std::vector<TrainingWindow<S>> wins;
  for (IndicatorFlag flag : {IndicatorFlag::ChannelR, IndicatorFlag::ChannelG,
                             IndicatorFlag::ChannelB}) {
    TrainingWindow<S> win;
    for (Index i = 0; i < 5; ++i)
      win.inputs[size_t(i)] = slice_item(seq.frames, clamp_index(n - 2 + i, t));
    win.target = slice_item(gt.frames, n);
    win.indicator = flag;
    win.center = n;
    wins.push_back(std::move(win));
  }
  return wins;
}

}  // namespace vdm
