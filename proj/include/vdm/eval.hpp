// Quantitative evaluation: PSNR, SSIM (11x11 Gaussian window, sigma 1.5,
// K1=0.01, K2=0.03, per channel, valid region), temporal profiles, and the
// attention-scaling benchmark.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "vdm/attention.hpp"
#include "vdm/degrade.hpp"
#include "vdm/model.hpp"

namespace vdm {

inline constexpr double kPsnrCap = 99.0;

template <typename S>
double psnr(const Tensor4<S>& a, const Tensor4<S>& b, double peak = 1.0) {
  check_same_shape(a, b, "psnr");
  const double mse =
      double((a.flat() - b.flat()).template cast<double>().square().sum()) /
      double(a.size());
  if (mse == 0.0) return kPsnrCap;
  return 10.0 * std::log10(peak * peak / mse);
}

namespace detail {

inline std::vector<double> gaussian_window(Index taps, double sigma) {
  std::vector<double> w(static_cast<size_t>(taps));
  const double c = double(taps - 1) / 2.0;
  double sum = 0;
  for (Index i = 0; i < taps; ++i) {
    w[size_t(i)] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += w[size_t(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// separable valid-mode filtering of an (H x W) plane
inline MatX<double> filter_valid(const MatX<double>& img,
                                 const std::vector<double>& win) {
  const Index t = Index(win.size());
  const Index oh = img.rows() - t + 1, ow = img.cols() - t + 1;
  MatX<double> rows(oh, img.cols());
  for (Index y = 0; y < oh; ++y)
    for (Index x = 0; x < img.cols(); ++x) {
      double acc = 0;
      for (Index i = 0; i < t; ++i) acc += win[size_t(i)] * img(y + i, x);
      rows(y, x) = acc;
    }
  MatX<double> out(oh, ow);
  for (Index y = 0; y < oh; ++y)
    for (Index x = 0; x < ow; ++x) {
      double acc = 0;
      for (Index i = 0; i < t; ++i) acc += win[size_t(i)] * rows(y, x + i);
      out(y, x) = acc;
    }
  return out;
}

}  // namespace detail

template <typename S>
double ssim(const Tensor4<S>& a, const Tensor4<S>& b, double peak = 1.0) {
  check_same_shape(a, b, "ssim");
  constexpr Index taps = 11;
  if (a.h() < taps || a.w() < taps)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  const auto win = detail::gaussian_window(taps, 1.5);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  double total = 0;
  Index planes = 0;
  for (Index n = 0; n < a.n(); ++n)
    for (Index c = 0; c < a.c(); ++c) {
      MatX<double> pa = a.plane(n, c).template cast<double>();
      MatX<double> pb = b.plane(n, c).template cast<double>();
      MatX<double> mu_a = detail::filter_valid(pa, win);
      MatX<double> mu_b = detail::filter_valid(pb, win);
      MatX<double> a2 = detail::filter_valid(pa.cwiseProduct(pa), win);
      MatX<double> b2 = detail::filter_valid(pb.cwiseProduct(pb), win);
      MatX<double> ab = detail::filter_valid(pa.cwiseProduct(pb), win);
      MatX<double> var_a = a2 - mu_a.cwiseProduct(mu_a);
      MatX<double> var_b = b2 - mu_b.cwiseProduct(mu_b);
      MatX<double> cov = ab - mu_a.cwiseProduct(mu_b);
      double plane_sum = 0;
      for (Index y = 0; y < mu_a.rows(); ++y)
        for (Index x = 0; x < mu_a.cols(); ++x) {
          const double num = (2 * mu_a(y, x) * mu_b(y, x) + c1) *
                             (2 * cov(y, x) + c2);
          const double den =
              (mu_a(y, x) * mu_a(y, x) + mu_b(y, x) * mu_b(y, x) + c1) *
              (var_a(y, x) + var_b(y, x) + c2);
          plane_sum += num / den;
        }
      total += plane_sum / double(mu_a.rows() * mu_a.cols());
      ++planes;
    }
  return total / double(planes);
}

enum class ProfileAxis { Horizontal, Vertical };

// Horizontal at row r: (1, 3, T, W); Vertical at column c: (1, 3, T, H).
// Pure gather: every profile pixel equals a source clip pixel.
template <typename S>
Tensor4<S> temporal_profile(const Tensor4<S>& clip, ProfileAxis axis,
                            Index index) {
  const Index t = clip.n();
  if (axis == ProfileAxis::Horizontal) {
    if (index < 0 || index >= clip.h())
      throw std::out_of_range("temporal_profile: row out of range");
    Tensor4<S> out(1, clip.c(), t, clip.w());
    for (Index i = 0; i < t; ++i)
      for (Index c = 0; c < clip.c(); ++c)
        out.plane(0, c).row(i) = clip.plane(i, c).row(index);
    return out;
  }
  if (index < 0 || index >= clip.w())
    throw std::out_of_range("temporal_profile: column out of range");
  Tensor4<S> out(1, clip.c(), t, clip.h());
  for (Index i = 0; i < t; ++i)
    for (Index c = 0; c < clip.c(); ++c)
      out.plane(0, c).row(i) = clip.plane(i, c).col(index).transpose();
  return out;
}

// |a - b| * amplification, clamped to [0,1]; Fig-4-style difference images.
template <typename S>
Tensor4<S> difference_image(const Tensor4<S>& a, const Tensor4<S>& b,
                            double amplification = 10.0) {
  check_same_shape(a, b, "difference_image");
  Tensor4<S> d = a;
  d.flat() = ((a.flat() - b.flat()).abs() * S(amplification)).min(S(1));
  return d;
}

// ---------------------------------------------------------------------------
// Whole-sequence evaluation through a frame-reconstruction callback. The
// callback seam lets tests inject an identity stub where the model would be.

template <typename S>
using FrameReconFn = std::function<Tensor4<S>(
    const std::array<Tensor4<S>, 5>& inputs, Index frame)>;

struct FrameScore {
  double psnr = 0, ssim = 0;
};

template <typename S>
std::array<Tensor4<S>, 5> gather_window(const Tensor4<S>& pictures, Index n) {
  std::array<Tensor4<S>, 5> inputs;
  for (Index i = 0; i < 5; ++i)
    inputs[size_t(i)] = slice_item(pictures, clamp_index(n - 2 + i,
                                                         pictures.n()));
  return inputs;
}

// Evaluates every reconstructable frame of one degraded clip against ground
// truth; windows at the sequence ends use clamped (replicated) indices.
template <typename S>
std::vector<FrameScore> evaluate_frames(const Tensor4<S>& degraded_pictures,
                                        const ProgressiveClip<S>& gt,
                                        const FrameReconFn<S>& recon) {
  if (gt.t() != degraded_pictures.n())
    throw std::invalid_argument("evaluate: ground-truth frame count mismatch");
  std::vector<FrameScore> scores;
  for (Index n = 0; n < gt.t(); ++n) {
    Tensor4<S> out = recon(gather_window(degraded_pictures, n), n);
    Tensor4<S> ref = slice_item(gt.frames, n);
    scores.push_back({psnr(out, ref), ssim(out, ref)});
  }
  return scores;
}

// Model-backed reconstruction callbacks.
template <typename S>
FrameReconFn<S> model_recon_fn(Model<S>& model,
                               const InterlacedSequence<S>& seq) {
  return [&model, &seq](const std::array<Tensor4<S>, 5>& inputs, Index n) {
    const IndicatorFlag flag = opposite(seq.parity(n)) == FieldParity::Even
                                   ? IndicatorFlag::EvenField
                                   : IndicatorFlag::OddField;
    return predict_frame(model, inputs, flag);
  };
}

template <typename S>
FrameReconFn<S> model_recon_fn(Model<S>& model, const MosaicSequence<S>& seq) {
  const CfaPattern pattern = seq.pattern;
  return [&model, pattern](const std::array<Tensor4<S>, 5>& inputs, Index) {
    return predict_frame(model, inputs, IndicatorFlag::ChannelG, pattern);
  };
}

// ---------------------------------------------------------------------------
// Attention scaling benchmark: wall time and materialized map size per
// variant as the token count grows.

struct BenchRow {
  std::string variant;
  Index n = 0;
  double seconds = 0;
  Index map_elements = 0;
  bool skipped = false;
};

inline std::vector<BenchRow> attention_benchmark(
    const std::vector<Index>& token_counts, Index d = 64, Index reps = 3,
    Index k = 50, std::uint64_t seed = 0) {
  std::vector<BenchRow> rows;
  Rng rng(seed);
  for (Index n : token_counts) {
    MatX<float> q(n, d), kk(n, d), v(n, d);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j) {
        q(i, j) = float(rng.uniform(-1, 1));
        kk(i, j) = float(rng.uniform(-1, 1));
        v(i, j) = float(rng.uniform(-1, 1));
      }
    QKVTriple<float> qkv{std::move(q), std::move(kk), std::move(v)};
    LinearParams<float> l;
    l.weight = MatX<float>::Identity(d, d);
    l.bias = VecX<float>::Zero(d);
    for (const std::string variant : {"SA", "kSA", "EkSA"}) {
      BenchRow row{variant, n, 0, 0, false};
      try {
        std::vector<double> times;
        AttentionStats stats;
        for (Index r = 0; r < reps; ++r) {
          const auto t0 = std::chrono::steady_clock::now();
          MatX<float> out;
          if (variant == "SA")
            out = attention_sa(qkv, l, 1.0f, &stats);
          else if (variant == "kSA")
            out = attention_ksa(qkv, std::min(k, n), l, 1.0f, &stats);
          else
            out = attention_eksa(qkv, std::min(k, d), l, 1.0f, &stats);
          const auto t1 = std::chrono::steady_clock::now();
          times.push_back(std::chrono::duration<double>(t1 - t0).count());
          if (out.rows() != n) throw std::logic_error("bench: bad shape");
        }
        std::sort(times.begin(), times.end());
        row.seconds = times[times.size() / 2];
        row.map_elements = stats.map_elements();
      } catch (const std::bad_alloc&) {
        row.skipped = true;  // out of memory: recorded, not fatal
      } catch (const std::invalid_argument&) {
        row.skipped = true;  // e.g. the kSA dense-map guard
      }
      rows.push_back(row);
    }
  }
  return rows;
}

inline std::string bench_csv_header() {
  return "variant,n,seconds,map_elements,skipped";
}

inline std::string to_csv(const BenchRow& r) {
  std::ostringstream os;
  os.precision(9);
  os << r.variant << ',' << r.n << ',' << r.seconds << ',' << r.map_elements
     << ',' << (r.skipped ? 1 : 0);
  return os.str();
}

}  // namespace vdm
