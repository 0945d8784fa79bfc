// Training: composite loss (MSE + 0.1*Charbonnier + lambda_TV * anisotropic
// TV), cosine-annealed Adam, parity/pattern-aware patch cropping, and the
// deterministic training loop. Batch items are processed sequentially with
// gradient accumulation; sample order at iteration i is a pure function of
// (seed, i), which makes checkpoint resume exact.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "vdm/degrade.hpp"
#include "vdm/model.hpp"

namespace vdm {

struct LossWeights {
  double w_mse = 1.0;
  double w_char = 0.1;
  double lambda_tv = 2.0e-3;
  double char_eps = 1.0e-3;
};

template <typename S>
struct LossValue {
  S total = 0, mse = 0, charbonnier = 0, tv = 0;
};

// tv(x) = mean |vertical forward diff| + mean |horizontal forward diff|,
// each mean over its own valid positions (0 when a direction has none).
template <typename S>
S total_variation(const Tensor4<S>& x) {
  double sum_y = 0, sum_x = 0;
  const Index county = x.n() * x.c() * (x.h() - 1) * x.w();
  const Index countx = x.n() * x.c() * x.h() * (x.w() - 1);
  for (Index n = 0; n < x.n(); ++n)
    for (Index c = 0; c < x.c(); ++c) {
      auto p = x.plane(n, c);
      if (x.h() > 1)
        sum_y += (p.bottomRows(x.h() - 1) - p.topRows(x.h() - 1))
                     .cwiseAbs().sum();
      if (x.w() > 1)
        sum_x += (p.rightCols(x.w() - 1) - p.leftCols(x.w() - 1))
                     .cwiseAbs().sum();
    }
  S tv = 0;
  if (county > 0) tv += S(sum_y / double(county));
  if (countx > 0) tv += S(sum_x / double(countx));
  return tv;
}

template <typename S>
LossValue<S> loss(const Tensor4<S>& pred, const Tensor4<S>& gt,
                  const LossWeights& w = {}) {
  check_same_shape(pred, gt, "loss");
  LossValue<S> v;
  const auto diff = pred.flat() - gt.flat();
  const double m = double(pred.size());
  v.mse = S(diff.square().sum() / m);
  v.charbonnier = S(
      (diff.square() + S(w.char_eps * w.char_eps)).sqrt().sum() / m);
  v.tv = total_variation(pred);
  v.total = S(w.w_mse) * v.mse + S(w.w_char) * v.charbonnier +
            S(w.lambda_tv) * v.tv;
  return v;
}

template <typename S>
Tensor4<S> loss_backward(const Tensor4<S>& pred, const Tensor4<S>& gt,
                         const LossWeights& w = {}) {
  check_same_shape(pred, gt, "loss");
  const double m = double(pred.size());
  Tensor4<S> d(pred.n(), pred.c(), pred.h(), pred.w());
  const auto diff = pred.flat() - gt.flat();
  d.flat() = S(w.w_mse) * S(2.0 / m) * diff +
             S(w.w_char / m) * diff /
                 (diff.square() + S(w.char_eps * w.char_eps)).sqrt();
  const Index county = pred.n() * pred.c() * (pred.h() - 1) * pred.w();
  const Index countx = pred.n() * pred.c() * pred.h() * (pred.w() - 1);
  for (Index n = 0; n < pred.n(); ++n)
    for (Index c = 0; c < pred.c(); ++c) {
      auto p = pred.plane(n, c);
      auto g = d.plane(n, c);
      if (county > 0) {
        const S wy = S(w.lambda_tv / double(county));
        for (Index y = 0; y + 1 < pred.h(); ++y)
          for (Index x = 0; x < pred.w(); ++x) {
            const S df = p(y + 1, x) - p(y, x);
            const S s = df > S(0) ? S(1) : (df < S(0) ? S(-1) : S(0));
            g(y + 1, x) += wy * s;
            g(y, x) -= wy * s;
          }
      }
      if (countx > 0) {
        const S wx = S(w.lambda_tv / double(countx));
        for (Index y = 0; y < pred.h(); ++y)
          for (Index x = 0; x + 1 < pred.w(); ++x) {
            const S df = p(y, x + 1) - p(y, x);
            const S s = df > S(0) ? S(1) : (df < S(0) ? S(-1) : S(0));
            g(y, x + 1) += wx * s;
            g(y, x) -= wx * s;
          }
      }
    }
  return d;
}

// ---------------------------------------------------------------------------

struct TrainConfig {
  Index iterations = 5000;  // desk default; the paper preset uses 150000
  Index batch_size = 4;     // paper preset: 32 deinterlace / 24 demosaic
  Index patch_h = 64;
  Index patch_w = 80;
  double lr0 = 4e-4;
  double lr_min = 1e-7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double grad_clip = 10.0;
  std::uint64_t seed = 0;
  Index checkpoint_every = 1000;
  FieldParity first_parity = FieldParity::Odd;
  CfaPattern pattern = CfaPattern::RGGB;

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("train: iterations < 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size < 1");
    if (patch_h < 2 || patch_h % 2 != 0 || patch_w < 2)
      throw std::invalid_argument("train: patch_h must be even and >= 2");
  }
};

// Named presets; "desk" is the struct default.
inline TrainConfig paper_train_config(Task task) {
  TrainConfig cfg;
  cfg.iterations = 150000;
  cfg.batch_size = task == Task::Deinterlace ? 32 : 24;
  cfg.checkpoint_every = 10000;
  return cfg;
}

inline double lr_schedule(Index step, const TrainConfig& cfg) {
  if (step < 0 || step > cfg.iterations)
    throw std::out_of_range("lr_schedule: step out of range");
  const double t = double(step) / double(cfg.iterations);
  return cfg.lr_min +
         0.5 * (cfg.lr0 - cfg.lr_min) * (1.0 + std::cos(3.14159265358979323846 * t));
}

// ---------------------------------------------------------------------------

template <typename S>
struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<VecX<S>> m, v;
  std::int64_t steps = 0;

  void init(const std::vector<ParamRef<S>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.push_back(VecX<S>::Zero(p.size));
      v.push_back(VecX<S>::Zero(p.size));
    }
    steps = 0;
  }

  // returns the pre-clip global gradient norm
  double step(std::vector<ParamRef<S>>& params, double lr, double clip_norm) {
    double sq = 0;
    for (const auto& p : params)
      sq += double(Eigen::Map<VecX<S>>(p.grad, p.size).square().sum());
    const double norm = std::sqrt(sq);
    const S scale =
        (clip_norm > 0 && norm > clip_norm) ? S(clip_norm / norm) : S(1);
    ++steps;
    const double bc1 = 1.0 - std::pow(beta1, double(steps));
    const double bc2 = 1.0 - std::pow(beta2, double(steps));
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      Eigen::Map<VecX<S>> g(p.grad, p.size);
      Eigen::Map<VecX<S>> val(p.value, p.size);
      m[i] = S(beta1) * m[i] + S(1.0 - beta1) * (g * scale);
      v[i] = S(beta2) * v[i] + S(1.0 - beta2) * (g * scale).square();
      val -= S(lr) * (m[i] / S(bc1)) /
             ((v[i] / S(bc2)).sqrt() + S(eps));
    }
    return norm;
  }
};

// ---------------------------------------------------------------------------
// Patch sampling. Crops are taken in target-frame space; deinterlacing snaps
// the row origin to even so field parity is preserved, demosaicing snaps row
// and column so the Bayer phase is preserved.

struct PatchOrigin {
  Index y0 = 0, x0 = 0;
};

inline PatchOrigin snap_origin(Task task, PatchOrigin o) {
  o.y0 -= o.y0 % 2;
  if (task == Task::Demosaic) o.x0 -= o.x0 % 2;
  return o;
}

inline PatchOrigin random_patch_origin(Task task, Index frame_h, Index frame_w,
                                       Index ph, Index pw, Rng& rng) {
  if (ph > frame_h || pw > frame_w)
    throw std::invalid_argument("sample_patch: picture smaller than patch");
  PatchOrigin o;
  o.y0 = Index(rng.uniform_int(0, frame_h - ph));
  o.x0 = Index(rng.uniform_int(0, frame_w - pw));
  return snap_origin(task, o);
}

template <typename S>
Tensor4<S> crop(const Tensor4<S>& t, Index y0, Index x0, Index h, Index w) {
  if (y0 < 0 || x0 < 0 || y0 + h > t.h() || x0 + w > t.w())
    throw std::invalid_argument("crop: out of bounds");
  Tensor4<S> out(t.n(), t.c(), h, w);
  for (Index n = 0; n < t.n(); ++n)
    for (Index c = 0; c < t.c(); ++c)
      out.plane(n, c) = t.plane(n, c).block(y0, x0, h, w);
  return out;
}

// One spatial crop applied consistently to the five inputs and the target.
template <typename S>
TrainingWindow<S> sample_patch(const TrainingWindow<S>& win, Task task,
                               Index ph, Index pw, PatchOrigin origin) {
  origin = snap_origin(task, origin);
  TrainingWindow<S> out;
  out.indicator = win.indicator;
  out.center = win.center;
  out.target = crop(win.target, origin.y0, origin.x0, ph, pw);
  for (size_t i = 0; i < 5; ++i) {
    if (task == Task::Deinterlace)
      out.inputs[i] = crop(win.inputs[i], origin.y0 / 2, origin.x0, ph / 2, pw);
    else
      out.inputs[i] = crop(win.inputs[i], origin.y0, origin.x0, ph, pw);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training loop over in-memory ground-truth clips; degradation is synthesized
// once per clip with the fixed forward model (noise off).

template <typename S>
struct TrainDataset {
  std::vector<ProgressiveClip<S>> clips;
};

struct TrainLogRow {
  Index iter = 0;
  double loss = 0, mse = 0, charbonnier = 0, tv = 0, lr = 0;
};

inline std::string train_log_csv_header() { return "iter,loss,mse,char,tv,lr"; }

inline std::string to_csv(const TrainLogRow& r) {
  std::ostringstream os;
  os.precision(9);
  os << r.iter << ',' << r.loss << ',' << r.mse << ',' << r.charbonnier << ','
     << r.tv << ',' << r.lr;
  return os.str();
}

// Thrown when the loss goes non-finite; carries the offending batch windows.
struct TrainAbort : std::runtime_error {
  explicit TrainAbort(const std::string& what) : std::runtime_error(what) {}
};

template <typename S>
struct Trainer {
  Model<S>& model;
  TrainConfig cfg;
  LossWeights weights;
  Adam<S> opt;
  Rng master;  // advanced once per iteration; its state is checkpointed
  Index iteration = 0;

  // flattened window descriptors over the degraded dataset
  struct WindowId {
    Index clip = 0, frame = 0, sub = 0;  // sub = channel slot for demosaic
  };
  std::vector<WindowId> window_ids;
  std::vector<InterlacedSequence<S>> interlaced;
  std::vector<MosaicSequence<S>> mosaics;
  const TrainDataset<S>* data = nullptr;

  Trainer(Model<S>& m, const TrainConfig& c) : model(m), cfg(c), master(c.seed) {
    cfg.validate();
    auto params = model.params();
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.init(params);
  }

  void attach(const TrainDataset<S>& dataset) {
    data = &dataset;
    if (dataset.clips.empty())
      throw std::invalid_argument("train: dataset is empty");
    window_ids.clear();
    interlaced.clear();
    mosaics.clear();
    for (Index ci = 0; ci < Index(dataset.clips.size()); ++ci) {
      const auto& clip = dataset.clips[size_t(ci)];
      if (model.cfg.task == Task::Deinterlace) {
        interlaced.push_back(interlace(clip, cfg.first_parity));
        for (Index n = 0; n < clip.t(); ++n)
          window_ids.push_back({ci, n, 0});
      } else {
        mosaics.push_back(mosaic(clip, cfg.pattern));
        for (Index n = 0; n < clip.t(); ++n)
          for (Index s = 0; s < 3; ++s) window_ids.push_back({ci, n, s});
      }
    }
  }

  TrainingWindow<S> materialize(const WindowId& id) const {
    const auto& clip = data->clips[size_t(id.clip)];
    if (model.cfg.task == Task::Deinterlace)
      return make_training_windows(interlaced[size_t(id.clip)], clip,
                                   id.frame)[0];
    return make_training_windows(mosaics[size_t(id.clip)], clip,
                                 id.frame)[size_t(id.sub)];
  }

  // One optimization step; returns the averaged loss components.
  TrainLogRow step() {
    Rng rng(master_draw());  // iteration stream, pure function of (seed, i)
    auto params = model.params();
    zero_grads(params);
    TrainLogRow row;
    row.iter = iteration;
    std::vector<WindowId> batch;
    for (Index b = 0; b < cfg.batch_size; ++b) {
      const auto& id = window_ids[size_t(
          rng.uniform_int(0, std::int64_t(window_ids.size()) - 1))];
      batch.push_back(id);
      TrainingWindow<S> win = materialize(id);
      PatchOrigin origin = random_patch_origin(
          model.cfg.task, win.target.h(), win.target.w(), cfg.patch_h,
          cfg.patch_w, rng);
      win = sample_patch(win, model.cfg.task, cfg.patch_h, cfg.patch_w, origin);
      Tensor4<S> out = model.forward(win.inputs, win.indicator, cfg.pattern,
                                     /*training=*/true);
      LossValue<S> l = loss(out, win.target, weights);
      if (!std::isfinite(double(l.total))) {
        std::ostringstream os;
        os << "non-finite loss at iteration " << iteration << "; batch:";
        for (const auto& bd : batch)
          os << " (clip " << bd.clip << ", frame " << bd.frame << ", sub "
             << bd.sub << ')';
        throw TrainAbort(os.str());
      }
      row.loss += double(l.total) / double(cfg.batch_size);
      row.mse += double(l.mse) / double(cfg.batch_size);
      row.charbonnier += double(l.charbonnier) / double(cfg.batch_size);
      row.tv += double(l.tv) / double(cfg.batch_size);
      Tensor4<S> dout = loss_backward(out, win.target, weights);
      dout.flat() *= S(1.0 / double(cfg.batch_size));
      model.backward(dout);
    }
    row.lr = lr_schedule(iteration, cfg);
    opt.step(params, row.lr, cfg.grad_clip);
    ++iteration;
    return row;
  }

 private:
  std::uint64_t master_draw() {
    // one engine draw per iteration keeps the checkpointed state meaningful
    return std::uint64_t(master.uniform_int(0, std::int64_t(1) << 62));
  }
};

}  // namespace vdm
