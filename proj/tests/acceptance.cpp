// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Runs everything at the tolerances stated below; prints the
// parameter-count reconciliation table and the attention benchmark rows as
// evidence next to their criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "vdm/checkpoint.hpp"
#include "vdm/cli.hpp"
#include "vdm/dataset.hpp"
#include "vdm/eval.hpp"
#include "vdm/gradcheck.hpp"
#include "vdm/model.hpp"
#include "vdm/train.hpp"

using namespace vdm;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool pass,
            const std::string& detail = "") {
  std::printf("[%s] criterion %2d: %s%s%s\n", pass ? "PASS" : "FAIL",
              criterion, name.c_str(), detail.empty() ? "" : " -- ",
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

MatX<double> random_mat(Index r, Index c, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
  MatX<double> m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

ConvParams<double> random_conv_params_d(Index co, Index ci, Index k, Rng& rng) {
  ConvParams<double> p;
  p.weight = Tensor4d(co, ci, k, k);
  fill_uniform(p.weight, rng, -0.5, 0.5);
  p.bias = VecX<double>::Zero(co);
  for (Index i = 0; i < co; ++i) p.bias[i] = rng.uniform(-0.2, 0.2);
  return p;
}

ConvParams<float> random_conv_params_f(Index co, Index ci, Index k, Rng& rng) {
  ConvParams<float> p;
  p.weight = Tensor4f(co, ci, k, k);
  fill_uniform(p.weight, rng, -0.5, 0.5);
  p.bias = VecX<float>::Zero(co);
  for (Index i = 0; i < co; ++i) p.bias[i] = float(rng.uniform(-0.2, 0.2));
  return p;
}

// ---------------------------------------------------------------------------

void criterion1_deform_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  Rng rng(101);
  // zero-offset equivalence over 100 random (input, weight) pairs
  for (int trial = 0; trial < 100 && pass; ++trial) {
    const Index ci = 1 + trial % 5;
    const Index co = 1 + (trial / 3) % 4;
    const Index g = (ci % 2 == 0 && trial % 3 == 0) ? 2 : 1;
    Tensor4f x(1, ci, 7, 6);
    fill_uniform(x, rng, -1.0, 1.0);
    auto p = random_conv_params_f(co, ci, 3, rng);
    Tensor4f off(1, 2 * 9 * g, 7, 6);
    if (max_abs_diff(deform_conv2d(x, off, p, g), conv2d(x, p)) >= 1e-5f)
      pass = false;
  }
  // integer-shift oracle: (dy,dx) = (1,0) with the 1x1 identity kernel
  {
    Tensor4f x(1, 1, 5, 4);
    fill_uniform(x, rng, 0.0, 1.0);
    ConvParams<float> p;
    p.weight = Tensor4f(1, 1, 1, 1);
    p.weight(0, 0, 0, 0) = 1.0f;
    p.bias = VecX<float>::Zero(1);
    Tensor4f off(1, 2, 5, 4);
    off.plane(0, 0).setConstant(1.0f);
    Tensor4f y = deform_conv2d(x, off, p, 1);
    for (Index r = 0; r < 5; ++r)
      for (Index c = 0; c < 4; ++c) {
        const float want = r + 1 < 5 ? x(0, 0, r + 1, c) : 0.0f;
        if (std::abs(y(0, 0, r, c) - want) > 1e-6f) pass = false;
      }
  }
  // half-pixel bilinear oracle on a vertical ramp
  {
    Tensor4f x(1, 1, 6, 5);
    for (Index r = 0; r < 6; ++r) x.plane(0, 0).row(r).setConstant(float(r));
    ConvParams<float> p;
    p.weight = Tensor4f(1, 1, 1, 1);
    p.weight(0, 0, 0, 0) = 1.0f;
    p.bias = VecX<float>::Zero(1);
    Tensor4f off(1, 2, 6, 5);
    off.plane(0, 0).setConstant(0.5f);
    Tensor4f y = deform_conv2d(x, off, p, 1);
    for (Index r = 0; r + 1 < 6; ++r)
      for (Index c = 0; c < 5; ++c)
        if (std::abs(y(0, 0, r, c) - (float(r) + 0.5f)) > 1e-6f) pass = false;
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "100 pairs + shift + bilinear, %.1fs",
                seconds_since(t0));
  report(1, "deformable-conv oracles", pass, detail);
}

void criterion2_topk_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  Rng rng(102);
  const double ninf = -std::numeric_limits<double>::infinity();
  auto brute = [&](const MatX<double>& a, Index k) {
    MatX<double> out = MatX<double>::Constant(a.rows(), a.cols(), ninf);
    for (Index i = 0; i < a.rows(); ++i) {
      std::vector<std::pair<double, Index>> es;
      for (Index j = 0; j < a.cols(); ++j) es.push_back({a(i, j), j});
      std::stable_sort(es.begin(), es.end(),
                       [](auto& l, auto& r) { return l.first > r.first; });
      for (Index j = 0; j < std::min(k, a.cols()); ++j)
        out(i, es[size_t(j)].second) = es[size_t(j)].first;
    }
    return out;
  };
  for (Index size : {Index(8), Index(64)}) {
    for (int trial = 0; trial < 1000 && pass; ++trial) {
      MatX<double> a(size, size);
      // draws from a small integer set force tie cases
      for (Index i = 0; i < size; ++i)
        for (Index j = 0; j < size; ++j)
          a(i, j) = double(rng.uniform_int(-4, 4));
      const Index k = 1 + Index(trial) % size;
      if (!(topk_mask(a, k).array() == brute(a, k).array()).all())
        pass = false;
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "1000x 8x8 and 1000x 64x64 with ties, %.1fs",
                seconds_since(t0));
  report(2, "top-k mask equals the full-sort oracle", pass, detail);
}

void criterion3_attention_identities() {
  bool pass = true;
  Rng rng(103);
  // kSA(k=n) == SA to 1e-6 on 100 random triples
  for (int trial = 0; trial < 100 && pass; ++trial) {
    const Index n = 2 + trial % 7, d = 4 + trial % 3;
    QKVTriple<double> qkv{random_mat(n, d, rng), random_mat(n, d, rng),
                          random_mat(n, d, rng)};
    LinearParams<double> l;
    l.weight = random_mat(d, d, rng, -0.5, 0.5);
    l.bias = VecX<double>::Zero(d);
    MatX<double> a = attention_sa(qkv, l, 0.8);
    MatX<double> b = attention_ksa(qkv, n, l, 0.8);
    if ((a - b).cwiseAbs().maxCoeff() >= 1e-6) pass = false;
  }
  // masked rows: exactly k nonzeros summing to 1 +- 1e-6
  {
    MatX<double> logits = random_mat(12, 12, rng, -3.0, 3.0);
    for (Index k = 1; k <= 12 && pass; ++k) {
      MatX<double> p = softmax_rows(topk_mask(logits, k));
      for (Index i = 0; i < 12; ++i) {
        Index nz = 0;
        for (Index j = 0; j < 12; ++j) nz += p(i, j) > 0.0;
        if (nz != k || std::abs(p.row(i).sum() - 1.0) > 1e-6) pass = false;
      }
    }
  }
  // EkSA n=3, d=2 hand oracle, exact
  {
    QKVTriple<double> qkv{MatX<double>(3, 2), MatX<double>(3, 2),
                          MatX<double>(3, 2)};
    qkv.q << 1, 2, 0, 1, 2, 0;
    qkv.k << 1, 0, 0, 1, 1, 1;
    qkv.v << 2, 1, 1, 0, 0, 1;
    LinearParams<double> l;
    l.weight = MatX<double>::Identity(2, 2);
    l.bias = VecX<double>::Zero(2);
    // V^T K = [[2,1],[2,1]]; softmax rows -> [e/(e+1), 1/(e+1)]
    const double e1 = std::exp(1.0);
    MatX<double> probs(2, 2);
    probs << e1 / (e1 + 1), 1 / (e1 + 1), e1 / (e1 + 1), 1 / (e1 + 1);
    MatX<double> want = qkv.q * probs;
    MatX<double> got = attention_eksa(qkv, 2, l, 1.0);
    if ((got - want).cwiseAbs().maxCoeff() > 1e-12) pass = false;
  }
  report(3, "attention identities (kSA(k=n)=SA, row masses, EkSA hand oracle)",
         pass);
}

void criterion4_gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  Rng rng(104);
  double worst = 0;
  auto track = [&](double err) {
    worst = std::max(worst, err);
    if (err >= 1e-3) pass = false;
  };
  // deform_conv2d (inputs, offsets, weights, bias)
  {
    Tensor4d x(1, 4, 6, 6);
    fill_uniform(x, rng, -1.0, 1.0);
    auto p = random_conv_params_d(3, 4, 3, rng);
    Tensor4d off(1, 36, 6, 6);
    for (Index i = 0; i < off.size(); ++i) {
      double v = rng.uniform(-1.4, 1.4);
      const double frac = v - std::floor(v);
      if (frac < 0.1) v += 0.15;
      if (frac > 0.9) v -= 0.15;
      off.flat()[i] = v;
    }
    Tensor4d dx(1, 4, 6, 6), doff(1, 36, 6, 6), dw(3, 4, 3, 3);
    VecX<double> db = VecX<double>::Zero(3);
    Tensor4d ones(1, 3, 6, 6);
    ones.flat().setConstant(1.0);
    deform_conv2d_backward(x, off, p, 2, ones, &dx, &doff, dw, db);
    auto f = [&]() { return deform_conv2d(x, off, p, 2).flat().sum(); };
    std::vector<GradCheckInput<double>> in{
        {x.data(), x.size(), dx.data()},
        {off.data(), off.size(), doff.data()},
        {p.weight.data(), p.weight.size(), dw.data()},
        {p.bias.data(), p.bias.size(), db.data()}};
    track(grad_check<double>(f, in, 1e-4));
  }
  // SA / kSA / EkSA with the fixed-mask convention
  for (auto variant : {AttentionVariant::SA, AttentionVariant::kSA,
                       AttentionVariant::EkSA}) {
    const Index n = 5, d = 4;
    QKVTriple<double> qkv{random_mat(n, d, rng), random_mat(n, d, rng),
                          random_mat(n, d, rng)};
    LinearParams<double> l;
    l.weight = random_mat(d, d, rng, -0.5, 0.5);
    l.bias = VecX<double>::Zero(d);
    double scale = 0.9;
    AttentionCore<double> core;
    core.variant = variant;
    core.k = 2;
    core.forward(qkv, l, scale);
    MatX<double> g = MatX<double>::Ones(n, d);
    MatX<double> dw = MatX<double>::Zero(d, d);
    VecX<double> db = VecX<double>::Zero(d);
    double dscale = 0.0;
    MatX<double> dq, dk, dv;
    core.backward(g, l, scale, dw, db, dscale, dq, dk, dv);
    auto f = [&]() { return core.forward(qkv, l, scale).sum(); };
    std::vector<GradCheckInput<double>> in{
        {qkv.q.data(), n * d, dq.data()},
        {qkv.k.data(), n * d, dk.data()},
        {qkv.v.data(), n * d, dv.data()},
        {l.weight.data(), d * d, dw.data()},
        {l.bias.data(), d, db.data()},
        {&scale, 1, &dscale}};
    track(grad_check<double>(f, in, 1e-5));
  }
  // res_block
  {
    Tensor4d x(1, 3, 5, 5);
    fill_uniform(x, rng, -1.0, 1.0);
    ResBlock<double> rb;
    rb.init(3, 3, rng);
    rb.forward(x);
    Tensor4d ones(1, 3, 5, 5);
    ones.flat().setConstant(1.0);
    Tensor4d dx = rb.backward(ones);
    std::vector<ParamRef<double>> refs;
    rb.collect("rb", refs);
    auto f = [&]() { return rb.forward(x, false).flat().sum(); };
    std::vector<GradCheckInput<double>> in{{x.data(), x.size(), dx.data()}};
    for (auto& r : refs) in.push_back({r.value, r.size, r.grad});
    track(grad_check<double>(f, in, 1e-5));
  }
  // composite loss
  {
    Tensor4d pred(1, 3, 5, 4), gt(1, 3, 5, 4);
    fill_uniform(pred, rng, 0.0, 1.0);
    fill_uniform(gt, rng, 0.0, 1.0);
    LossWeights w;
    Tensor4d d = loss_backward(pred, gt, w);
    auto f = [&]() { return loss(pred, gt, w).total; };
    std::vector<GradCheckInput<double>> in{{pred.data(), pred.size(), d.data()}};
    track(grad_check<double>(f, in, 1e-6));
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "max rel err %.2e, %.1fs", worst,
                seconds_since(t0));
  report(4, "gradient suite (deform, SA/kSA/EkSA, res_block, loss)", pass,
         detail);
}

void criterion5_efficiency() {
  const auto t0 = std::chrono::steady_clock::now();
  auto rows_small = attention_benchmark({1024, 4096}, 64, 3, 50, 105);
  auto rows_large = attention_benchmark({16384}, 64, 1, 50, 106);
  std::vector<BenchRow> rows = rows_small;
  rows.insert(rows.end(), rows_large.begin(), rows_large.end());
  std::printf("    %s\n", bench_csv_header().c_str());
  for (const auto& r : rows) std::printf("    %s\n", to_csv(r).c_str());
  auto find = [&](const std::string& v, Index n) -> const BenchRow* {
    for (const auto& r : rows)
      if (r.variant == v && r.n == n) return &r;
    return nullptr;
  };
  bool map_ok = true;
  for (Index n : {Index(1024), Index(4096), Index(16384)}) {
    const BenchRow* r = find("EkSA", n);
    map_ok = map_ok && r && !r->skipped && r->map_elements == 64 * 64;
  }
  bool growth_ok = false;
  const BenchRow *sa1 = find("SA", 1024), *sa16 = find("SA", 16384);
  const BenchRow *ksa1 = find("kSA", 1024), *ksa16 = find("kSA", 16384);
  const BenchRow *ek1 = find("EkSA", 1024), *ek16 = find("EkSA", 16384);
  char detail[160];
  if (sa1 && sa16 && ek1 && ek16 && ksa1 && ksa16 && !sa16->skipped &&
      !ksa16->skipped && ek1->seconds > 0) {
    const double g_sa = sa16->seconds / sa1->seconds;
    const double g_ksa = ksa16->seconds / ksa1->seconds;
    const double g_ek = ek16->seconds / ek1->seconds;
    growth_ok = g_ek <= 0.5 * g_sa && g_ek <= 0.5 * g_ksa;
    std::snprintf(detail, sizeof(detail),
                  "growth n->16n: SA %.0fx, kSA %.0fx, EkSA %.1fx; map 64x64 "
                  "at all n: %s; %.0fs",
                  g_sa, g_ksa, g_ek, map_ok ? "yes" : "no",
                  seconds_since(t0));
  } else {
    std::snprintf(detail, sizeof(detail), "benchmark cells missing/skipped");
  }
  report(5, "EkSA efficiency (constant map, sub-SA wall-time growth)",
         map_ok && growth_ok, detail);
}

void criterion6_known_data_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  Index trials = 0;
  for (int mi = 0; mi < 20 && pass; ++mi) {
    ModelConfig cfg;
    cfg.task = mi % 2 ? Task::Demosaic : Task::Deinterlace;
    cfg.channels = 8;
    cfg.feature_res_blocks = 1;
    cfg.align_blocks = 1;
    cfg.recon_depth = 1;
    cfg.deform_groups = 2;
    cfg.attention.k = 4;
    cfg.attention.scale_init = 0.2;  // random checkpoints, attention live
    cfg.seed = std::uint64_t(900 + mi);
    Model<float> model(cfg);
    Rng rng(std::uint64_t(1700 + mi));
    for (int ii = 0; ii < 50 && pass; ++ii) {
      std::array<Tensor4f, 5> inputs;
      for (auto& p : inputs) {
        p = Tensor4f(1, 3, 8, 10);
        fill_uniform(p, rng, 0.0, 1.0);
      }
      ++trials;
      if (cfg.task == Task::Deinterlace) {
        const bool even = ii % 2 == 0;
        Tensor4f out = model.forward(
            inputs, even ? IndicatorFlag::EvenField : IndicatorFlag::OddField);
        const Index r0 = even ? 0 : 1;  // reference parity rows
        for (Index c = 0; c < 3 && pass; ++c)
          for (Index y = 0; y < 8 && pass; ++y)
            if (!(out.plane(0, c).row(r0 + 2 * y).array() ==
                  inputs[2].plane(0, c).row(y).array())
                     .all())
              pass = false;
      } else {
        // genuine mosaic inputs
        for (auto& m : inputs)
          for (Index y = 0; y < 8; ++y)
            for (Index x = 0; x < 10; ++x)
              for (Index c = 0; c < 3; ++c)
                if (c != cfa_channel_at(CfaPattern::RGGB, y, x))
                  m(0, c, y, x) = 0;
        Tensor4f out = predict_frame(model, inputs, IndicatorFlag::ChannelG);
        for (Index y = 0; y < 8 && pass; ++y)
          for (Index x = 0; x < 10 && pass; ++x) {
            const Index c = cfa_channel_at(CfaPattern::RGGB, y, x);
            if (out(0, c, y, x) != inputs[2](0, c, y, x)) pass = false;
          }
      }
    }
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "%ld trials bit-exact, %.0fs",
                long(trials), seconds_since(t0));
  report(6, "known-data fidelity end to end", pass, detail);
}

// Smooth pattern translating by one pixel per frame: every frame's missing
// rows/samples are visible in the neighboring pictures, which is exactly the
// redundancy the multi-picture architecture exists to exploit.
ProgressiveClip<float> overfit_clip(Index t, Index h, Index w) {
  ProgressiveClip<float> clip;
  clip.frames = Tensor4f(t, 3, h, w);
  for (Index i = 0; i < t; ++i)
    for (Index c = 0; c < 3; ++c)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const double u = double(x) + double(i);
          const double v =
              0.5 + 0.25 * std::sin(2.0 * M_PI * u / double(w) + 0.4 * c) +
              0.10 * std::cos(2.0 * M_PI * double(y) / double(h) - 0.3 * c);
          clip.frames(i, c, y, x) = float(std::min(1.0, std::max(0.0, v)));
        }
  return clip;
}

ModelConfig acceptance_toy_config(Task task) {
  // the pinned toy shape: 16 channels, 1 align block, recon depth 2
  ModelConfig cfg;
  cfg.task = task;
  cfg.channels = 16;
  cfg.feature_res_blocks = 2;
  cfg.align_blocks = 1;
  cfg.recon_depth = 2;
  cfg.deform_groups = 2;
  cfg.attention.k = 8;
  cfg.seed = 777;
  return cfg;
}

double overfit_psnr(Task task, Index iterations) {
  Model<float> model(acceptance_toy_config(task));
  TrainDataset<float> ds;
  ds.clips.push_back(overfit_clip(10, 24, 32));
  TrainConfig tc;
  tc.iterations = iterations;
  tc.batch_size = 2;
  tc.patch_h = 24;
  tc.patch_w = 32;
  tc.lr0 = 3e-3;  // overfit-scale rate; the desk/paper presets keep 4e-4
  tc.checkpoint_every = 0;
  tc.seed = 5;
  Trainer<float> trainer(model, tc);
  trainer.attach(ds);
  while (trainer.iteration < tc.iterations) trainer.step();
  const auto& clip = ds.clips[0];
  std::vector<FrameScore> scores;
  if (task == Task::Deinterlace) {
    auto seq = interlace(clip, tc.first_parity);
    scores = evaluate_frames(seq.fields, clip, model_recon_fn(model, seq));
  } else {
    auto seq = mosaic(clip, tc.pattern);
    scores = evaluate_frames(seq.frames, clip, model_recon_fn(model, seq));
  }
  double mean = 0;
  for (const auto& s : scores) mean += s.psnr / double(scores.size());
  return mean;
}

void criterion7_overfit() {
  const auto t0 = std::chrono::steady_clock::now();
  const double de = overfit_psnr(Task::Deinterlace, 2000);
  const double de_seconds = seconds_since(t0);
  const auto t1 = std::chrono::steady_clock::now();
  const double dm = overfit_psnr(Task::Demosaic, 2000);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "deinterlace %.2f dB (>=45) in %.0fs, demosaic %.2f dB "
                "(>=40) in %.0fs",
                de, de_seconds, dm, seconds_since(t1));
  report(7, "overfit capability on a synthetic 10-frame clip",
         de >= 45.0 && dm >= 40.0, detail);
}

void criterion8_parameter_counts() {
  bool pass = true;
  std::printf("    parameter reconciliation (full configs):\n");
  for (auto task : {Task::Deinterlace, Task::Demosaic}) {
    ModelConfig cfg;
    cfg.task = task;
    auto [model, count] = build_model<float>(cfg);
    const double target = task == Task::Deinterlace ? 2943235.0 : 3460227.0;
    const double gap = (double(count) - target) / target;
    std::printf("    %s:\n", to_string(task).c_str());
    for (const auto& [name, c] : model.param_breakdown())
      std::printf("      %-18s %9ld\n", name.c_str(), long(c));
    std::printf("      %-18s %9ld (reference %ld, gap %+.1f%%)\n", "total",
                long(count), long(target), 100.0 * gap);
    if (std::abs(gap) > 0.15) pass = false;
  }
  std::printf(
      "    the branch delta (3460227-2943235 = 516992) matches one 7-block\n"
      "    64-channel branch exactly, so the residual gap sits in the\n"
      "    offset-projection and stem layout, not the res-block arithmetic.\n");
  report(8, "parameter counts within 15% of the reference sizes", pass);
}

// Runs the ablate subcommand on a tiny dataset and checks the CSV shapes of
// a k-value sweep and a reconstruction-structure sweep.
bool ablate_csv_check() {
  namespace fs = std::filesystem;
  const std::string gt = "/tmp/vdm_acceptance_ablate/gt";
  const std::string out = "/tmp/vdm_acceptance_ablate/out";
  fs::remove_all("/tmp/vdm_acceptance_ablate");
  fs::create_directories(gt);
  fs::create_directories(out);
  save_clip_frames(gt + "/clip0", overfit_clip(5, 16, 20).frames);
  const std::string cfgp = out + "/base.toml";
  std::ofstream(cfgp) << "[train]\niterations = 2\nbatch_size = 2\n"
                         "patch_h = 16\npatch_w = 20\n";
  auto read_lines = [](const std::string& p) {
    std::vector<std::string> lines;
    std::ifstream in(p);
    std::string l;
    while (std::getline(in, l)) lines.push_back(l);
    return lines;
  };
  {
    const char* argv[] = {"vdm",      "ablate", "--data", gt.c_str(),
                          "--out",    out.c_str(), "--config", cfgp.c_str(),
                          "--seed",   "3",      "--axis",  "k=32,50,64"};
    if (cli::run(12, argv) != 0) return false;
    auto lines = read_lines(out + "/ablate.csv");
    if (lines.size() != 4 || lines[0] != "k,psnr,ssim") return false;
  }
  {
    const char* argv[] = {"vdm",      "ablate",    "--data",  gt.c_str(),
                          "--out",    out.c_str(), "--config", cfgp.c_str(),
                          "--seed",   "3",         "--axis",
                          "recon=Separate-7,Single-0,Single-7,Single-14"};
    if (cli::run(12, argv) != 0) return false;
    auto lines = read_lines(out + "/ablate.csv");
    if (lines.size() != 5 || lines[0] != "recon,psnr,ssim") return false;
  }
  return true;
}

void criterion9_ablation_grid() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  Index combos = 0;
  Rng data_rng(109);
  std::array<Tensor4f, 5> fields;
  for (auto& f : fields) {
    f = Tensor4f(1, 3, 6, 16);
    fill_uniform(f, data_rng, 0.0, 1.0);
  }
  Tensor4f gt(1, 3, 12, 16);
  fill_uniform(gt, data_rng, 0.0, 1.0);

  auto run_one = [&](const ModelConfig& cfg) {
    try {
      Model<float> model(cfg);
      Tensor4f out = model.forward(fields, IndicatorFlag::EvenField,
                                   CfaPattern::RGGB, true);
      model.zero_grads();
      model.backward(loss_backward(out, gt));
      double g = 0;
      for (const auto& p : model.params())
        g += double(Eigen::Map<VecX<float>>(p.grad, p.size).abs().sum());
      if (!std::isfinite(g)) return false;
      ++combos;
      return true;
    } catch (const std::exception& e) {
      std::printf("    grid failure: %s\n", e.what());
      return false;
    }
  };

  const std::array<std::pair<ReconMode, Index>, 4> recon_axis{
      std::pair{ReconMode::Separate, Index(7)},
      std::pair{ReconMode::Single, Index(0)},
      std::pair{ReconMode::Single, Index(7)},
      std::pair{ReconMode::Single, Index(14)}};
  for (auto av : {AlignVariant::DfConv, AlignVariant::Df, AlignVariant::DfRes})
    for (auto at : {AttentionVariant::SA, AttentionVariant::kSA,
                    AttentionVariant::EkSA})
      for (bool residual : {true, false})
        for (auto fusion : {FusionMode::Add, FusionMode::Concat})
          for (const auto& [mode, depth] : recon_axis) {
            ModelConfig cfg;  // full 64-channel architecture at toy size
            cfg.align_variant = av;
            cfg.attention.variant = at;
            cfg.attention.residual = residual;
            cfg.attention.scale_init = 0.1;
            cfg.fusion = fusion;
            cfg.recon_mode = mode;
            cfg.recon_depth = depth;
            cfg.seed = std::uint64_t(combos);
            if (!run_one(cfg)) pass = false;
          }
  // k sweep for both top-k variants
  for (Index k : {Index(32), Index(50), Index(64)}) {
    for (auto at : {AttentionVariant::kSA, AttentionVariant::EkSA}) {
      ModelConfig cfg;
      cfg.attention.variant = at;
      cfg.attention.k = k;
      cfg.attention.scale_init = 0.1;
      if (!run_one(cfg)) pass = false;
    }
  }
  // the ablate command emits the table-shaped CSVs
  bool csv_ok = ablate_csv_check();
  char detail[96];
  std::snprintf(detail, sizeof(detail),
                "%ld combinations forward+backward, ablate CSVs %s, %.0fs",
                long(combos), csv_ok ? "ok" : "BAD", seconds_since(t0));
  report(9, "ablation grid (3x3x2x2x4 plus k in {32,50,64})",
         pass && csv_ok && combos == 150, detail);
}

void criterion10_metric_oracles() {
  bool pass = true;
  // PSNR formula case
  {
    Tensor4d a(1, 3, 4, 4), b(1, 3, 4, 4);
    a.flat().setConstant(0.5);
    b.flat().setConstant(0.6);
    if (std::abs(psnr(a, b) - 20.0) > 0.01) pass = false;
  }
  // SSIM self-identity
  {
    Rng rng(110);
    Tensor4d a(1, 3, 16, 16);
    fill_uniform(a, rng, 0.0, 1.0);
    if (std::abs(ssim(a, a) - 1.0) > 1e-9) pass = false;
  }
  // PSNR monotone under increasing noise
  {
    Rng rng(111);
    Tensor4d base(1, 3, 12, 12), noise(1, 3, 12, 12);
    fill_uniform(base, rng, 0.0, 1.0);
    fill_normal(noise, rng, 1.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double sigma : {0.01, 0.02, 0.05, 0.1, 0.2}) {
      Tensor4d noisy = base;
      noisy.flat() += noise.flat() * sigma;
      const double p = psnr(base, noisy);
      if (!(p < prev)) pass = false;
      prev = p;
    }
  }
  report(10, "metric oracles (PSNR formula, SSIM identity, monotonicity)",
         pass);
}

void criterion11_reproducibility() {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  const std::string dir = "/tmp/vdm_acceptance_repro";
  std::filesystem::create_directories(dir);
  auto run_once = [&](const std::string& ckpt) {
    Model<float> model(acceptance_toy_config(Task::Deinterlace));
    TrainDataset<float> ds;
    ds.clips.push_back(overfit_clip(6, 16, 20));
    TrainConfig tc;
    tc.iterations = 25;
    tc.batch_size = 2;
    tc.patch_h = 16;
    tc.patch_w = 20;
    tc.seed = 21;
    Trainer<float> trainer(model, tc);
    trainer.attach(ds);
    std::vector<std::string> rows;
    while (trainer.iteration < tc.iterations)
      rows.push_back(to_csv(trainer.step()));
    save_checkpoint(ckpt, model, &tc, &trainer.opt, trainer.iteration,
                    trainer.master.state());
    return rows;
  };
  auto rows_a = run_once(dir + "/a.tar");
  auto rows_b = run_once(dir + "/b.tar");
  if (rows_a != rows_b) pass = false;
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  if (slurp(dir + "/a.tar") != slurp(dir + "/b.tar")) pass = false;
  // save/load round trip bit-exactness
  {
    Model<float> loaded = load_checkpoint_model(dir + "/a.tar");
    Model<float> reference(acceptance_toy_config(Task::Deinterlace));
    load_checkpoint_into(dir + "/a.tar", reference, nullptr, nullptr, nullptr);
    auto pa = loaded.params();
    auto pb = reference.params();
    for (size_t i = 0; i < pa.size(); ++i)
      if (!(Eigen::Map<VecX<float>>(pa[i].value, pa[i].size) ==
            Eigen::Map<VecX<float>>(pb[i].value, pb[i].size))
               .all())
        pass = false;
    save_checkpoint(dir + "/resaved.tar", loaded, nullptr, nullptr, 25, "s");
    Model<float> again = load_checkpoint_model(dir + "/resaved.tar");
    auto pc = again.params();
    for (size_t i = 0; i < pa.size(); ++i)
      if (!(Eigen::Map<VecX<float>>(pa[i].value, pa[i].size) ==
            Eigen::Map<VecX<float>>(pc[i].value, pc[i].size))
               .all())
        pass = false;
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "%.0fs", seconds_since(t0));
  report(11, "seeded runs bit-identical; checkpoint round trip bit-exact",
         pass, detail);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion1_deform_oracles();
  criterion2_topk_oracle();
  criterion3_attention_identities();
  criterion4_gradient_suite();
  criterion5_efficiency();
  criterion6_known_data_fidelity();
  criterion7_overfit();
  criterion8_parameter_counts();
  criterion9_ablation_grid();
  criterion10_metric_oracles();
  criterion11_reproducibility();
  std::printf("acceptance: %s (%d failure%s, %.0fs total)\n",
              failures == 0 ? "ALL CRITERIA PASS" : "FAILURES PRESENT",
              failures, failures == 1 ? "" : "s", seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
