#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "vdm/checkpoint.hpp"
#include "vdm/gradcheck.hpp"
#include "vdm/train.hpp"

using namespace vdm;

namespace {

ModelConfig tiny_model_config(Task task) {
  ModelConfig cfg;
  cfg.task = task;
  cfg.channels = 8;
  cfg.feature_res_blocks = 1;
  cfg.align_blocks = 1;
  cfg.recon_depth = 1;
  cfg.deform_groups = 2;
  cfg.attention.k = 4;
  cfg.seed = 3;
  return cfg;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.iterations = 30;
  cfg.batch_size = 2;
  cfg.patch_h = 8;
  cfg.patch_w = 10;
  cfg.checkpoint_every = 0;
  cfg.seed = 5;
  return cfg;
}

// smooth moving gradient clip, easy to fit
ProgressiveClip<float> synthetic_clip(Index t, Index h, Index w) {
  ProgressiveClip<float> clip;
  clip.frames = Tensor4f(t, 3, h, w);
  for (Index i = 0; i < t; ++i)
    for (Index c = 0; c < 3; ++c)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const double phase = 0.13 * double(i) + 0.21 * double(c);
          const double v = 0.5 + 0.24 * std::sin(2.0 * 3.14159265 *
                                                 (double(x) / double(w)) +
                                                 phase) +
                           0.18 * std::cos(2.0 * 3.14159265 *
                                           (double(y) / double(h)) - phase);
          clip.frames(i, c, y, x) = float(std::min(1.0, std::max(0.0, v)));
        }
  return clip;
}

}  // namespace

TEST_CASE("loss: pred equal to a constant gt") {
  Tensor4f pred(1, 3, 4, 4), gt(1, 3, 4, 4);
  pred.flat().setConstant(0.25f);
  gt.flat().setConstant(0.25f);
  LossValue<float> v = loss(pred, gt);
  CHECK(v.mse == 0.0f);
  CHECK(v.charbonnier == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(v.tv == 0.0f);
  CHECK(v.total == doctest::Approx(0.1 * 1e-3).epsilon(1e-6));
}

TEST_CASE("loss: 1x1 pixel closed form, no TV neighbors") {
  Tensor4f pred(1, 1, 1, 1), gt(1, 1, 1, 1);
  pred(0, 0, 0, 0) = 1.0f;
  LossValue<float> v = loss(pred, gt);
  CHECK(v.mse == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(v.charbonnier == doctest::Approx(std::sqrt(1.0 + 1e-6)).epsilon(1e-7));
  CHECK(v.tv == 0.0f);
  CHECK(v.total == doctest::Approx(1.0 + 0.1 * std::sqrt(1.0 + 1e-6))
                       .epsilon(1e-6));
}

TEST_CASE("loss defaults: lambda_tv = 2e-3, charbonnier eps = 1e-3") {
  LossWeights w;
  CHECK(w.lambda_tv == doctest::Approx(2.0e-3));
  CHECK(w.char_eps == doctest::Approx(1.0e-3));
  CHECK(w.w_char == doctest::Approx(0.1));
}

TEST_CASE("loss: mse component symmetric, loss(x,x) closed form with TV") {
  Rng rng(1);
  Tensor4f a(1, 3, 5, 6), b(1, 3, 5, 6);
  fill_uniform(a, rng, 0.0, 1.0);
  fill_uniform(b, rng, 0.0, 1.0);
  CHECK(loss(a, b).mse == doctest::Approx(loss(b, a).mse).epsilon(1e-7));
  LossValue<float> self = loss(a, a);
  CHECK(self.total ==
        doctest::Approx(0.1 * 1e-3 + 2.0e-3 * double(total_variation(a)))
            .epsilon(1e-5));
  CHECK(self.total >= 0.0f);
}

TEST_CASE("loss rejects shape mismatch") {
  Tensor4f a(1, 3, 4, 4), b(1, 3, 4, 5);
  CHECK_THROWS_AS(loss(a, b), std::invalid_argument);
}

TEST_CASE("grad_check: composite loss gradient in double") {
  Rng rng(2);
  Tensor4d pred(1, 3, 5, 4), gt(1, 3, 5, 4);
  fill_uniform(pred, rng, 0.0, 1.0);
  fill_uniform(gt, rng, 0.0, 1.0);
  LossWeights w;
  Tensor4d analytic = loss_backward(pred, gt, w);
  auto f = [&]() { return loss(pred, gt, w).total; };
  std::vector<GradCheckInput<double>> in{
      {pred.data(), pred.size(), analytic.data()}};
  CHECK(grad_check<double>(f, in, 1e-6) < 1e-3);
}

TEST_CASE("lr_schedule: endpoints, midpoint, monotone non-increasing") {
  TrainConfig cfg;
  cfg.iterations = 1000;
  CHECK(lr_schedule(0, cfg) == doctest::Approx(4e-4).epsilon(1e-12));
  CHECK(lr_schedule(1000, cfg) == doctest::Approx(1e-7).epsilon(1e-9));
  CHECK(lr_schedule(500, cfg) ==
        doctest::Approx((4e-4 + 1e-7) / 2.0).epsilon(1e-9));
  double prev = lr_schedule(0, cfg);
  for (Index s = 1; s <= 1000; s += 7) {
    const double cur = lr_schedule(s, cfg);
    CHECK(cur <= prev);
    prev = cur;
  }
  CHECK_THROWS_AS(lr_schedule(-1, cfg), std::out_of_range);
  CHECK_THROWS_AS(lr_schedule(1001, cfg), std::out_of_range);
}

TEST_CASE("sample_patch: origin snapping preserves parity and Bayer phase") {
  const PatchOrigin snapped = snap_origin(Task::Demosaic, PatchOrigin{3, 5});
  CHECK(snapped.y0 == 2);
  CHECK(snapped.x0 == 4);
  const PatchOrigin de = snap_origin(Task::Deinterlace, PatchOrigin{3, 5});
  CHECK(de.y0 == 2);
  CHECK(de.x0 == 5);  // column origin unconstrained for fields
}

TEST_CASE("sample_patch: consistent crops across inputs and target") {
  auto clip = synthetic_clip(5, 16, 20);
  auto seq = interlace(clip, FieldParity::Odd);
  auto win = make_training_windows(seq, clip, 2)[0];
  auto cropped = sample_patch(win, Task::Deinterlace, 8, 10, PatchOrigin{4, 6});
  CHECK(cropped.target.h() == 8);
  CHECK(cropped.target.w() == 10);
  CHECK(cropped.inputs[0].h() == 4);
  CHECK(cropped.inputs[0].w() == 10);
  // parity is preserved: reference-field crop rows match target rows of the
  // field's parity (field 2 is Odd, target rows {0,2,...} of the crop)
  for (Index y = 0; y < 4; ++y)
    CHECK((cropped.inputs[2].plane(0, 0).row(y).array() ==
           cropped.target.plane(0, 0).row(2 * y).array()).all());
}

TEST_CASE("sample_patch: deterministic under the seed") {
  Rng a(9), b(9);
  for (int i = 0; i < 20; ++i) {
    auto oa = random_patch_origin(Task::Demosaic, 32, 40, 8, 10, a);
    auto ob = random_patch_origin(Task::Demosaic, 32, 40, 8, 10, b);
    CHECK(oa.y0 == ob.y0);
    CHECK(oa.x0 == ob.x0);
    CHECK(oa.y0 % 2 == 0);
    CHECK(oa.x0 % 2 == 0);
  }
}

TEST_CASE("sample_patch rejects pictures smaller than the patch") {
  Rng rng(10);
  CHECK_THROWS_AS(random_patch_origin(Task::Deinterlace, 6, 10, 8, 10, rng),
                  std::invalid_argument);
}

TEST_CASE("overfit smoke: loss decreases on a single synthetic clip") {
  for (auto task : {Task::Deinterlace, Task::Demosaic}) {
    Model<float> model(tiny_model_config(task));
    TrainDataset<float> ds;
    ds.clips.push_back(synthetic_clip(4, 8, 10));
    TrainConfig tc = tiny_train_config();
    tc.iterations = 60;
    Trainer<float> trainer(model, tc);
    trainer.attach(ds);
    double first = 0, last = 0;
    for (Index i = 0; i < tc.iterations; ++i) {
      TrainLogRow row = trainer.step();
      if (i == 0) first = row.loss;
      last = row.loss;
    }
    CHECK(last < first);
  }
}

TEST_CASE("training is reproducible: identical seeds give identical traces") {
  auto run_trace = [&]() {
    Model<float> model(tiny_model_config(Task::Deinterlace));
    TrainDataset<float> ds;
    ds.clips.push_back(synthetic_clip(4, 8, 10));
    Trainer<float> trainer(model, tiny_train_config());
    trainer.attach(ds);
    std::vector<std::string> rows;
    for (Index i = 0; i < 15; ++i) rows.push_back(to_csv(trainer.step()));
    return rows;
  };
  auto a = run_trace();
  auto b = run_trace();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("checkpoint resume: bit-identical to an uninterrupted run") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "vdm_resume").string();
  fs::create_directories(dir);
  const std::string ckpt = dir + "/mid.tar";
  TrainDataset<float> ds;
  ds.clips.push_back(synthetic_clip(4, 8, 10));

  // uninterrupted: 10 steps
  Model<float> model_a(tiny_model_config(Task::Deinterlace));
  Trainer<float> tr_a(model_a, tiny_train_config());
  tr_a.attach(ds);
  for (Index i = 0; i < 10; ++i) tr_a.step();

  // interrupted: 5 steps, checkpoint, reload into fresh objects, 5 more
  Model<float> model_b(tiny_model_config(Task::Deinterlace));
  Trainer<float> tr_b(model_b, tiny_train_config());
  tr_b.attach(ds);
  for (Index i = 0; i < 5; ++i) tr_b.step();
  TrainConfig tc = tiny_train_config();
  save_checkpoint(ckpt, model_b, &tc, &tr_b.opt, tr_b.iteration,
                  tr_b.master.state());

  Model<float> model_c(tiny_model_config(Task::Deinterlace));
  Trainer<float> tr_c(model_c, tiny_train_config());
  tr_c.attach(ds);
  std::string rng_state;
  load_checkpoint_into(ckpt, model_c, &tr_c.opt, &tr_c.iteration, &rng_state);
  tr_c.master.set_state(rng_state);
  for (Index i = 0; i < 5; ++i) tr_c.step();

  auto pa = model_a.params();
  auto pc = model_c.params();
  REQUIRE(pa.size() == pc.size());
  for (size_t i = 0; i < pa.size(); ++i)
    CHECK((Eigen::Map<VecX<float>>(pa[i].value, pa[i].size) ==
           Eigen::Map<VecX<float>>(pc[i].value, pc[i].size)).all());
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  Model<float> model(tiny_model_config(Task::Deinterlace));
  TrainDataset<float> ds;
  ds.clips.push_back(synthetic_clip(4, 8, 10));
  Trainer<float> trainer(model, tiny_train_config());
  trainer.attach(ds);
  // poison a post-alignment weight so the NaN reaches the loss itself
  auto params = model.params();
  for (auto& p : params)
    if (p.path == "out.bias")
      p.value[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(trainer.step(), TrainAbort);
  try {
    trainer.step();
  } catch (const TrainAbort& e) {
    CHECK(std::string(e.what()).find("clip") != std::string::npos);
  }
}

TEST_CASE("trainer rejects an empty dataset") {
  Model<float> model(tiny_model_config(Task::Deinterlace));
  Trainer<float> trainer(model, tiny_train_config());
  TrainDataset<float> empty;
  CHECK_THROWS_AS(trainer.attach(empty), std::invalid_argument);
}

TEST_CASE("the paper preset keeps the full-scale hyperparameters selectable") {
  TrainConfig de = paper_train_config(Task::Deinterlace);
  CHECK(de.iterations == 150000);
  CHECK(de.batch_size == 32);
  CHECK(de.patch_h == 64);
  CHECK(de.patch_w == 80);
  CHECK(de.lr0 == doctest::Approx(4e-4));
  TrainConfig dm = paper_train_config(Task::Demosaic);
  CHECK(dm.batch_size == 24);
}
