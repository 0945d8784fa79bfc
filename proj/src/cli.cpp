#include "vdm/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vdm/checkpoint.hpp"
#include "vdm/config.hpp"
#include "vdm/dataset.hpp"
#include "vdm/eval.hpp"
#include "vdm/model.hpp"
#include "vdm/png_io.hpp"
#include "vdm/train.hpp"

namespace fs = std::filesystem;

namespace vdm::cli {

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;  // -1: unset, fall back to config / VRL_SEED
};

std::uint64_t env_seed_or_zero() {
  if (const char* env = std::getenv("VRL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError("VRL_SEED is not an integer: " + std::string(env));
    }
  }
  return 0;
}

void ensure_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) throw UsageError("--out is required");
  fs::create_directories(out_dir);
}

// defaults -> config file -> flag overrides, then echoed to out_dir
struct ResolvedConfigs {
  ModelConfig model;
  TrainConfig train;
};

ResolvedConfigs resolve_configs(const CommonOpts& common, Task task,
                                bool preset_paper) {
  ResolvedConfigs rc;
  rc.model.task = task;
  rc.train = preset_paper ? paper_train_config(task) : TrainConfig{};
  bool file_train_seed = false, file_model_seed = false;
  if (!common.config_path.empty()) {
    ConfigTable t = parse_config_file(common.config_path);
    if (t.has("model", "task"))
      rc.model.task = task_from_string(t.get_str("model", "task"));
    apply_model_config(t, rc.model);
    apply_train_config(t, rc.train);
    file_train_seed = t.has("train", "seed");
    file_model_seed = t.has("model", "seed");
  }
  if (common.seed >= 0) {
    rc.train.seed = std::uint64_t(common.seed);
    rc.model.seed = std::uint64_t(common.seed);
  } else if (!file_train_seed && !file_model_seed) {
    const std::uint64_t seed = env_seed_or_zero();
    rc.train.seed = seed;
    rc.model.seed = seed;
  } else {
    // partial file spec: the provided seed covers the missing one
    if (!file_model_seed) rc.model.seed = rc.train.seed;
    if (!file_train_seed) rc.train.seed = rc.model.seed;
  }
  return rc;
}

TrainDataset<float> load_gt_dataset(const std::string& data_dir, Task task) {
  TrainDataset<float> ds;
  for (const auto& name : list_clip_dirs(data_dir)) {
    ProgressiveClip<float> clip;
    clip.frames = load_clip_frames(data_dir + "/" + name);
    if (clip.height() % 2 != 0 ||
        (task == Task::Demosaic && clip.width() % 2 != 0))
      throw UsageError("clip " + name + " has odd dimensions for task " +
                       to_string(task));
    ds.clips.push_back(std::move(clip));
  }
  if (ds.clips.empty())
    throw UsageError("no clip directories under " + data_dir);
  return ds;
}

std::string fingerprint(const ModelConfig& m) {
  // FNV-1a over the serialized model config
  const ConfigTable t = to_table(m, TrainConfig{});
  const std::string s = serialize_config(t);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_degrade(const CommonOpts& common, const std::string& in_dir,
                const std::string& task_name, const std::string& parity_name,
                const std::string& pattern_name, double noise_sigma) {
  const Task task =
      task_name == "interlace" ? Task::Deinterlace : Task::Demosaic;
  ensure_out_dir(common.out_dir);
  ResolvedConfigs rc = resolve_configs(common, task, false);
  rc.train.first_parity = parity_from_string(parity_name);
  rc.train.pattern = cfa_from_string(pattern_name);
  write_resolved_config(common.out_dir, rc.model, rc.train);

  const auto clips = list_clip_dirs(in_dir);
  if (clips.empty()) throw UsageError("no clip directories under " + in_dir);
  for (size_t ci = 0; ci < clips.size(); ++ci) {
    ProgressiveClip<float> clip;
    clip.frames = load_clip_frames(in_dir + "/" + clips[ci]);
    const std::string out_clip = common.out_dir + "/" + clips[ci];
    DegradedMeta meta;
    meta.task = task;
    meta.source_height = clip.height();
    meta.source_width = clip.width();
    meta.frames = clip.t();
    NoiseSpec noise{noise_sigma, Rng::mix(rc.train.seed, ci)};
    if (task == Task::Deinterlace) {
      meta.first_parity = rc.train.first_parity;
      auto seq = interlace(clip, rc.train.first_parity, noise);
      save_clip_frames(out_clip, seq.fields);
    } else {
      meta.pattern = rc.train.pattern;
      auto seq = mosaic(clip, rc.train.pattern, noise);
      save_clip_frames(out_clip, seq.frames);
    }
    write_meta(out_clip, meta);
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_train(const CommonOpts& common, const std::string& data_dir,
              const std::string& task_name, bool preset_paper,
              std::int64_t iters_flag, std::int64_t batch_flag,
              const std::string& resume_path) {
  ensure_out_dir(common.out_dir);
  ResolvedConfigs rc =
      resolve_configs(common, task_from_string(task_name), preset_paper);

  std::unique_ptr<Model<float>> model;
  if (!resume_path.empty()) {
    // the checkpoint owns the architecture and the schedule; flags may
    // still move the horizon or the batch size
    CheckpointInfo info = read_checkpoint_info(resume_path);
    rc.model = info.model;
    if (info.train) rc.train = *info.train;
    model = std::make_unique<Model<float>>(info.model);
  } else {
    model = std::make_unique<Model<float>>(rc.model);
  }
  if (iters_flag > 0) rc.train.iterations = Index(iters_flag);
  if (batch_flag > 0) rc.train.batch_size = Index(batch_flag);
  write_resolved_config(common.out_dir, rc.model, rc.train);

  TrainDataset<float> ds = load_gt_dataset(data_dir, rc.model.task);
  Trainer<float> trainer(*model, rc.train);
  trainer.attach(ds);

  const std::string log_path = common.out_dir + "/log.csv";
  bool fresh = true;
  if (!resume_path.empty()) {
    std::string rng_state;
    load_checkpoint_into(resume_path, *model, &trainer.opt,
                         &trainer.iteration, &rng_state);
    if (!rng_state.empty()) trainer.master.set_state(rng_state);
    fresh = false;
  }
  std::ofstream log(log_path, fresh ? std::ios::trunc : std::ios::app);
  if (fresh) log << train_log_csv_header() << '\n';

  std::cout << "parameters: " << model->param_count() << '\n';
  for (const auto& [name, count] : model->param_breakdown())
    std::cout << "  " << name << ": " << count << '\n';

  char ckpt_name[64];
  while (trainer.iteration < rc.train.iterations) {
    TrainLogRow row = trainer.step();
    log << to_csv(row) << '\n';
    if (trainer.iteration % 100 == 0 ||
        trainer.iteration == rc.train.iterations)
      std::cout << "iter " << trainer.iteration << " loss " << row.loss
                << " lr " << row.lr << std::endl;
    if (rc.train.checkpoint_every > 0 &&
        trainer.iteration % rc.train.checkpoint_every == 0) {
      std::snprintf(ckpt_name, sizeof(ckpt_name), "ckpt_%06ld.tar",
                    long(trainer.iteration));
      save_checkpoint(common.out_dir + "/" + ckpt_name, *model, &rc.train,
                      &trainer.opt, trainer.iteration, trainer.master.state());
    }
  }
  save_checkpoint(common.out_dir + "/ckpt_final.tar", *model, &rc.train,
                  &trainer.opt, trainer.iteration, trainer.master.state());
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<std::string> degraded_clip_dirs(const std::string& in_dir) {
  if (has_meta(in_dir)) return {in_dir};
  std::vector<std::string> dirs;
  for (const auto& name : list_clip_dirs(in_dir)) {
    const std::string d = in_dir + "/" + name;
    if (has_meta(d)) dirs.push_back(d);
  }
  if (dirs.empty())
    throw UsageError("no degraded clips (meta.json) under " + in_dir);
  return dirs;
}

Tensor4f reconstruct_sequence(Model<float>& model, const std::string& clip_dir,
                              const DegradedMeta& meta) {
  if (meta.task != model.cfg.task)
    throw UsageError("checkpoint task " + to_string(model.cfg.task) +
                     " does not match degraded data task " +
                     to_string(meta.task));
  if (meta.task == Task::Deinterlace) {
    auto seq = load_interlaced(clip_dir, meta);
    auto recon = model_recon_fn(model, seq);
    Tensor4f frames(seq.fields.n(), 3, meta.source_height, meta.source_width);
    for (Index n = 0; n < seq.fields.n(); ++n) {
      Tensor4f f = recon(gather_window(seq.fields, n), n);
      frames.item_matrix(n) = f.item_matrix(0);
    }
    return frames;
  }
  auto seq = load_mosaic(clip_dir, meta);
  auto recon = model_recon_fn(model, seq);
  Tensor4f frames(seq.frames.n(), 3, seq.frames.h(), seq.frames.w());
  for (Index n = 0; n < seq.frames.n(); ++n) {
    Tensor4f f = recon(gather_window(seq.frames, n), n);
    frames.item_matrix(n) = f.item_matrix(0);
  }
  return frames;
}

int cmd_infer(const CommonOpts& common, const std::string& ckpt_path,
              const std::string& in_dir, std::int64_t profile_row,
              std::int64_t profile_col) {
  ensure_out_dir(common.out_dir);
  CheckpointInfo info;
  Model<float> model = load_checkpoint_model(ckpt_path, &info);
  write_resolved_config(common.out_dir, info.model,
                        info.train ? *info.train : TrainConfig{});
  for (const auto& clip_dir : degraded_clip_dirs(in_dir)) {
    const DegradedMeta meta = read_meta(clip_dir);
    const std::string name = fs::path(clip_dir).filename().string();
    Tensor4f frames = reconstruct_sequence(model, clip_dir, meta);
    save_clip_frames(common.out_dir + "/" + name, frames);
    if (profile_row >= 0)
      write_png(common.out_dir + "/" + name + "_profile_row" +
                    std::to_string(profile_row) + ".png",
                temporal_profile(frames, ProfileAxis::Horizontal,
                                 Index(profile_row)));
    if (profile_col >= 0)
      write_png(common.out_dir + "/" + name + "_profile_col" +
                    std::to_string(profile_col) + ".png",
                temporal_profile(frames, ProfileAxis::Vertical,
                                 Index(profile_col)));
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_eval(const CommonOpts& common, const std::string& ckpt_path,
             const std::string& degraded_dir, const std::string& gt_dir,
             bool emit_diff) {
  ensure_out_dir(common.out_dir);
  CheckpointInfo info;
  Model<float> model = load_checkpoint_model(ckpt_path, &info);
  write_resolved_config(common.out_dir, info.model,
                        info.train ? *info.train : TrainConfig{});
  std::ofstream report(common.out_dir + "/report.csv");
  report << "# config_fingerprint=" << fingerprint(model.cfg) << '\n';
  report << "clip,frames,psnr_db,ssim\n";
  report.precision(9);
  double sum_psnr = 0, sum_ssim = 0;
  Index total_frames = 0;
  for (const auto& clip_dir : degraded_clip_dirs(degraded_dir)) {
    const DegradedMeta meta = read_meta(clip_dir);
    const std::string name = fs::path(clip_dir).filename().string();
    ProgressiveClip<float> gt;
    gt.frames = load_clip_frames(gt_dir + "/" + name);
    if (gt.t() != meta.frames)
      throw std::runtime_error("eval: missing GT frames for clip " + name);
    Tensor4f frames = reconstruct_sequence(model, clip_dir, meta);
    double clip_psnr = 0, clip_ssim = 0;
    for (Index n = 0; n < frames.n(); ++n) {
      Tensor4f out = slice_item(frames, n);
      Tensor4f ref = slice_item(gt.frames, n);
      clip_psnr += psnr(out, ref);
      clip_ssim += ssim(out, ref);
      if (emit_diff) {
        char dn[32];
        std::snprintf(dn, sizeof(dn), "%06ld.png", long(n));
        fs::create_directories(common.out_dir + "/" + name + "_diff");
        write_png(common.out_dir + "/" + name + "_diff/" + dn,
                  difference_image(out, ref));
      }
    }
    sum_psnr += clip_psnr;
    sum_ssim += clip_ssim;
    total_frames += frames.n();
    report << name << ',' << frames.n() << ',' << clip_psnr / double(frames.n())
           << ',' << clip_ssim / double(frames.n()) << '\n';
  }
  report << "ALL," << total_frames << ',' << sum_psnr / double(total_frames)
         << ',' << sum_ssim / double(total_frames) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_profile(const CommonOpts& common, const std::string& in_dir,
                const std::string& axis_name, std::int64_t index) {
  ensure_out_dir(common.out_dir);
  ResolvedConfigs rc;
  write_resolved_config(common.out_dir, rc.model, rc.train);
  const ProfileAxis axis = axis_name == "horizontal" ? ProfileAxis::Horizontal
                                                     : ProfileAxis::Vertical;
  std::vector<std::string> clip_dirs;
  if (!list_pngs(in_dir).empty()) {
    clip_dirs.push_back(in_dir);
  } else {
    for (const auto& name : list_clip_dirs(in_dir))
      clip_dirs.push_back(in_dir + "/" + name);
  }
  for (const auto& clip_dir : clip_dirs) {
    const std::string name = fs::path(clip_dir).filename().string();
    Tensor4f frames = load_clip_frames(clip_dir);
    write_png(common.out_dir + "/" + name + "_profile_" + axis_name + "_" +
                  std::to_string(index) + ".png",
              temporal_profile(frames, axis, Index(index)));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Ablation sweep: cartesian product over config axes, each trained with the
// same desk-scale budget and seed, then evaluated on the training clips.

struct AxisSpec {
  std::string name;
  std::vector<std::string> values;
};

AxisSpec parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos)
    throw UsageError("--axis expects name=v1,v2,...: " + text);
  AxisSpec spec;
  spec.name = text.substr(0, eq);
  std::string rest = text.substr(eq + 1);
  std::istringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) spec.values.push_back(item);
  if (spec.values.empty()) throw UsageError("--axis has no values: " + text);
  const std::vector<std::string> allowed{
      "align_variant", "attention_variant", "attention_residual",
      "fusion",        "recon_mode",        "recon_depth",
      "recon",         "k"};
  if (std::find(allowed.begin(), allowed.end(), spec.name) == allowed.end())
    throw UsageError("unknown ablation axis: " + spec.name);
  return spec;
}

void apply_axis(ModelConfig& cfg, const std::string& name,
                const std::string& value) {
  if (name == "align_variant") {
    cfg.align_variant = align_variant_from_string(value);
  } else if (name == "attention_variant") {
    cfg.attention.variant = attention_variant_from_string(value);
  } else if (name == "attention_residual") {
    cfg.attention.residual = value == "true" || value == "on" || value == "1";
  } else if (name == "fusion") {
    cfg.fusion = fusion_from_string(value);
  } else if (name == "recon_mode") {
    cfg.recon_mode = recon_mode_from_string(value);
  } else if (name == "recon_depth") {
    cfg.recon_depth = Index(std::stoll(value));
  } else if (name == "recon") {
    // combined values like Separate-7, Single-0, Single-14
    const auto dash = value.find('-');
    if (dash == std::string::npos)
      throw UsageError("recon axis values look like Separate-7: " + value);
    cfg.recon_mode = recon_mode_from_string(value.substr(0, dash));
    cfg.recon_depth = Index(std::stoll(value.substr(dash + 1)));
  } else if (name == "k") {
    cfg.attention.k = Index(std::stoll(value));
  }
}

int cmd_ablate(const CommonOpts& common, const std::string& data_dir,
               const std::string& task_name,
               const std::vector<std::string>& axis_texts,
               std::int64_t iters_flag) {
  if (axis_texts.empty()) throw UsageError("ablate: at least one --axis");
  ensure_out_dir(common.out_dir);
  ResolvedConfigs rc =
      resolve_configs(common, task_from_string(task_name), false);
  if (iters_flag > 0) rc.train.iterations = Index(iters_flag);
  write_resolved_config(common.out_dir, rc.model, rc.train);
  std::vector<AxisSpec> axes;
  for (const auto& t : axis_texts) axes.push_back(parse_axis(t));

  TrainDataset<float> ds = load_gt_dataset(data_dir, rc.model.task);

  std::ofstream out(common.out_dir + "/ablate.csv");
  for (const auto& a : axes) out << a.name << ',';
  out << "psnr,ssim\n";
  out.precision(9);

  std::vector<size_t> pick(axes.size(), 0);
  bool done = false;
  while (!done) {
    ModelConfig cfg = rc.model;
    std::vector<std::string> row_values;
    for (size_t i = 0; i < axes.size(); ++i) {
      apply_axis(cfg, axes[i].name, axes[i].values[pick[i]]);
      row_values.push_back(axes[i].values[pick[i]]);
    }
    cfg.validate();
    Model<float> model(cfg);
    Trainer<float> trainer(model, rc.train);  // same data seed for every row
    trainer.attach(ds);
    while (trainer.iteration < rc.train.iterations) trainer.step();
    double sum_psnr = 0, sum_ssim = 0;
    Index frames = 0;
    for (size_t ci = 0; ci < ds.clips.size(); ++ci) {
      const auto& clip = ds.clips[ci];
      std::vector<FrameScore> scores;
      if (cfg.task == Task::Deinterlace) {
        auto seq = interlace(clip, rc.train.first_parity);
        scores = evaluate_frames(seq.fields, clip, model_recon_fn(model, seq));
      } else {
        auto seq = mosaic(clip, rc.train.pattern);
        scores = evaluate_frames(seq.frames, clip, model_recon_fn(model, seq));
      }
      for (const auto& s : scores) {
        sum_psnr += s.psnr;
        sum_ssim += s.ssim;
        ++frames;
      }
    }
    for (const auto& v : row_values) out << v << ',';
    out << sum_psnr / double(frames) << ',' << sum_ssim / double(frames)
        << '\n';
    out.flush();
    // advance the cartesian product
    size_t i = 0;
    for (; i < axes.size(); ++i) {
      if (++pick[i] < axes[i].values.size()) break;
      pick[i] = 0;
    }
    done = i == axes.size();
  }
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_bench_attn(const CommonOpts& common, const std::string& n_list,
                   std::int64_t d, std::int64_t reps, std::int64_t k) {
  ensure_out_dir(common.out_dir);
  ResolvedConfigs rc;
  write_resolved_config(common.out_dir, rc.model, rc.train);
  std::vector<Index> ns;
  std::istringstream ss(n_list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) ns.push_back(Index(std::stoll(item)));
  if (ns.empty()) throw UsageError("bench-attn: empty --n list");
  auto rows = attention_benchmark(ns, Index(d), Index(reps), Index(k),
                                  rc.train.seed);
  std::ofstream out(common.out_dir + "/bench_attn.csv");
  out << bench_csv_header() << '\n';
  std::cout << bench_csv_header() << '\n';
  for (const auto& r : rows) {
    out << to_csv(r) << '\n';
    std::cout << to_csv(r) << '\n';
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"multi-picture video deinterlacing / demosaicing toolkit"};
  app.require_subcommand(1);

  CommonOpts common;
  int rc = 0;

  // degrade
  auto* degrade = app.add_subcommand("degrade", "synthesize degraded data");
  std::string dg_in, dg_task, dg_parity = "odd", dg_pattern = "rggb";
  double dg_noise = 0.0;
  degrade->add_option("--task", dg_task, "interlace|mosaic")
      ->required()
      ->check(CLI::IsMember({"interlace", "mosaic"}));
  degrade->add_option("--in", dg_in, "directory of progressive clips")
      ->required();
  degrade->add_option("--out", common.out_dir, "output directory")->required();
  degrade->add_option("--first-parity", dg_parity, "odd|even");
  degrade->add_option("--pattern", dg_pattern, "rggb|bggr|grbg|gbrg");
  degrade->add_option("--noise-sigma", dg_noise, "observation noise sigma");
  degrade->add_option("--seed", common.seed, "seed");
  degrade->callback([&] {
    rc = cmd_degrade(common, dg_in, dg_task, dg_parity, dg_pattern, dg_noise);
  });

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string tr_data, tr_task = "deinterlace", tr_resume, tr_preset = "desk";
  std::int64_t tr_iters = -1, tr_batch = -1;
  train->add_option("--data", tr_data, "ground-truth clip directory")
      ->required();
  train->add_option("--out", common.out_dir, "output directory")->required();
  train->add_option("--config", common.config_path, "config file");
  train->add_option("--task", tr_task, "deinterlace|demosaic")
      ->check(CLI::IsMember({"deinterlace", "demosaic"}));
  train->add_option("--preset", tr_preset, "desk|paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  train->add_option("--iters", tr_iters, "override iterations");
  train->add_option("--batch", tr_batch, "override batch size");
  train->add_option("--seed", common.seed, "seed");
  train->add_option("--resume", tr_resume, "checkpoint to resume from");
  train->callback([&] {
    rc = cmd_train(common, tr_data, tr_task, tr_preset == "paper", tr_iters,
                   tr_batch, tr_resume);
  });

  // infer
  auto* infer = app.add_subcommand("infer", "reconstruct a degraded sequence");
  std::string in_ckpt, in_dir;
  std::int64_t in_prow = -1, in_pcol = -1;
  infer->add_option("--ckpt", in_ckpt, "checkpoint archive")->required();
  infer->add_option("--in", in_dir, "degraded clip directory")->required();
  infer->add_option("--out", common.out_dir, "output directory")->required();
  infer->add_option("--profile-row", in_prow, "emit a horizontal profile");
  infer->add_option("--profile-col", in_pcol, "emit a vertical profile");
  infer->callback(
      [&] { rc = cmd_infer(common, in_ckpt, in_dir, in_prow, in_pcol); });

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate against ground truth");
  std::string ev_ckpt, ev_degraded, ev_gt;
  bool ev_diff = false;
  eval->add_option("--ckpt", ev_ckpt, "checkpoint archive")->required();
  eval->add_option("--degraded", ev_degraded, "degraded dataset directory")
      ->required();
  eval->add_option("--gt", ev_gt, "ground-truth dataset directory")->required();
  eval->add_option("--out", common.out_dir, "output directory")->required();
  eval->add_flag("--diff", ev_diff, "emit x10 difference images");
  eval->callback(
      [&] { rc = cmd_eval(common, ev_ckpt, ev_degraded, ev_gt, ev_diff); });

  // profile
  auto* profile = app.add_subcommand("profile", "emit temporal profiles");
  std::string pr_in, pr_axis = "horizontal";
  std::int64_t pr_index = 0;
  profile->add_option("--in", pr_in, "clip directory")->required();
  profile->add_option("--axis", pr_axis, "horizontal|vertical")
      ->check(CLI::IsMember({"horizontal", "vertical"}));
  profile->add_option("--index", pr_index, "row or column index")->required();
  profile->add_option("--out", common.out_dir, "output directory")->required();
  profile->callback([&] { rc = cmd_profile(common, pr_in, pr_axis, pr_index); });

  // ablate
  auto* ablate = app.add_subcommand("ablate", "config sweep with shared budget");
  std::string ab_data, ab_task = "deinterlace";
  std::vector<std::string> ab_axes;
  std::int64_t ab_iters = -1;
  ablate->add_option("--data", ab_data, "ground-truth clip directory")
      ->required();
  ablate->add_option("--out", common.out_dir, "output directory")->required();
  ablate->add_option("--config", common.config_path, "config file");
  ablate->add_option("--task", ab_task, "deinterlace|demosaic")
      ->check(CLI::IsMember({"deinterlace", "demosaic"}));
  ablate->add_option("--axis", ab_axes, "axis spec name=v1,v2,...")
      ->take_all();
  ablate->add_option("--iters", ab_iters, "override iterations");
  ablate->add_option("--seed", common.seed, "seed");
  ablate->callback(
      [&] { rc = cmd_ablate(common, ab_data, ab_task, ab_axes, ab_iters); });

  // bench-attn
  auto* bench = app.add_subcommand("bench-attn", "attention scaling benchmark");
  std::string bn_n = "1024,4096,16384";
  std::int64_t bn_d = 64, bn_reps = 3, bn_k = 50;
  bench->add_option("--n", bn_n, "comma-separated token counts");
  bench->add_option("--d", bn_d, "channel width");
  bench->add_option("--reps", bn_reps, "repetitions per cell");
  bench->add_option("--k", bn_k, "top-k value");
  bench->add_option("--out", common.out_dir, "output directory")->required();
  bench->callback([&] { rc = cmd_bench_attn(common, bn_n, bn_d, bn_reps, bn_k); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}

}  // namespace vdm::cli
