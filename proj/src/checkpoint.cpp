#include "vdm/checkpoint.hpp"

#include <json.hpp>

#include <cstring>

#include "vdm/config.hpp"
#include "vdm/tar_archive.hpp"

using nlohmann::json;

namespace vdm {

namespace {

json model_config_json(const ModelConfig& m) {
  json j;
  j["task"] = to_string(m.task);
  j["channels"] = m.channels;
  j["feature_res_blocks"] = m.feature_res_blocks;
  j["align_blocks"] = m.align_blocks;
  j["align_variant"] = to_string(m.align_variant);
  j["fusion"] = to_string(m.fusion);
  j["recon_mode"] = to_string(m.recon_mode);
  j["recon_depth"] = m.recon_depth;
  j["deform_groups"] = m.deform_groups;
  j["seed"] = m.seed;
  j["attention"] = {{"variant", to_string(m.attention.variant)},
                    {"k", m.attention.k},
                    {"residual", m.attention.residual},
                    {"scale_init", m.attention.scale_init}};
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  m.task = task_from_string(j.at("task").get<std::string>());
  m.channels = j.at("channels").get<Index>();
  m.feature_res_blocks = j.at("feature_res_blocks").get<Index>();
  m.align_blocks = j.at("align_blocks").get<Index>();
  m.align_variant =
      align_variant_from_string(j.at("align_variant").get<std::string>());
  m.fusion = fusion_from_string(j.at("fusion").get<std::string>());
  m.recon_mode = recon_mode_from_string(j.at("recon_mode").get<std::string>());
  m.recon_depth = j.at("recon_depth").get<Index>();
  m.deform_groups = j.at("deform_groups").get<Index>();
  m.seed = j.at("seed").get<std::uint64_t>();
  const json& a = j.at("attention");
  m.attention.variant =
      attention_variant_from_string(a.at("variant").get<std::string>());
  m.attention.k = a.at("k").get<Index>();
  m.attention.residual = a.at("residual").get<bool>();
  m.attention.scale_init = a.at("scale_init").get<double>();
  return m;
}

json train_config_json(const TrainConfig& t) {
  json j;
  j["iterations"] = t.iterations;
  j["batch_size"] = t.batch_size;
  j["patch_h"] = t.patch_h;
  j["patch_w"] = t.patch_w;
  j["lr0"] = t.lr0;
  j["lr_min"] = t.lr_min;
  j["beta1"] = t.beta1;
  j["beta2"] = t.beta2;
  j["grad_clip"] = t.grad_clip;
  j["seed"] = t.seed;
  j["checkpoint_every"] = t.checkpoint_every;
  j["first_parity"] = to_string(t.first_parity);
  j["pattern"] = to_string(t.pattern);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig t;
  t.iterations = j.at("iterations").get<Index>();
  t.batch_size = j.at("batch_size").get<Index>();
  t.patch_h = j.at("patch_h").get<Index>();
  t.patch_w = j.at("patch_w").get<Index>();
  t.lr0 = j.at("lr0").get<double>();
  t.lr_min = j.at("lr_min").get<double>();
  t.beta1 = j.at("beta1").get<double>();
  t.beta2 = j.at("beta2").get<double>();
  t.grad_clip = j.at("grad_clip").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.checkpoint_every = j.at("checkpoint_every").get<Index>();
  t.first_parity = parity_from_string(j.at("first_parity").get<std::string>());
  t.pattern = cfa_from_string(j.at("pattern").get<std::string>());
  return t;
}

std::string blob_of(const float* data, Index count) {
  std::string s(size_t(count) * sizeof(float), '\0');
  std::memcpy(s.data(), data, s.size());
  return s;
}

void blob_into(const std::string& blob, float* data, Index count,
               const std::string& what) {
  if (blob.size() != size_t(count) * sizeof(float))
    throw std::runtime_error("checkpoint: size mismatch for " + what);
  std::memcpy(data, blob.data(), blob.size());
}

}  // namespace

void save_checkpoint(const std::string& path, Model<float>& model,
                     const TrainConfig* train_cfg, const Adam<float>* opt,
                     Index iteration, const std::string& rng_state) {
  auto params = model.params();
  json manifest;
  manifest["format"] = "vdm-checkpoint-v1";
  manifest["dtype"] = "float32-le";
  manifest["iteration"] = iteration;
  manifest["rng_state"] = rng_state;
  manifest["model"] = model_config_json(model.cfg);
  if (train_cfg) manifest["train"] = train_config_json(*train_cfg);
  json plist = json::array();
  for (const auto& p : params) {
    json pj;
    pj["name"] = p.path;
    pj["shape"] = p.shape;
    plist.push_back(pj);
  }
  manifest["params"] = plist;
  if (opt) manifest["optimizer"] = {{"type", "adam"}, {"steps", opt->steps}};

  std::vector<TarEntry> entries;
  entries.push_back({"manifest.json", manifest.dump(2) + "\n"});
  for (const auto& p : params)
    entries.push_back({"params/" + p.path + ".bin", blob_of(p.value, p.size)});
  if (opt) {
    for (size_t i = 0; i < params.size(); ++i) {
      entries.push_back({"adam/" + params[i].path + ".m.bin",
                         blob_of(opt->m[i].data(), params[i].size)});
      entries.push_back({"adam/" + params[i].path + ".v.bin",
                         blob_of(opt->v[i].data(), params[i].size)});
    }
  }
  write_tar(path, entries);
}

namespace {

struct Archive {
  std::vector<TarEntry> entries;
  const TarEntry& find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw std::runtime_error("checkpoint: missing member " + name);
  }
  bool has(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return true;
    return false;
  }
};

CheckpointInfo info_from_manifest(const json& manifest) {
  CheckpointInfo info;
  info.model = model_config_from_json(manifest.at("model"));
  if (manifest.contains("train"))
    info.train = train_config_from_json(manifest.at("train"));
  info.iteration = manifest.at("iteration").get<Index>();
  info.rng_state = manifest.at("rng_state").get<std::string>();
  info.has_optimizer = manifest.contains("optimizer");
  return info;
}

}  // namespace

CheckpointInfo read_checkpoint_info(const std::string& path) {
  Archive ar{read_tar(path)};
  const json manifest = json::parse(ar.find("manifest.json").data);
  return info_from_manifest(manifest);
}

void load_checkpoint_into(const std::string& path, Model<float>& model,
                          Adam<float>* opt, Index* iteration,
                          std::string* rng_state) {
  Archive ar{read_tar(path)};
  const json manifest = json::parse(ar.find("manifest.json").data);
  CheckpointInfo info = info_from_manifest(manifest);
  auto params = model.params();
  const json& plist = manifest.at("params");
  if (plist.size() != params.size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (plist[i].at("name").get<std::string>() != params[i].path)
      throw std::runtime_error("checkpoint: parameter order mismatch at " +
                               params[i].path);
    blob_into(ar.find("params/" + params[i].path + ".bin").data,
              params[i].value, params[i].size, params[i].path);
  }
  if (opt) {
    opt->init(params);
    if (info.has_optimizer) {
      opt->steps = manifest.at("optimizer").at("steps").get<std::int64_t>();
      for (size_t i = 0; i < params.size(); ++i) {
        blob_into(ar.find("adam/" + params[i].path + ".m.bin").data,
                  opt->m[i].data(), params[i].size, params[i].path + ".m");
        blob_into(ar.find("adam/" + params[i].path + ".v.bin").data,
                  opt->v[i].data(), params[i].size, params[i].path + ".v");
      }
    }
  }
  if (iteration) *iteration = info.iteration;
  if (rng_state) *rng_state = info.rng_state;
}

Model<float> load_checkpoint_model(const std::string& path,
                                   CheckpointInfo* info_out) {
  CheckpointInfo info = read_checkpoint_info(path);
  Model<float> model(info.model);
  load_checkpoint_into(path, model, nullptr, nullptr, nullptr);
  if (info_out) *info_out = info;
  return model;
}

}  // namespace vdm
