#include "vdm/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace vdm {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace((unsigned char)s[a])) ++a;
  while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
  return s.substr(a, b - a);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

bool ConfigTable::has(const std::string& section, const std::string& key) const {
  auto it = sections.find(section);
  return it != sections.end() && it->second.count(key) > 0;
}

std::string ConfigTable::get_str(const std::string& section,
                                 const std::string& key) const {
  auto it = sections.find(section);
  if (it == sections.end() || !it->second.count(key))
    throw UsageError("config: missing key " + section + "." + key);
  return unquote(it->second.at(key));
}

std::int64_t ConfigTable::get_int(const std::string& section,
                                  const std::string& key) const {
  const std::string v = get_str(section, key);
  try {
    size_t pos = 0;
    const std::int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw UsageError("config: " + section + "." + key + " is not an integer: " + v);
  }
}

double ConfigTable::get_double(const std::string& section,
                               const std::string& key) const {
  const std::string v = get_str(section, key);
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw UsageError("config: " + section + "." + key + " is not a number: " + v);
  }
}

bool ConfigTable::get_bool(const std::string& section,
                           const std::string& key) const {
  const std::string v = get_str(section, key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError("config: " + section + "." + key + " is not a bool: " + v);
}

void ConfigTable::set(const std::string& section, const std::string& key,
                      const std::string& value) {
  sections[section][key] = value;
}

ConfigTable parse_config_text(const std::string& text) {
  ConfigTable t;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw UsageError("config: bad table header at line " +
                         std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      t.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config: expected key = value at line " +
                       std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw UsageError("config: empty key or value at line " +
                       std::to_string(lineno));
    t.sections[section][key] = value;
  }
  return t;
}

ConfigTable parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------

Task task_from_string(const std::string& s) {
  if (s == "Deinterlace" || s == "deinterlace") return Task::Deinterlace;
  if (s == "Demosaic" || s == "demosaic") return Task::Demosaic;
  throw UsageError("unknown task: " + s);
}

AlignVariant align_variant_from_string(const std::string& s) {
  if (s == "DfConv") return AlignVariant::DfConv;
  if (s == "Df") return AlignVariant::Df;
  if (s == "DfRes") return AlignVariant::DfRes;
  throw UsageError("unknown align variant: " + s);
}

AttentionVariant attention_variant_from_string(const std::string& s) {
  if (s == "SA") return AttentionVariant::SA;
  if (s == "kSA") return AttentionVariant::kSA;
  if (s == "EkSA") return AttentionVariant::EkSA;
  if (s == "None") return AttentionVariant::None;
  throw UsageError("unknown attention variant: " + s);
}

FusionMode fusion_from_string(const std::string& s) {
  if (s == "Add") return FusionMode::Add;
  if (s == "Concat") return FusionMode::Concat;
  throw UsageError("unknown fusion mode: " + s);
}

ReconMode recon_mode_from_string(const std::string& s) {
  if (s == "Separate") return ReconMode::Separate;
  if (s == "Single") return ReconMode::Single;
  throw UsageError("unknown recon mode: " + s);
}

FieldParity parity_from_string(const std::string& s) {
  if (s == "Odd" || s == "odd") return FieldParity::Odd;
  if (s == "Even" || s == "even") return FieldParity::Even;
  throw UsageError("unknown field parity: " + s);
}

// ---------------------------------------------------------------------------

void apply_model_config(const ConfigTable& t, ModelConfig& cfg) {
  const std::string m = "model", a = "model.attention";
  if (t.has(m, "task")) cfg.task = task_from_string(t.get_str(m, "task"));
  if (t.has(m, "channels")) cfg.channels = Index(t.get_int(m, "channels"));
  if (t.has(m, "feature_res_blocks"))
    cfg.feature_res_blocks = Index(t.get_int(m, "feature_res_blocks"));
  if (t.has(m, "align_blocks"))
    cfg.align_blocks = Index(t.get_int(m, "align_blocks"));
  if (t.has(m, "align_variant"))
    cfg.align_variant = align_variant_from_string(t.get_str(m, "align_variant"));
  if (t.has(m, "fusion")) cfg.fusion = fusion_from_string(t.get_str(m, "fusion"));
  if (t.has(m, "recon_mode"))
    cfg.recon_mode = recon_mode_from_string(t.get_str(m, "recon_mode"));
  if (t.has(m, "recon_depth"))
    cfg.recon_depth = Index(t.get_int(m, "recon_depth"));
  if (t.has(m, "deform_groups"))
    cfg.deform_groups = Index(t.get_int(m, "deform_groups"));
  if (t.has(m, "seed")) cfg.seed = std::uint64_t(t.get_int(m, "seed"));
  if (t.has(a, "variant"))
    cfg.attention.variant =
        attention_variant_from_string(t.get_str(a, "variant"));
  if (t.has(a, "k")) cfg.attention.k = Index(t.get_int(a, "k"));
  if (t.has(a, "residual")) cfg.attention.residual = t.get_bool(a, "residual");
  if (t.has(a, "scale_init"))
    cfg.attention.scale_init = t.get_double(a, "scale_init");
}

void apply_train_config(const ConfigTable& t, TrainConfig& cfg) {
  const std::string s = "train";
  if (t.has(s, "iterations")) cfg.iterations = Index(t.get_int(s, "iterations"));
  if (t.has(s, "batch_size")) cfg.batch_size = Index(t.get_int(s, "batch_size"));
  if (t.has(s, "patch_h")) cfg.patch_h = Index(t.get_int(s, "patch_h"));
  if (t.has(s, "patch_w")) cfg.patch_w = Index(t.get_int(s, "patch_w"));
  if (t.has(s, "lr0")) cfg.lr0 = t.get_double(s, "lr0");
  if (t.has(s, "lr_min")) cfg.lr_min = t.get_double(s, "lr_min");
  if (t.has(s, "beta1")) cfg.beta1 = t.get_double(s, "beta1");
  if (t.has(s, "beta2")) cfg.beta2 = t.get_double(s, "beta2");
  if (t.has(s, "grad_clip")) cfg.grad_clip = t.get_double(s, "grad_clip");
  if (t.has(s, "seed")) cfg.seed = std::uint64_t(t.get_int(s, "seed"));
  if (t.has(s, "checkpoint_every"))
    cfg.checkpoint_every = Index(t.get_int(s, "checkpoint_every"));
  if (t.has(s, "first_parity"))
    cfg.first_parity = parity_from_string(t.get_str(s, "first_parity"));
  if (t.has(s, "pattern")) cfg.pattern = cfa_from_string(t.get_str(s, "pattern"));
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ConfigTable to_table(const ModelConfig& m, const TrainConfig& t) {
  ConfigTable tab;
  tab.set("model", "task", '"' + to_string(m.task) + '"');
  tab.set("model", "channels", std::to_string(m.channels));
  tab.set("model", "feature_res_blocks", std::to_string(m.feature_res_blocks));
  tab.set("model", "align_blocks", std::to_string(m.align_blocks));
  tab.set("model", "align_variant", '"' + to_string(m.align_variant) + '"');
  tab.set("model", "fusion", '"' + to_string(m.fusion) + '"');
  tab.set("model", "recon_mode", '"' + to_string(m.recon_mode) + '"');
  tab.set("model", "recon_depth", std::to_string(m.recon_depth));
  tab.set("model", "deform_groups", std::to_string(m.deform_groups));
  tab.set("model", "seed", std::to_string(m.seed));
  tab.set("model.attention", "variant",
          '"' + to_string(m.attention.variant) + '"');
  tab.set("model.attention", "k", std::to_string(m.attention.k));
  tab.set("model.attention", "residual",
          m.attention.residual ? "true" : "false");
  tab.set("model.attention", "scale_init", fmt_double(m.attention.scale_init));
  tab.set("train", "iterations", std::to_string(t.iterations));
  tab.set("train", "batch_size", std::to_string(t.batch_size));
  tab.set("train", "patch_h", std::to_string(t.patch_h));
  tab.set("train", "patch_w", std::to_string(t.patch_w));
  tab.set("train", "lr0", fmt_double(t.lr0));
  tab.set("train", "lr_min", fmt_double(t.lr_min));
  tab.set("train", "beta1", fmt_double(t.beta1));
  tab.set("train", "beta2", fmt_double(t.beta2));
  tab.set("train", "grad_clip", fmt_double(t.grad_clip));
  tab.set("train", "seed", std::to_string(t.seed));
  tab.set("train", "checkpoint_every", std::to_string(t.checkpoint_every));
  tab.set("train", "first_parity", '"' + to_string(t.first_parity) + '"');
  tab.set("train", "pattern", '"' + to_string(t.pattern) + '"');
  return tab;
}

std::string serialize_config(const ConfigTable& t) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [section, kv] : t.sections) {
    if (!first) os << '\n';
    first = false;
    if (!section.empty()) os << '[' << section << "]\n";
    for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
  }
  return os.str();
}

void write_resolved_config(const std::string& out_dir, const ModelConfig& m,
                           const TrainConfig& t) {
  std::ofstream out(out_dir + "/resolved.toml");
  if (!out)
    throw std::runtime_error("cannot write resolved config under " + out_dir);
  out << serialize_config(to_table(m, t));
}

}  // namespace vdm
