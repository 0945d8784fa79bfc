// Config file surface: a key = value format with nested [tables] whose keys
// mirror the ModelConfig and TrainConfig field names exactly. Flag overrides
// come in as "section.key=value" strings; the fully resolved config is
// echoed next to every run's outputs.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vdm/model.hpp"
#include "vdm/train.hpp"

namespace vdm {

// CLI-level misuse and malformed configs exit with code 2.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigTable {
 public:
  // section -> key -> raw value text
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has(const std::string& section, const std::string& key) const;
  std::string get_str(const std::string& section, const std::string& key) const;
  std::int64_t get_int(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key,
           const std::string& value);
};

ConfigTable parse_config_text(const std::string& text);
ConfigTable parse_config_file(const std::string& path);

// enum <-> string (to_string overloads live with the enums)
Task task_from_string(const std::string& s);
AlignVariant align_variant_from_string(const std::string& s);
AttentionVariant attention_variant_from_string(const std::string& s);
FusionMode fusion_from_string(const std::string& s);
ReconMode recon_mode_from_string(const std::string& s);
FieldParity parity_from_string(const std::string& s);

// table <-> typed configs; apply_* only touches keys present in the table
void apply_model_config(const ConfigTable& t, ModelConfig& cfg);
void apply_train_config(const ConfigTable& t, TrainConfig& cfg);
ConfigTable to_table(const ModelConfig& m, const TrainConfig& t);
std::string serialize_config(const ConfigTable& t);

// resolved-config echo written into every run's output directory
void write_resolved_config(const std::string& out_dir, const ModelConfig& m,
                           const TrainConfig& t);

}  // namespace vdm
