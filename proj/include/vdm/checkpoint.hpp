// Checkpoints are single tar archives: manifest.json (parameter names,
// shapes, dtype float32-le, model + train config, iteration, RNG state) plus
// one raw little-endian float32 blob per parameter under params/, and Adam
// moment blobs under adam/ when optimizer state is saved. Round trips are
// bit-exact and identical runs produce byte-identical archives.
#pragma once

#include <optional>
#include <string>

#include "vdm/model.hpp"
#include "vdm/train.hpp"

namespace vdm {

void save_checkpoint(const std::string& path, Model<float>& model,
                     const TrainConfig* train_cfg, const Adam<float>* opt,
                     Index iteration, const std::string& rng_state);

struct CheckpointInfo {
  ModelConfig model;
  std::optional<TrainConfig> train;
  Index iteration = 0;
  std::string rng_state;
  bool has_optimizer = false;
};

CheckpointInfo read_checkpoint_info(const std::string& path);

Model<float> load_checkpoint_model(const std::string& path,
                                   CheckpointInfo* info = nullptr);

// Restores parameters (and optimizer state when present) into an existing
// model built from the same config.
void load_checkpoint_into(const std::string& path, Model<float>& model,
                          Adam<float>* opt, Index* iteration,
                          std::string* rng_state);

}  // namespace vdm
