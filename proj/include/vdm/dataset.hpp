// On-disk dataset layout: one directory per clip holding zero-padded,
// lexicographically ordered 8-bit PNG frames (000000.png, ...). Degraded
// clips carry a meta.json with the task, parity/pattern, and source
// dimensions.
#pragma once

#include <string>
#include <vector>

#include "vdm/degrade.hpp"
#include "vdm/tensor.hpp"

namespace vdm {

std::vector<std::string> list_clip_dirs(const std::string& dataset_dir);
std::vector<std::string> list_pngs(const std::string& clip_dir);

Tensor4f load_clip_frames(const std::string& clip_dir);  // (T, 3, H, W)
void save_clip_frames(const std::string& clip_dir, const Tensor4f& frames);

struct DegradedMeta {
  Task task = Task::Deinterlace;
  FieldParity first_parity = FieldParity::Odd;  // interlace
  CfaPattern pattern = CfaPattern::RGGB;        // mosaic
  Index source_height = 0;
  Index source_width = 0;
  Index frames = 0;
};

void write_meta(const std::string& clip_dir, const DegradedMeta& meta);
DegradedMeta read_meta(const std::string& clip_dir);
bool has_meta(const std::string& clip_dir);

InterlacedSequence<float> load_interlaced(const std::string& clip_dir,
                                          const DegradedMeta& meta);
MosaicSequence<float> load_mosaic(const std::string& clip_dir,
                                  const DegradedMeta& meta);

}  // namespace vdm
