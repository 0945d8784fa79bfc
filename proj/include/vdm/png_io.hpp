// 8-bit PNG frame IO. Frames are (1, 3, H, W) tensors in [0,1]; writing
// rounds to the 8-bit lattice, reading maps back by /255.
#pragma once

#include <string>

#include "vdm/tensor.hpp"

namespace vdm {

Tensor4f read_png(const std::string& path);
void write_png(const std::string& path, const Tensor4f& frame);

}  // namespace vdm
