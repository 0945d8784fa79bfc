// Lightweight view of a named parameter array; modules expose these for the
// optimizer, checkpointing, and parameter counting.
#pragma once

#include <string>
#include <vector>

#include "vdm/rng.hpp"
#include "vdm/tensor.hpp"

namespace vdm {

template <typename S>
struct ParamRef {
  std::string path;
  std::vector<Index> shape;
  S* value = nullptr;
  S* grad = nullptr;
  Index size = 0;
};

template <typename S>
Index total_param_count(const std::vector<ParamRef<S>>& params) {
  Index total = 0;
  for (const auto& p : params) total += p.size;
  return total;
}

template <typename S>
void zero_grads(std::vector<ParamRef<S>>& params) {
  for (auto& p : params)
    Eigen::Map<VecX<S>>(p.grad, p.size).setZero();
}

}  // namespace vdm
