// Central finite-difference gradient checker. The function under test is
// scalar-reduced (sum of outputs); the caller supplies the analytic gradient
// for each input buffer. Relative error is |a-n| / max(1, |a|, |n|).
#pragma once

#include <functional>
#include <vector>

#include "vdm/tensor.hpp"

namespace vdm {

template <typename S>
struct GradCheckInput {
  S* data = nullptr;
  Index size = 0;
  const S* analytic = nullptr;  // same length as data
};

template <typename S>
S grad_check(const std::function<S()>& f,
             const std::vector<GradCheckInput<S>>& inputs, S eps) {
  S max_rel = S(0);
  for (const auto& in : inputs) {
    for (Index i = 0; i < in.size; ++i) {
      const S saved = in.data[i];
      in.data[i] = saved + eps;
      const S fp = f();
      in.data[i] = saved - eps;
      const S fm = f();
      in.data[i] = saved;
      if (!std::isfinite(double(fp)) || !std::isfinite(double(fm)))
        throw std::runtime_error("grad_check: non-finite evaluation");
      const S numeric = (fp - fm) / (S(2) * eps);
      const S analytic = in.analytic[i];
      const S denom = std::max(
          S(1), std::max(std::abs(analytic), std::abs(numeric)));
      max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
  }
  return max_rel;
}

}  // namespace vdm
