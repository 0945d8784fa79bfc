// Deterministic RNG. All randomness in the project flows through this
// wrapper so that seed + iteration fully determine every draw; data order
// during training is derived per iteration via Rng::mix, which makes
// checkpoint resume exact.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "vdm/tensor.hpp"

namespace vdm {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // [0,1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(uniform() * double(hi - lo + 1));
  }

  // Box-Muller; draws two uniforms per call so the engine state stays
  // serializable without a cached spare.
  double normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

  // splitmix64 combine, for deriving per-iteration streams
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

template <typename S>
void fill_uniform(Tensor4<S>& t, Rng& rng, double lo, double hi) {
  for (Index i = 0; i < t.size(); ++i)
    t.flat()[i] = static_cast<S>(rng.uniform(lo, hi));
}

template <typename S>
void fill_normal(Tensor4<S>& t, Rng& rng, double sigma) {
  for (Index i = 0; i < t.size(); ++i)
    t.flat()[i] = static_cast<S>(rng.normal() * sigma);
}

}  // namespace vdm
