// Dense N x C x H x W tensor on a flat Eigen array, templated on scalar.
// Layout is row-major: index ((n*C + c)*H + h)*W + w, so a (channel, item)
// slice maps onto an Eigen matrix without copying.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vdm {

using Index = Eigen::Index;

template <typename S>
using VecX = Eigen::Array<S, Eigen::Dynamic, 1>;

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(Index n, Index c, Index h, Index w)
      : n_(n), c_(c), h_(h), w_(w), data_(VecX<S>::Zero(n * c * h * w)) {
    if (n < 1 || c < 1 || h < 1 || w < 1)
      throw std::invalid_argument("Tensor4: all dimensions must be >= 1");
  }

  Index n() const { return n_; }
  Index c() const { return c_; }
  Index h() const { return h_; }
  Index w() const { return w_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  S& operator()(Index n, Index c, Index h, Index w) {
    return data_[((n * c_ + c) * h_ + h) * w_ + w];
  }
  S operator()(Index n, Index c, Index h, Index w) const {
    return data_[((n * c_ + c) * h_ + h) * w_ + w];
  }

  VecX<S>& flat() { return data_; }
  const VecX<S>& flat() const { return data_; }
  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  bool same_shape(const Tensor4& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  std::string shape_str() const {
    return std::to_string(n_) + "x" + std::to_string(c_) + "x" +
           std::to_string(h_) + "x" + std::to_string(w_);
  }

  void set_zero() { data_.setZero(); }

  // (C) x (H*W) view of one batch item
  Eigen::Map<RowMat<S>> item_matrix(Index n) {
    return {data() + n * c_ * h_ * w_, c_, h_ * w_};
  }
  Eigen::Map<const RowMat<S>> item_matrix(Index n) const {
    return {data() + n * c_ * h_ * w_, c_, h_ * w_};
  }

  // (H) x (W) view of one plane
  Eigen::Map<RowMat<S>> plane(Index n, Index c) {
    return {data() + (n * c_ + c) * h_ * w_, h_, w_};
  }
  Eigen::Map<const RowMat<S>> plane(Index n, Index c) const {
    return {data() + (n * c_ + c) * h_ * w_, h_, w_};
  }

  template <typename T>
  Tensor4<T> cast() const {
    Tensor4<T> out(n_, c_, h_, w_);
    out.flat() = data_.template cast<T>();
    return out;
  }

 private:
  Index n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  VecX<S> data_;
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

template <typename S>
S max_abs_diff(const Tensor4<S>& a, const Tensor4<S>& b) {
  if (!a.same_shape(b))
    throw std::invalid_argument("max_abs_diff: shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
  return (a.flat() - b.flat()).abs().maxCoeff();
}

template <typename S>
void check_same_shape(const Tensor4<S>& a, const Tensor4<S>& b,
                      const char* who) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(who) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

}  // namespace vdm
