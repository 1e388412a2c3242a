#pragma once

#include "urcod/types.hpp"

#include <vector>

namespace urcod::nn {

/// Dense C×H×W tensor; each channel is an Eigen array (col-major H×W).
struct Tensor {
  std::vector<Eigen::ArrayXXd> ch;

  Tensor() = default;
  explicit Tensor(Eigen::ArrayXXd plane) { ch.push_back(std::move(plane)); }

  static Tensor zeros(int c, int h, int w) {
    Tensor t;
    t.ch.assign(c, Eigen::ArrayXXd::Zero(h, w));
    return t;
  }
  static Tensor scalar(double v) {
    Tensor t;
    t.ch.push_back(Eigen::ArrayXXd::Constant(1, 1, v));
    return t;
  }

  int channels() const { return static_cast<int>(ch.size()); }
  int height() const { return ch.empty() ? 0 : static_cast<int>(ch[0].rows()); }
  int width() const { return ch.empty() ? 0 : static_cast<int>(ch[0].cols()); }
  std::size_t size() const {
    return ch.empty() ? 0 : ch.size() * static_cast<std::size_t>(ch[0].size());
  }
  double item() const { return ch[0](0, 0); }

  bool same_shape(const Tensor& o) const {
    return channels() == o.channels() && height() == o.height() && width() == o.width();
  }
};

inline Tensor from_rgb(const RgbImage& img) {
  Tensor t;
  t.ch = {img.r, img.g, img.b};
  return t;
}

}  // namespace urcod::nn
