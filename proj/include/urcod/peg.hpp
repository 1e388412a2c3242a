#pragma once

#include "urcod/nn/layers.hpp"
#include "urcod/types.hpp"

#include <random>
#include <vector>

namespace urcod {

/// 1-D atrous (dilated) convolution, valid positions only:
///   y[i] = sum_k x[i + r*k] * w[k].
/// Throws when the dilated filter exceeds the input support.
Eigen::ArrayXd atrous_conv(const Eigen::ArrayXd& x, const Eigen::ArrayXd& w, int rate);

struct DacConfig {
  std::vector<std::vector<int>> branch_rates = {{1}, {1, 3}, {1, 3, 5}, {1, 3, 5, 7}};
  int channels = 64;
  int kernel = 3;
};

struct EdgeLossConfig {
  double flooding_level = 0.02;
};

/// Dense-atrous-convolution block: cascading dilated-conv branches summed
/// residually onto the input. Spatial size preserved by symmetric zero padding.
struct DacBlock {
  DacConfig cfg;
  std::vector<std::vector<nn::Conv2dLayer>> branches;

  DacBlock() = default;
  DacBlock(const DacConfig& cfg, std::mt19937_64& rng);

  nn::Var operator()(const nn::Var& x) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

/// Residual multi-kernel pooling: max pools at kernels 2/3/5/6, each reduced
/// to one channel by a 1x1 conv, upsampled and concatenated (channels + 4).
struct RmpBlock {
  static constexpr std::array<int, 4> kKernels{2, 3, 5, 6};
  std::array<nn::Conv2dLayer, 4> reducers;

  RmpBlock() = default;
  RmpBlock(int channels, std::mt19937_64& rng);

  nn::Var operator()(const nn::Var& x) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

/// Pseudo-edge generator: strided conv encoder, DAC + RMP context blocks and a
/// skip-connected decoder ending in a sigmoid edge map.
struct PegModel {
  int input_size = 64;
  DacConfig dac_cfg;
  EdgeLossConfig loss_cfg;
  nn::EncDec backbone;
  DacBlock dac;
  RmpBlock rmp;
  nn::Conv2dLayer fuse;  // 1x1 back to trunk channels after RMP concat
  nn::Conv2dLayer head;  // 1x1 to a single edge channel

  PegModel() = default;
  PegModel(int input_size, const DacConfig& dac_cfg, const EdgeLossConfig& loss_cfg,
           std::uint64_t seed);

  nn::Var forward(const nn::Var& image) const;
  ProbMap predict(const RgbImage& image) const;
  nn::ParamList params() const;
};

}  // namespace urcod
