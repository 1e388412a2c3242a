#include "urcod/peg.hpp"

#include <stdexcept>

namespace urcod {

Eigen::ArrayXd atrous_conv(const Eigen::ArrayXd& x, const Eigen::ArrayXd& w, int rate) {
  if (rate < 1) throw std::invalid_argument("atrous_conv: rate must be >= 1");
  const int n = static_cast<int>(x.size());
  const int k = static_cast<int>(w.size());
  const int support = rate * (k - 1) + 1;
  if (support > n) throw std::invalid_argument("atrous_conv: filter larger than dilated support");
  const int out_n = n - support + 1;
  Eigen::ArrayXd y = Eigen::ArrayXd::Zero(out_n);
  for (int i = 0; i < out_n; ++i)
    for (int j = 0; j < k; ++j) y(i) += x(i + rate * j) * w(j);
  return y;
}

DacBlock::DacBlock(const DacConfig& cfg_, std::mt19937_64& rng) : cfg(cfg_) {
  for (const auto& rates : cfg.branch_rates) {
    std::vector<nn::Conv2dLayer> branch;
    for (int r : rates) {
      const int pad = r * (cfg.kernel - 1) / 2;
      branch.emplace_back(cfg.channels, cfg.channels, cfg.kernel, 1, pad, r, rng);
    }
    branches.push_back(std::move(branch));
  }
}

nn::Var DacBlock::operator()(const nn::Var& x) const {
  if (x->value.channels() != cfg.channels)
    throw std::invalid_argument("dac_forward: channel mismatch");
  nn::Var out = x;  // residual
  for (const auto& branch : branches) {
    nn::Var v = x;
    for (std::size_t i = 0; i < branch.size(); ++i) {
      v = branch[i](v);
      if (i + 1 < branch.size()) v = nn::relu(v);
    }
    out = nn::add(out, v);
  }
  return out;
}

void DacBlock::collect(const std::string& prefix, nn::ParamList& out) const {
  for (std::size_t bi = 0; bi < branches.size(); ++bi)
    for (std::size_t ci = 0; ci < branches[bi].size(); ++ci)
      branches[bi][ci].collect(
          prefix + ".b" + std::to_string(bi) + ".c" + std::to_string(ci), out);
}

RmpBlock::RmpBlock(int channels, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < kKernels.size(); ++i)
    reducers[i] = nn::Conv2dLayer(channels, 1, 1, 1, 0, 1, rng);
}

nn::Var RmpBlock::operator()(const nn::Var& x) const {
  const int h = x->value.height();
  const int w = x->value.width();
  if (h < kKernels.back() || w < kKernels.back())
    throw std::invalid_argument("rmp_forward: input smaller than largest pooling kernel");
  std::vector<nn::Var> parts{x};
  for (std::size_t i = 0; i < kKernels.size(); ++i) {
    nn::Var pooled = nn::max_pool(x, kKernels[i]);
    parts.push_back(nn::upsample_nearest(reducers[i](pooled), h, w));
  }
  return nn::concat(parts);
}

void RmpBlock::collect(const std::string& prefix, nn::ParamList& out) const {
  for (std::size_t i = 0; i < reducers.size(); ++i)
    reducers[i].collect(prefix + ".r" + std::to_string(i), out);
}

PegModel::PegModel(int input_size_, const DacConfig& dac_cfg_, const EdgeLossConfig& loss_cfg_,
                   std::uint64_t seed)
    : input_size(input_size_), dac_cfg(dac_cfg_), loss_cfg(loss_cfg_) {
  std::mt19937_64 rng(seed);
  dac_cfg.channels = 64;
  backbone = nn::EncDec(3, {16, 32, 64, 64}, 64, rng);
  dac = DacBlock(dac_cfg, rng);
  rmp = RmpBlock(dac_cfg.channels, rng);
  fuse = nn::Conv2dLayer(dac_cfg.channels + 4, dac_cfg.channels, 1, 1, 0, 1, rng);
  head = nn::Conv2dLayer(backbone.channels[0], 1, 1, 1, 0, 1, rng);
}

nn::Var PegModel::forward(const nn::Var& image) const {
  auto context = [this](const nn::Var& deep) { return nn::relu(fuse(rmp(dac(deep)))); };
  return nn::sigmoid(head(backbone.trunk(image, context)));
}

ProbMap PegModel::predict(const RgbImage& image) const {
  if (image.height() != input_size || image.width() != input_size)
    throw std::invalid_argument("peg_forward: image size does not match model input size");
  return forward(nn::constant(nn::from_rgb(image)))->value.ch[0];
}

nn::ParamList PegModel::params() const {
  nn::ParamList out;
  backbone.collect("peg.backbone", out);
  dac.collect("peg.dac", out);
  rmp.collect("peg.rmp", out);
  fuse.collect("peg.fuse", out);
  head.collect("peg.head", out);
  return out;
}

}  // namespace urcod
