#pragma once

#include "urcod/nn/autograd.hpp"

#include <random>
#include <string>
#include <vector>

namespace urcod::nn {

struct ParamRef {
  std::string name;
  Var var;
};
using ParamList = std::vector<ParamRef>;

/// Row slice of a single-channel tensor.
Var slice_rows(const Var& x, int from, int count);

struct Conv2dLayer {
  ConvSpec spec;
  Var w, b;

  Conv2dLayer() = default;
  Conv2dLayer(int cin, int cout, int kernel, int stride, int pad, int dilation,
              std::mt19937_64& rng);

  Var operator()(const Var& x) const { return conv2d(x, w, b, spec); }
  void collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
  }
};

struct LinearLayer {
  Var w, b;

  LinearLayer() = default;
  LinearLayer(int in, int out, std::mt19937_64& rng);

  Var operator()(const Var& x) const { return linear(x, w, b); }
  void collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
  }
};

/// 4-stage strided conv encoder (/8 overall) with a mirrored skip-connected
/// decoder back to full resolution. A bottleneck functor transforms the
/// deepest features; the trunk output has channels[0] channels at input size.
struct EncDec {
  std::array<int, 4> channels{16, 32, 64, 64};
  Conv2dLayer e1, e2, e3, e4;
  Conv2dLayer d1, d2, d3;

  EncDec() = default;
  EncDec(int in_channels, std::array<int, 4> chans, int bottleneck_channels, std::mt19937_64& rng);

  Var trunk(const Var& input, const std::function<Var(const Var&)>& bottleneck) const;
  Var trunk(const Var& input) const {
    return trunk(input, [](const Var& v) { return v; });
  }
  void collect(const std::string& prefix, ParamList& out) const;
};

}  // namespace urcod::nn
