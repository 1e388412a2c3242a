#pragma once

#include "urcod/nn/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace urcod::nn {

struct Node;
using Var = std::shared_ptr<Node>;

/// One node of the reverse-mode tape. `backprop` reads this node's grad and
/// accumulates into the parents' grads.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void(Node&)> backprop;

  void ensure_grad() {
    if (grad.ch.empty()) grad = Tensor::zeros(value.channels(), value.height(), value.width());
  }
  void zero_grad() { grad.ch.clear(); }
};

Var constant(Tensor value);
Var parameter(Tensor value);

/// Reverse pass from a scalar root; seeds d(root)/d(root) = seed.
void backward(const Var& root, double seed = 1.0);

struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 0;
  int dilation = 1;
};

/// x: Cin×H×W; weight: single-channel (Cout × Cin·k·k); bias: single-channel
/// (Cout × 1) or nullptr. im2col + GEMM, zero padding.
Var conv2d(const Var& x, const Var& weight, const Var& bias, const ConvSpec& spec);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var exp_(const Var& x);
Var abs_(const Var& x);
Var clamp(const Var& x, double lo, double hi);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double s);
Var add_scalar(const Var& x, double s);

Var concat(const std::vector<Var>& xs);
Var slice_channels(const Var& x, int from, int count);

Var max_pool(const Var& x, int kernel);  // stride = kernel, floor
Var upsample_nearest(const Var& x, int out_h, int out_w);
Var global_avg_pool(const Var& x);  // -> single channel C×1

/// x: single-channel n×1; weight: single-channel m×n; bias: m×1 or nullptr.
Var linear(const Var& x, const Var& weight, const Var& bias);

/// vec: single-channel d×1 -> d channels of constant h×w planes.
Var broadcast_plane(const Var& vec, int h, int w);

Var sum_all(const Var& x);
Var mean_all(const Var& x);

}  // namespace urcod::nn
