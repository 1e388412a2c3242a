#include "urcod/nn/layers.hpp"

#include <cmath>

namespace urcod::nn {

Var slice_rows(const Var& x, int from, int count) {
  Tensor out;
  out.ch.push_back(x->value.ch[0].block(from, 0, count, x->value.ch[0].cols()));
  auto n = std::make_shared<Node>();
  n->value = std::move(out);
  n->requires_grad = x->requires_grad;
  if (n->requires_grad) {
    n->parents = {x};
    n->backprop = [from, count](Node& node) {
      Var& p = node.parents[0];
      if (p->requires_grad)
        p->grad.ch[0].block(from, 0, count, node.grad.ch[0].cols()) += node.grad.ch[0];
    };
  }
  return n;
}

namespace {

Tensor normal_init(int rows, int cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Eigen::ArrayXXd a(rows, cols);
  for (int x = 0; x < cols; ++x)
    for (int y = 0; y < rows; ++y) a(y, x) = dist(rng);
  return Tensor(std::move(a));
}

}  // namespace

Conv2dLayer::Conv2dLayer(int cin, int cout, int kernel, int stride, int pad, int dilation,
                         std::mt19937_64& rng) {
  spec = {cin, cout, kernel, stride, pad, dilation};
  const int fan_in = cin * kernel * kernel;
  w = parameter(normal_init(cout, fan_in, std::sqrt(2.0 / fan_in), rng));
  b = parameter(Tensor::zeros(1, cout, 1));
}

LinearLayer::LinearLayer(int in, int out, std::mt19937_64& rng) {
  w = parameter(normal_init(out, in, std::sqrt(2.0 / in), rng));
  b = parameter(Tensor::zeros(1, out, 1));
}

EncDec::EncDec(int in_channels, std::array<int, 4> chans, int bottleneck_channels,
               std::mt19937_64& rng)
    : channels(chans),
      e1(in_channels, chans[0], 3, 2, 1, 1, rng),
      e2(chans[0], chans[1], 3, 2, 1, 1, rng),
      e3(chans[1], chans[2], 3, 2, 1, 1, rng),
      e4(chans[2], chans[3], 3, 1, 1, 1, rng),
      d1(bottleneck_channels + chans[1], chans[1], 3, 1, 1, 1, rng),
      d2(chans[1] + chans[0], chans[0], 3, 1, 1, 1, rng),
      d3(chans[0], chans[0], 3, 1, 1, 1, rng) {}

Var EncDec::trunk(const Var& input, const std::function<Var(const Var&)>& bottleneck) const {
  const int h = input->value.height();
  const int w = input->value.width();
  Var a1 = relu(e1(input));            // /2
  Var a2 = relu(e2(a1));               // /4
  Var a3 = relu(e3(a2));               // /8
  Var a4 = relu(e4(a3));               // /8
  Var deep = bottleneck(a4);
  Var u1 = relu(d1(concat({upsample_nearest(deep, h / 4, w / 4), a2})));  // /4
  Var u2 = relu(d2(concat({upsample_nearest(u1, h / 2, w / 2), a1})));    // /2
  return relu(d3(upsample_nearest(u2, h, w)));                            // /1
}

void EncDec::collect(const std::string& prefix, ParamList& out) const {
  e1.collect(prefix + ".e1", out);
  e2.collect(prefix + ".e2", out);
  e3.collect(prefix + ".e3", out);
  e4.collect(prefix + ".e4", out);
  d1.collect(prefix + ".d1", out);
  d2.collect(prefix + ".d2", out);
  d3.collect(prefix + ".d3", out);
}

}  // namespace urcod::nn
