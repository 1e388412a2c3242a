#include "urcod/nn/autograd.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <unordered_set>

namespace urcod::nn {

namespace {

using Eigen::MatrixXd;
using MatMap = Eigen::Map<MatrixXd>;
using ConstMatMap = Eigen::Map<const MatrixXd>;

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || (p && p->requires_grad);
  n->requires_grad = needs;
  if (needs) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

Var parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

void backward(const Var& root, double seed) {
  if (root->value.size() != 1) throw std::invalid_argument("backward: root must be scalar");
  if (!root->requires_grad) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  // iterative post-order DFS
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad.ch[0](0, 0) += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop) {
      for (auto& p : n->parents)
        if (p && p->requires_grad) p->ensure_grad();
      n->backprop(*n);
    }
  }
}

// ---------------------------------------------------------------- conv2d

namespace {

struct ColPlan {
  int h_in, w_in, oh, ow, n;  // n = oh*ow
};

// Fills one (ci,ky,kx) feature column of the im2col matrix.
template <typename F>
void for_valid_positions(const ColPlan& pl, const ConvSpec& sp, int ky, int kx, F&& fn) {
  const int dy = ky * sp.dilation - sp.pad;
  const int dx = kx * sp.dilation - sp.pad;
  // valid oy: 0 <= oy*stride + dy < h_in
  int oy0 = 0;
  while (oy0 * sp.stride + dy < 0) ++oy0;
  int oy1 = pl.oh - 1;
  while (oy1 >= 0 && oy1 * sp.stride + dy >= pl.h_in) --oy1;
  if (oy1 < oy0) return;
  const int count = oy1 - oy0 + 1;
  for (int ox = 0; ox < pl.ow; ++ox) {
    const int ix = ox * sp.stride + dx;
    if (ix < 0 || ix >= pl.w_in) continue;
    fn(ox, oy0, count, oy0 * sp.stride + dy, ix);
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& weight, const Var& bias, const ConvSpec& spec) {
  const Tensor& in = x->value;
  if (in.channels() != spec.in_channels) throw std::invalid_argument("conv2d: channel mismatch");
  const int m = spec.in_channels * spec.kernel * spec.kernel;
  if (weight->value.height() != spec.out_channels || weight->value.width() != m)
    throw std::invalid_argument("conv2d: weight shape mismatch");

  ColPlan pl;
  pl.h_in = in.height();
  pl.w_in = in.width();
  pl.oh = (pl.h_in + 2 * spec.pad - spec.dilation * (spec.kernel - 1) - 1) / spec.stride + 1;
  pl.ow = (pl.w_in + 2 * spec.pad - spec.dilation * (spec.kernel - 1) - 1) / spec.stride + 1;
  if (pl.oh < 1 || pl.ow < 1) throw std::invalid_argument("conv2d: kernel exceeds padded input");
  pl.n = pl.oh * pl.ow;

  auto cols = std::make_shared<MatrixXd>(MatrixXd::Zero(pl.n, m));
  for (int ci = 0; ci < spec.in_channels; ++ci)
    for (int ky = 0; ky < spec.kernel; ++ky)
      for (int kx = 0; kx < spec.kernel; ++kx) {
        const int col = (ci * spec.kernel + ky) * spec.kernel + kx;
        const Eigen::ArrayXXd& plane = in.ch[ci];
        for_valid_positions(pl, spec, ky, kx, [&](int ox, int oy0, int count, int iy0, int ix) {
          Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<>> src(
              &plane(iy0, ix), count, Eigen::InnerStride<>(spec.stride));
          cols->block(ox * pl.oh + oy0, col, count, 1) = src;
        });
      }

  ConstMatMap wmat(weight->value.ch[0].data(), spec.out_channels, m);
  MatrixXd out_mat = *cols * wmat.transpose();  // n × cout
  if (bias) {
    for (int co = 0; co < spec.out_channels; ++co)
      out_mat.col(co).array() += bias->value.ch[0](co, 0);
  }

  Tensor out = Tensor::zeros(spec.out_channels, pl.oh, pl.ow);
  for (int co = 0; co < spec.out_channels; ++co)
    MatMap(out.ch[co].data(), pl.oh, pl.ow) =
        Eigen::Map<const MatrixXd>(out_mat.col(co).data(), pl.oh, pl.ow);

  ConvSpec sp = spec;
  return make_node(std::move(out), {x, weight, bias},
                   [cols, sp, pl](Node& node) {
                     const Var& xin = node.parents[0];
                     const Var& w = node.parents[1];
                     const Var& b = node.parents[2];
                     const int mm = sp.in_channels * sp.kernel * sp.kernel;

                     MatrixXd g(pl.n, sp.out_channels);
                     for (int co = 0; co < sp.out_channels; ++co)
                       g.col(co) = Eigen::Map<const Eigen::VectorXd>(node.grad.ch[co].data(), pl.n);

                     if (w->requires_grad) {
                       MatMap gw(w->grad.ch[0].data(), sp.out_channels, mm);
                       gw.noalias() += g.transpose() * *cols;
                     }
                     if (b && b->requires_grad) {
                       for (int co = 0; co < sp.out_channels; ++co)
                         b->grad.ch[0](co, 0) += g.col(co).sum();
                     }
                     if (xin->requires_grad) {
                       ConstMatMap wmat(w->value.ch[0].data(), sp.out_channels, mm);
                       MatrixXd gcols = g * wmat;  // n × m
                       for (int ci = 0; ci < sp.in_channels; ++ci)
                         for (int ky = 0; ky < sp.kernel; ++ky)
                           for (int kx = 0; kx < sp.kernel; ++kx) {
                             const int col = (ci * sp.kernel + ky) * sp.kernel + kx;
                             Eigen::ArrayXXd& gx = xin->grad.ch[ci];
                             for_valid_positions(
                                 pl, sp, ky, kx,
                                 [&](int ox, int oy0, int count, int iy0, int ix) {
                                   Eigen::Map<Eigen::VectorXd, 0, Eigen::InnerStride<>> dst(
                                       &gx(iy0, ix), count, Eigen::InnerStride<>(sp.stride));
                                   dst += gcols.block(ox * pl.oh + oy0, col, count, 1);
                                 });
                           }
                     }
                   });
}

// ------------------------------------------------------------ elementwise

namespace {

template <typename Fwd, typename Bwd>
Var unary_op(const Var& x, Fwd&& fwd, Bwd&& bwd) {
  Tensor out;
  out.ch.reserve(x->value.ch.size());
  for (const auto& p : x->value.ch) out.ch.push_back(fwd(p));
  return make_node(std::move(out), {x}, [bwd](Node& node) {
    Var& xin = node.parents[0];
    if (!xin->requires_grad) return;
    for (std::size_t c = 0; c < node.grad.ch.size(); ++c)
      xin->grad.ch[c] += bwd(xin->value.ch[c], node.value.ch[c], node.grad.ch[c]);
  });
}

}  // namespace

Var relu(const Var& x) {
  return unary_op(
      x, [](const Eigen::ArrayXXd& v) { return v.cwiseMax(0.0); },
      [](const Eigen::ArrayXXd& v, const Eigen::ArrayXXd&, const Eigen::ArrayXXd& g) {
        return (g * (v > 0.0).cast<double>()).eval();
      });
}

Var sigmoid(const Var& x) {
  return unary_op(
      x, [](const Eigen::ArrayXXd& v) { return (1.0 / (1.0 + (-v).exp())).eval(); },
      [](const Eigen::ArrayXXd&, const Eigen::ArrayXXd& s, const Eigen::ArrayXXd& g) {
        return (g * s * (1.0 - s)).eval();
      });
}

Var exp_(const Var& x) {
  return unary_op(
      x, [](const Eigen::ArrayXXd& v) { return v.exp().eval(); },
      [](const Eigen::ArrayXXd&, const Eigen::ArrayXXd& e, const Eigen::ArrayXXd& g) {
        return (g * e).eval();
      });
}

Var abs_(const Var& x) {
  return unary_op(
      x, [](const Eigen::ArrayXXd& v) { return v.abs().eval(); },
      [](const Eigen::ArrayXXd& v, const Eigen::ArrayXXd&, const Eigen::ArrayXXd& g) {
        return (g * v.sign()).eval();
      });
}

Var clamp(const Var& x, double lo, double hi) {
  return unary_op(
      x, [lo, hi](const Eigen::ArrayXXd& v) { return v.cwiseMax(lo).cwiseMin(hi).eval(); },
      [lo, hi](const Eigen::ArrayXXd& v, const Eigen::ArrayXXd&, const Eigen::ArrayXXd& g) {
        return (g * ((v >= lo) && (v <= hi)).cast<double>()).eval();
      });
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out;
  for (std::size_t c = 0; c < a->value.ch.size(); ++c)
    out.ch.push_back(a->value.ch[c] + b->value.ch[c]);
  return make_node(std::move(out), {a, b}, [](Node& node) {
    for (int i = 0; i < 2; ++i) {
      Var& p = node.parents[i];
      if (!p->requires_grad) continue;
      for (std::size_t c = 0; c < node.grad.ch.size(); ++c) p->grad.ch[c] += node.grad.ch[c];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out;
  for (std::size_t c = 0; c < a->value.ch.size(); ++c)
    out.ch.push_back(a->value.ch[c] - b->value.ch[c]);
  return make_node(std::move(out), {a, b}, [](Node& node) {
    if (node.parents[0]->requires_grad)
      for (std::size_t c = 0; c < node.grad.ch.size(); ++c)
        node.parents[0]->grad.ch[c] += node.grad.ch[c];
    if (node.parents[1]->requires_grad)
      for (std::size_t c = 0; c < node.grad.ch.size(); ++c)
        node.parents[1]->grad.ch[c] -= node.grad.ch[c];
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out;
  for (std::size_t c = 0; c < a->value.ch.size(); ++c)
    out.ch.push_back(a->value.ch[c] * b->value.ch[c]);
  return make_node(std::move(out), {a, b}, [](Node& node) {
    Var& a = node.parents[0];
    Var& b = node.parents[1];
    for (std::size_t c = 0; c < node.grad.ch.size(); ++c) {
      if (a->requires_grad) a->grad.ch[c] += node.grad.ch[c] * b->value.ch[c];
      if (b->requires_grad) b->grad.ch[c] += node.grad.ch[c] * a->value.ch[c];
    }
  });
}

Var scale(const Var& x, double s) {
  return unary_op(
      x, [s](const Eigen::ArrayXXd& v) { return (v * s).eval(); },
      [s](const Eigen::ArrayXXd&, const Eigen::ArrayXXd&, const Eigen::ArrayXXd& g) {
        return (g * s).eval();
      });
}

Var add_scalar(const Var& x, double s) {
  return unary_op(
      x, [s](const Eigen::ArrayXXd& v) { return (v + s).eval(); },
      [](const Eigen::ArrayXXd&, const Eigen::ArrayXXd&, const Eigen::ArrayXXd& g) { return g; });
}

// -------------------------------------------------------------- structure

Var concat(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input");
  Tensor out;
  std::vector<int> counts;
  for (const auto& x : xs) {
    counts.push_back(x->value.channels());
    for (const auto& p : x->value.ch) out.ch.push_back(p);
  }
  return make_node(std::move(out), xs, [counts](Node& node) {
    int offset = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      Var& p = node.parents[i];
      if (p->requires_grad)
        for (int c = 0; c < counts[i]; ++c) p->grad.ch[c] += node.grad.ch[offset + c];
      offset += counts[i];
    }
  });
}

Var slice_channels(const Var& x, int from, int count) {
  Tensor out;
  for (int c = 0; c < count; ++c) out.ch.push_back(x->value.ch[from + c]);
  return make_node(std::move(out), {x}, [from, count](Node& node) {
    Var& p = node.parents[0];
    if (!p->requires_grad) return;
    for (int c = 0; c < count; ++c) p->grad.ch[from + c] += node.grad.ch[c];
  });
}

Var max_pool(const Var& x, int kernel) {
  const int h = x->value.height(), w = x->value.width();
  const int oh = h / kernel, ow = w / kernel;
  if (oh < 1 || ow < 1) throw std::invalid_argument("max_pool: input smaller than kernel");
  const int c = x->value.channels();
  Tensor out = Tensor::zeros(c, oh, ow);
  auto argmax = std::make_shared<std::vector<Eigen::ArrayXXi>>(
      c, Eigen::ArrayXXi::Zero(oh, ow));
  for (int ci = 0; ci < c; ++ci)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        int best_idx = 0;
        for (int dy = 0; dy < kernel; ++dy)
          for (int dx = 0; dx < kernel; ++dx) {
            const int iy = oy * kernel + dy, ix = ox * kernel + dx;
            if (x->value.ch[ci](iy, ix) > best) {
              best = x->value.ch[ci](iy, ix);
              best_idx = iy + ix * h;  // col-major linear index
            }
          }
        out.ch[ci](oy, ox) = best;
        (*argmax)[ci](oy, ox) = best_idx;
      }
  return make_node(std::move(out), {x}, [argmax](Node& node) {
    Var& p = node.parents[0];
    if (!p->requires_grad) return;
    for (std::size_t ci = 0; ci < node.grad.ch.size(); ++ci)
      for (int oy = 0; oy < node.grad.ch[ci].rows(); ++oy)
        for (int ox = 0; ox < node.grad.ch[ci].cols(); ++ox)
          p->grad.ch[ci].data()[(*argmax)[ci](oy, ox)] += node.grad.ch[ci](oy, ox);
  });
}

Var upsample_nearest(const Var& x, int out_h, int out_w) {
  const int h = x->value.height(), w = x->value.width();
  const int c = x->value.channels();
  std::vector<int> ys(out_h), xs(out_w);
  for (int oy = 0; oy < out_h; ++oy) ys[oy] = std::min(h - 1, oy * h / out_h);
  for (int ox = 0; ox < out_w; ++ox) xs[ox] = std::min(w - 1, ox * w / out_w);
  Tensor out = Tensor::zeros(c, out_h, out_w);
  for (int ci = 0; ci < c; ++ci)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox) out.ch[ci](oy, ox) = x->value.ch[ci](ys[oy], xs[ox]);
  return make_node(std::move(out), {x}, [ys, xs](Node& node) {
    Var& p = node.parents[0];
    if (!p->requires_grad) return;
    for (std::size_t ci = 0; ci < node.grad.ch.size(); ++ci)
      for (std::size_t oy = 0; oy < ys.size(); ++oy)
        for (std::size_t ox = 0; ox < xs.size(); ++ox)
          p->grad.ch[ci](ys[oy], xs[ox]) += node.grad.ch[ci](oy, ox);
  });
}

Var global_avg_pool(const Var& x) {
  const int c = x->value.channels();
  Tensor out = Tensor::zeros(1, c, 1);
  for (int ci = 0; ci < c; ++ci) out.ch[0](ci, 0) = x->value.ch[ci].mean();
  return make_node(std::move(out), {x}, [](Node& node) {
    Var& p = node.parents[0];
    if (!p->requires_grad) return;
    for (std::size_t ci = 0; ci < p->grad.ch.size(); ++ci) {
      const double n = static_cast<double>(p->value.ch[ci].size());
      p->grad.ch[ci] += node.grad.ch[0](ci, 0) / n;
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const auto& xv = x->value.ch[0];
  const auto& wv = weight->value.ch[0];
  if (wv.cols() != xv.rows() || xv.cols() != 1)
    throw std::invalid_argument("linear: shape mismatch");
  Eigen::ArrayXXd y = (wv.matrix() * xv.matrix()).array();
  if (bias) y += bias->value.ch[0];
  Tensor out;
  out.ch.push_back(std::move(y));
  return make_node(std::move(out), {x, weight, bias}, [](Node& node) {
    Var& xin = node.parents[0];
    Var& w = node.parents[1];
    Var& b = node.parents[2];
    const auto g = node.grad.ch[0].matrix();
    if (w->requires_grad) w->grad.ch[0].matrix() += g * xin->value.ch[0].matrix().transpose();
    if (b && b->requires_grad) b->grad.ch[0] += node.grad.ch[0];
    if (xin->requires_grad)
      xin->grad.ch[0].matrix() += w->value.ch[0].matrix().transpose() * g;
  });
}

Var broadcast_plane(const Var& vec, int h, int w) {
  const auto& v = vec->value.ch[0];
  Tensor out;
  for (int i = 0; i < v.rows(); ++i)
    out.ch.push_back(Eigen::ArrayXXd::Constant(h, w, v(i, 0)));
  return make_node(std::move(out), {vec}, [](Node& node) {
    Var& p = node.parents[0];
    if (!p->requires_grad) return;
    for (std::size_t i = 0; i < node.grad.ch.size(); ++i)
      p->grad.ch[0](static_cast<int>(i), 0) += node.grad.ch[i].sum();
  });
}

Var sum_all(const Var& x) {
  double s = 0;
  for (const auto& p : x->value.ch) s += p.sum();
  return make_node(Tensor::scalar(s), {x}, [](Node& node) {
    Var& p = node.parents[0];
    if (!p->requires_grad) return;
    const double g = node.grad.ch[0](0, 0);
    for (auto& gc : p->grad.ch) gc += g;
  });
}

Var mean_all(const Var& x) {
  const double n = static_cast<double>(x->value.size());
  return scale(sum_all(x), 1.0 / n);
}

}  // namespace urcod::nn
