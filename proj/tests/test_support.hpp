#pragma once

// Shared helpers for the test binaries: brute-force metric oracles written as
// straight-line scalar loops (independent of the library's vectorized
// implementations), a central-difference gradient checker, and small input
// generators.

#include "urcod/nn/autograd.hpp"
#include "urcod/types.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

inline double mae(const urcod::ProbMap& pred, const urcod::ProbMap& gt) {
  double acc = 0;
  for (int y = 0; y < pred.rows(); ++y)
    for (int x = 0; x < pred.cols(); ++x) acc += std::fabs(pred(y, x) - gt(y, x));
  return acc / (static_cast<double>(pred.rows()) * pred.cols());
}

inline double bce(const urcod::ProbMap& pred, const urcod::ProbMap& gt) {
  double acc = 0;
  for (int y = 0; y < pred.rows(); ++y)
    for (int x = 0; x < pred.cols(); ++x) {
      double p = pred(y, x);
      if (p < 1e-6) p = 1e-6;
      if (p > 1.0 - 1e-6) p = 1.0 - 1e-6;
      acc += -(gt(y, x) * std::log(p) + (1.0 - gt(y, x)) * std::log(1.0 - p));
    }
  return acc / (static_cast<double>(pred.rows()) * pred.cols());
}

// --- S-measure (structure measure, canonical definition) ---

namespace detail {

inline double obj(const urcod::ProbMap& pred, const urcod::ProbMap& region) {
  double n = 0, mean = 0;
  for (int y = 0; y < pred.rows(); ++y)
    for (int x = 0; x < pred.cols(); ++x) {
      n += region(y, x);
      mean += pred(y, x) * region(y, x);
    }
  if (n < 0.5) return 0.0;
  mean /= n;
  double var = 0;
  for (int y = 0; y < pred.rows(); ++y)
    for (int x = 0; x < pred.cols(); ++x)
      var += region(y, x) * (pred(y, x) - mean) * (pred(y, x) - mean);
  const double sd = n > 1.5 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return 2.0 * mean / (mean * mean + 1.0 + 2.0 * sd + kEps);
}

inline double ssim_block(const urcod::ProbMap& pred, const urcod::ProbMap& gt, int y0, int x0,
                         int hh, int ww) {
  if (hh <= 0 || ww <= 0) return 0.0;
  const double n = static_cast<double>(hh) * ww;
  double mx = 0, my = 0;
  for (int y = 0; y < hh; ++y)
    for (int x = 0; x < ww; ++x) {
      mx += pred(y0 + y, x0 + x);
      my += gt(y0 + y, x0 + x);
    }
  mx /= n;
  my /= n;
  double sx2 = 0, sy2 = 0, sxy = 0;
  if (n > 1.5) {
    for (int y = 0; y < hh; ++y)
      for (int x = 0; x < ww; ++x) {
        const double dx = pred(y0 + y, x0 + x) - mx;
        const double dy = gt(y0 + y, x0 + x) - my;
        sx2 += dx * dx;
        sy2 += dy * dy;
        sxy += dx * dy;
      }
    sx2 /= n - 1.0;
    sy2 /= n - 1.0;
    sxy /= n - 1.0;
  }
  const double a = 4.0 * mx * my * sxy;
  const double b = (mx * mx + my * my) * (sx2 + sy2);
  if (a != 0.0) return a / (b + kEps);
  return b == 0.0 ? 1.0 : 0.0;
}

}  // namespace detail

inline double s_measure(const urcod::ProbMap& pred, const urcod::ProbMap& gt,
                        double alpha = 0.5) {
  const int h = static_cast<int>(gt.rows());
  const int w = static_cast<int>(gt.cols());
  double gsum = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) gsum += gt(y, x);
  const double gmean = gsum / (static_cast<double>(h) * w);
  double pmean = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) pmean += pred(y, x);
  pmean /= static_cast<double>(h) * w;
  if (gmean == 0.0) return 1.0 - pmean;
  if (gmean == 1.0) return pmean;

  // object-aware term
  urcod::ProbMap inv_pred = 1.0 - pred, inv_gt = 1.0 - gt;
  const double so = gmean * detail::obj(pred, gt) + (1.0 - gmean) * detail::obj(inv_pred, inv_gt);

  // region-aware term: quadrants at the 1-based rounded centroid
  double sx = 0, sy = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (gt(y, x) > 0.5) {
        sx += x + 1;
        sy += y + 1;
      }
  int cx = static_cast<int>(std::round(sx / gsum));
  int cy = static_cast<int>(std::round(sy / gsum));
  if (cx < 1) cx = 1;
  if (cx > w) cx = w;
  if (cy < 1) cy = 1;
  if (cy > h) cy = h;
  const double total = static_cast<double>(h) * w;
  const double w1 = cx * cy / total;
  const double w2 = (w - cx) * static_cast<double>(cy) / total;
  const double w3 = cx * static_cast<double>(h - cy) / total;
  const double w4 = 1.0 - w1 - w2 - w3;
  const double sr = w1 * detail::ssim_block(pred, gt, 0, 0, cy, cx) +
                    w2 * detail::ssim_block(pred, gt, 0, cx, cy, w - cx) +
                    w3 * detail::ssim_block(pred, gt, cy, 0, h - cy, cx) +
                    w4 * detail::ssim_block(pred, gt, cy, cx, h - cy, w - cx);
  const double s = alpha * so + (1.0 - alpha) * sr;
  return s < 0.0 ? 0.0 : s;
}

inline double e_measure(const urcod::ProbMap& pred, const urcod::ProbMap& gt) {
  const int h = static_cast<int>(gt.rows());
  const int w = static_cast<int>(gt.cols());
  const double n = static_cast<double>(h) * w;
  double pmean = 0, gsum = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      pmean += pred(y, x);
      gsum += gt(y, x);
    }
  pmean /= n;
  double th = 2.0 * pmean;
  if (th > 1.0) th = 1.0;

  urcod::ProbMap bin(h, w);
  double bmean = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bin(y, x) = pred(y, x) >= th ? 1.0 : 0.0;
      bmean += bin(y, x);
    }
  bmean /= n;

  double acc = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double xi;
      if (gsum == 0.0)
        xi = bin(y, x) == 0.0 ? 1.0 : -1.0;
      else if (gsum == n)
        xi = bin(y, x) == 1.0 ? 1.0 : -1.0;
      else {
        const double dg = gt(y, x) - gsum / n;
        const double df = bin(y, x) - bmean;
        xi = 2.0 * dg * df / (dg * dg + df * df + kEps);
      }
      acc += (1.0 + xi) * (1.0 + xi) / 4.0;
    }
  return acc / n;
}

inline double weighted_f_measure(const urcod::ProbMap& pred, const urcod::ProbMap& gt,
                                 double beta_sq = 1.0) {
  const int h = static_cast<int>(gt.rows());
  const int w = static_cast<int>(gt.cols());
  double gsum = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) gsum += gt(y, x);
  if (gsum == 0.0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (pred(y, x) != 0.0) return 0.0;
    return 1.0;
  }

  // brute-force Euclidean distance transform with the nearest foreground
  // pixel; ties break toward the smaller column, then the smaller row
  urcod::ProbMap dist(h, w);
  std::vector<int> near_y(static_cast<std::size_t>(h) * w), near_x(near_y.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double best = std::numeric_limits<double>::infinity();
      int by = y, bx = x;
      for (int qx = 0; qx < w; ++qx)
        for (int qy = 0; qy < h; ++qy)
          if (gt(qy, qx) > 0.5) {
            const double d2 = static_cast<double>(y - qy) * (y - qy) +
                              static_cast<double>(x - qx) * (x - qx);
            if (d2 < best) {
              best = d2;
              by = qy;
              bx = qx;
            }
          }
      dist(y, x) = std::sqrt(best);
      near_y[static_cast<std::size_t>(y) * w + x] = by;
      near_x[static_cast<std::size_t>(y) * w + x] = bx;
    }

  // error map with background errors replaced by the nearest-fg error
  urcod::ProbMap err(h, w), err_t(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) err(y, x) = std::fabs(pred(y, x) - gt(y, x));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      err_t(y, x) = gt(y, x) > 0.5
                        ? err(y, x)
                        : err(near_y[static_cast<std::size_t>(y) * w + x],
                              near_x[static_cast<std::size_t>(y) * w + x]);

  // 7x7 normalized Gaussian (sigma 5), zero padding
  double kernel[7][7], ksum = 0;
  for (int dy = -3; dy <= 3; ++dy)
    for (int dx = -3; dx <= 3; ++dx) {
      kernel[dy + 3][dx + 3] = std::exp(-0.5 * (dy * dy + dx * dx) / 25.0);
      ksum += kernel[dy + 3][dx + 3];
    }
  urcod::ProbMap err_a(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int dy = -3; dy <= 3; ++dy)
        for (int dx = -3; dx <= 3; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          acc += kernel[dy + 3][dx + 3] / ksum * err_t(yy, xx);
        }
      err_a(y, x) = acc;
    }

  const double k = std::log(0.5) / 5.0;
  double ew_fg = 0, ew_bg = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double e = err(y, x);
      double b = 1.0;
      if (gt(y, x) > 0.5) {
        if (err_a(y, x) < e) e = err_a(y, x);
      } else {
        b = 2.0 - std::exp(k * dist(y, x));
      }
      if (gt(y, x) > 0.5)
        ew_fg += e * b;
      else
        ew_bg += e * b;
    }
  const double tpw = gsum - ew_fg;
  const double fpw = ew_bg;
  const double recall = 1.0 - ew_fg / gsum;
  const double precision = tpw / (kEps + tpw + fpw);
  return (1.0 + beta_sq) * recall * precision / (kEps + recall + beta_sq * precision);
}

}  // namespace oracle

namespace testutil {

inline urcod::ProbMap random_map(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  urcod::ProbMap m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(y, x) = uni(rng);
  return m;
}

inline urcod::ProbMap random_binary(int h, int w, std::mt19937_64& rng, double p = 0.5) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  urcod::ProbMap m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(y, x) = uni(rng) < p ? 1.0 : 0.0;
  return m;
}

inline urcod::ProbMap flip_lr(const urcod::ProbMap& m) { return m.rowwise().reverse(); }

/// Central finite differences over every entry of every listed parameter;
/// returns the worst relative mismatch against the analytic gradient.
inline double gradcheck(const std::vector<urcod::nn::Var>& params,
                        const std::function<urcod::nn::Var()>& build, double h = 1e-4,
                        int max_entries_per_param = 64) {
  using urcod::nn::backward;
  for (const auto& p : params) p->zero_grad();
  backward(build());
  std::vector<urcod::nn::Tensor> analytic;
  for (const auto& p : params) {
    p->ensure_grad();
    analytic.push_back(p->grad);
  }

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& val = params[pi]->value;
    int checked = 0;
    for (int c = 0; c < val.channels() && checked < max_entries_per_param; ++c)
      for (int i = 0; i < val.ch[c].size() && checked < max_entries_per_param; ++i) {
        double* slot = val.ch[c].data() + i;
        const double orig = *slot;
        *slot = orig + h;
        const double lp = build()->value.item();
        *slot = orig - h;
        const double lm = build()->value.item();
        *slot = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        const double exact = analytic[pi].ch[c].data()[i];
        const double scale = std::max({std::fabs(numeric), std::fabs(exact), 1e-4});
        worst = std::max(worst, std::fabs(numeric - exact) / scale);
        ++checked;
      }
  }
  return worst;
}

}  // namespace testutil
