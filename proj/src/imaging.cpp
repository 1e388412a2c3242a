#include "urcod/imaging.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace urcod {

ProbMap bilinear_resize(const ProbMap& src, int out_h, int out_w) {
  const int h = static_cast<int>(src.rows());
  const int w = static_cast<int>(src.cols());
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize target must be positive");
  if (out_h == h && out_w == w) return src;

  ProbMap out(out_h, out_w);
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    // pixel-center alignment
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      out(oy, ox) = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                    wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
    }
  }
  return out;
}

RgbImage bilinear_resize(const RgbImage& src, int out_h, int out_w) {
  return {bilinear_resize(src.r, out_h, out_w), bilinear_resize(src.g, out_h, out_w),
          bilinear_resize(src.b, out_h, out_w)};
}

namespace {

ProbMap morph(const ProbMap& mask, int radius, bool dilation) {
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());
  ProbMap bin = binarize(mask);
  // separable min/max over a square window
  ProbMap tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = dilation ? 0.0 : 1.0;
      for (int dx = -radius; dx <= radius; ++dx) {
        const int xx = x + dx;
        const double s = (xx >= 0 && xx < w) ? bin(y, xx) : 0.0;
        v = dilation ? std::max(v, s) : std::min(v, s);
      }
      tmp(y, x) = v;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = dilation ? 0.0 : 1.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        const double s = (yy >= 0 && yy < h) ? tmp(yy, x) : 0.0;
        v = dilation ? std::max(v, s) : std::min(v, s);
      }
      out(y, x) = v;
    }
  return out;
}

}  // namespace

ProbMap dilate(const ProbMap& mask, int radius) { return morph(mask, radius, true); }
ProbMap erode(const ProbMap& mask, int radius) { return morph(mask, radius, false); }

ProbMap morphological_gradient(const ProbMap& mask, int radius) {
  return ((dilate(mask, radius) - erode(mask, radius)) > 0.5).cast<double>();
}

ProbMap gaussian_filter(const ProbMap& m, double sigma, int half_width) {
  if (half_width <= 0 || sigma <= 0.0) return m;
  const int h = static_cast<int>(m.rows());
  const int w = static_cast<int>(m.cols());

  Eigen::ArrayXd kernel(2 * half_width + 1);
  for (int i = -half_width; i <= half_width; ++i)
    kernel(i + half_width) = std::exp(-0.5 * (i * i) / (sigma * sigma));
  kernel /= kernel.sum();

  ProbMap tmp = ProbMap::Zero(h, w), out = ProbMap::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half_width; k <= half_width; ++k) {
        const int xx = std::clamp(x + k, 0, w - 1);  // replicate border
        acc += kernel(k + half_width) * m(y, xx);
      }
      tmp(y, x) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -half_width; k <= half_width; ++k) {
        const int yy = std::clamp(y + k, 0, h - 1);
        acc += kernel(k + half_width) * tmp(yy, x);
      }
      out(y, x) = acc;
    }
  return out;
}

ProbMap gaussian_blur_radius(const ProbMap& m, int radius) {
  if (radius <= 0) return m;
  return gaussian_filter(m, radius / 2.0, radius);
}

ProbMap box_mean(const ProbMap& m, int win) {
  const int h = static_cast<int>(m.rows());
  const int w = static_cast<int>(m.cols());
  const int r = win / 2;
  // integral image with zero padding outside
  Eigen::ArrayXXd integral = Eigen::ArrayXXd::Zero(h + 1, w + 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      integral(y + 1, x + 1) = m(y, x) + integral(y, x + 1) + integral(y + 1, x) - integral(y, x);

  ProbMap out(h, w);
  const double denom = static_cast<double>(win) * win;
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r);
    const int y1 = std::min(h, y + r + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r);
      const int x1 = std::min(w, x + r + 1);
      out(y, x) =
          (integral(y1, x1) - integral(y0, x1) - integral(y1, x0) + integral(y0, x0)) / denom;
    }
  }
  return out;
}

ProbMap distance_transform(const ProbMap& mask, Eigen::ArrayXXi* nearest) {
  const int h = static_cast<int>(mask.rows());
  const int w = static_cast<int>(mask.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // phase 1: nearest nonzero pixel within each column
  Eigen::ArrayXXd col_dist(h, w);
  Eigen::ArrayXXi col_src(h, w);
  for (int x = 0; x < w; ++x) {
    double d = kInf;
    int src = -1;
    for (int y = 0; y < h; ++y) {
      if (mask(y, x) > 0.5) {
        d = 0;
        src = y;
      } else if (src >= 0) {
        d += 1;
      }
      col_dist(y, x) = d;
      col_src(y, x) = src;
    }
    d = kInf;
    src = -1;
    for (int y = h - 1; y >= 0; --y) {
      if (mask(y, x) > 0.5) {
        d = 0;
        src = y;
      } else if (src >= 0) {
        d += 1;
      }
      if (d < col_dist(y, x)) {
        col_dist(y, x) = d;
        col_src(y, x) = src;
      }
    }
  }

  // phase 2: lower envelope of parabolas along each row
  ProbMap dist(h, w);
  if (nearest) nearest->resize(h, w);
  std::vector<int> v(w);       // parabola source columns
  std::vector<double> z(w + 1);  // envelope breakpoints
  for (int y = 0; y < h; ++y) {
    int k = -1;
    for (int x = 0; x < w; ++x) {
      const double f = col_dist(y, x) * col_dist(y, x);
      if (std::isinf(f)) continue;
      double s;
      while (k >= 0) {
        const int q = v[k];
        const double fq = col_dist(y, q) * col_dist(y, q);
        s = ((f + x * x) - (fq + q * q)) / (2.0 * (x - q));
        if (s <= z[k])
          --k;
        else
          break;
      }
      if (k < 0) {
        k = 0;
        v[0] = x;
        z[0] = -kInf;
        z[1] = kInf;
      } else {
        ++k;
        v[k] = x;
        z[k] = s;
        z[k + 1] = kInf;
      }
    }
    if (k < 0) {
      // empty mask: no sources at all in this row set
      for (int x = 0; x < w; ++x) {
        dist(y, x) = kInf;
        if (nearest) (*nearest)(y, x) = -1;
      }
      continue;
    }
    int j = 0;
    for (int x = 0; x < w; ++x) {
      while (z[j + 1] < x) ++j;
      const int q = v[j];
      const double d2 = (x - q) * (x - q) + col_dist(y, q) * col_dist(y, q);
      dist(y, x) = std::sqrt(d2);
      if (nearest) (*nearest)(y, x) = col_src(y, q) * w + q;
    }
  }
  return dist;
}

ProbMap value_noise(int h, int w, int cell, std::mt19937_64& rng) {
  if (cell < 1) cell = 1;
  const int gh = h / cell + 2;
  const int gw = w / cell + 2;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::ArrayXXd lattice(gh, gw);
  for (int y = 0; y < gh; ++y)
    for (int x = 0; x < gw; ++x) lattice(y, x) = uni(rng);

  ProbMap out(h, w);
  for (int y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y) / cell;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / cell;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      out(y, x) = (1 - ty) * ((1 - tx) * lattice(y0, x0) + tx * lattice(y0, x0 + 1)) +
                  ty * ((1 - tx) * lattice(y0 + 1, x0) + tx * lattice(y0 + 1, x0 + 1));
    }
  }
  return out;
}

}  // namespace urcod
