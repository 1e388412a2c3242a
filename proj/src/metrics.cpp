#include "urcod/metrics.hpp"

#include "urcod/imaging.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace urcod {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_dims(const ProbMap& a, const ProbMap& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("metric input dimension mismatch");
}

// --- S-measure internals (structure-measure reference definition) ---

double object_score(const ProbMap& pred, const ProbMap& region) {
  const double n = region.sum();
  if (n < 0.5) return 0.0;
  const double x = (pred * region).sum() / n;
  double sigma = 0.0;
  if (n > 1.5) sigma = std::sqrt(((pred - x) * region).square().sum() / (n - 1.0));
  return 2.0 * x / (x * x + 1.0 + 2.0 * sigma + kEps);
}

double s_object(const ProbMap& pred, const ProbMap& gt) {
  const double u = gt.mean();
  const double o_fg = object_score(pred, gt);
  const double o_bg = object_score(1.0 - pred, 1.0 - gt);
  return u * o_fg + (1.0 - u) * o_bg;
}

double region_ssim(const ProbMap& pred, const ProbMap& gt) {
  const double n = static_cast<double>(pred.size());
  const double x = pred.mean();
  const double y = gt.mean();
  double sx2 = 0, sy2 = 0, sxy = 0;
  if (n > 1.5) {
    sx2 = (pred - x).square().sum() / (n - 1.0);
    sy2 = (gt - y).square().sum() / (n - 1.0);
    sxy = ((pred - x) * (gt - y)).sum() / (n - 1.0);
  }
  const double a = 4.0 * x * y * sxy;
  const double b = (x * x + y * y) * (sx2 + sy2);
  if (a != 0.0) return a / (b + kEps);
  return b == 0.0 ? 1.0 : 0.0;
}

double s_region(const ProbMap& pred, const ProbMap& gt) {
  const int h = static_cast<int>(gt.rows());
  const int w = static_cast<int>(gt.cols());
  const double area = gt.sum();
  // 1-based rounded centroid, as in the reference implementation
  int cx, cy;
  if (area < 0.5) {
    cx = static_cast<int>(std::round(w / 2.0));
    cy = static_cast<int>(std::round(h / 2.0));
  } else {
    double sx = 0, sy = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (gt(y, x) > 0.5) {
          sx += x + 1;
          sy += y + 1;
        }
    cx = static_cast<int>(std::round(sx / area));
    cy = static_cast<int>(std::round(sy / area));
  }
  cx = std::clamp(cx, 1, w);
  cy = std::clamp(cy, 1, h);

  const double total = static_cast<double>(h) * w;
  const double w1 = (static_cast<double>(cx) * cy) / total;
  const double w2 = (static_cast<double>(w - cx) * cy) / total;
  const double w3 = (static_cast<double>(cx) * (h - cy)) / total;
  const double w4 = 1.0 - w1 - w2 - w3;

  auto quad = [&](int y0, int x0, int hh, int ww) -> double {
    if (hh <= 0 || ww <= 0) return 0.0;
    return region_ssim(pred.block(y0, x0, hh, ww), gt.block(y0, x0, hh, ww));
  };
  return w1 * quad(0, 0, cy, cx) + w2 * quad(0, cx, cy, w - cx) + w3 * quad(cy, 0, h - cy, cx) +
         w4 * quad(cy, cx, h - cy, w - cx);
}

// zero-padded correlation with a normalized Gaussian kernel
ProbMap gaussian_zero_pad(const ProbMap& m, double sigma, int half) {
  Eigen::ArrayXXd kernel(2 * half + 1, 2 * half + 1);
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx)
      kernel(dy + half, dx + half) = std::exp(-0.5 * (dy * dy + dx * dx) / (sigma * sigma));
  kernel /= kernel.sum();

  const int h = static_cast<int>(m.rows());
  const int w = static_cast<int>(m.cols());
  ProbMap out = ProbMap::Zero(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int dy = -half; dy <= half; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -half; dx <= half; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          acc += kernel(dy + half, dx + half) * m(yy, xx);
        }
      }
      out(y, x) = acc;
    }
  return out;
}

}  // namespace

double mae(const ProbMap& pred, const ProbMap& gt) {
  check_dims(pred, gt);
  return (pred - gt).abs().mean();
}

double s_measure(const ProbMap& pred, const ProbMap& gt, double alpha) {
  check_dims(pred, gt);
  const double y = gt.mean();
  if (y == 0.0) return 1.0 - pred.mean();
  if (y == 1.0) return pred.mean();
  return std::max(0.0, alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt));
}

double e_measure(const ProbMap& pred, const ProbMap& gt) {
  check_dims(pred, gt);
  const double th = std::min(2.0 * pred.mean(), 1.0);
  const ProbMap bin = (pred >= th).cast<double>();
  const double gt_sum = gt.sum();
  const double n = static_cast<double>(gt.size());

  ProbMap xi;
  if (gt_sum == 0.0) {
    xi = 1.0 - 2.0 * bin;  // 1 where bin == 0, -1 elsewhere
  } else if (gt_sum == n) {
    xi = 2.0 * bin - 1.0;  // 1 where bin == 1, -1 elsewhere
  } else {
    const ProbMap d_gt = gt - gt.mean();
    const ProbMap d_fm = bin - bin.mean();
    xi = 2.0 * d_gt * d_fm / (d_gt.square() + d_fm.square() + kEps);
  }
  return ((1.0 + xi).square() / 4.0).mean();
}

double weighted_f_measure(const ProbMap& pred, const ProbMap& gt, double beta_sq) {
  check_dims(pred, gt);
  if (gt.sum() == 0.0) return pred.maxCoeff() == 0.0 ? 1.0 : 0.0;

  const int h = static_cast<int>(gt.rows());
  const int w = static_cast<int>(gt.cols());
  Eigen::ArrayXXi nearest;
  const ProbMap dist = distance_transform(gt, &nearest);

  const ProbMap err = (pred - gt).abs();
  ProbMap err_t = err;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (gt(y, x) < 0.5) {
        const int idx = nearest(y, x);
        err_t(y, x) = err(idx / w, idx % w);
      }
  const ProbMap err_a = gaussian_zero_pad(err_t, 5.0, 3);

  ProbMap min_e = err;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (gt(y, x) > 0.5 && err_a(y, x) < err(y, x)) min_e(y, x) = err_a(y, x);

  ProbMap b_weight = ProbMap::Ones(h, w);
  const double k = std::log(0.5) / 5.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (gt(y, x) < 0.5) b_weight(y, x) = 2.0 - std::exp(k * dist(y, x));

  const ProbMap ew = min_e * b_weight;
  const double n_fg = gt.sum();
  const double tpw = n_fg - (ew * gt).sum();
  const double fpw = (ew * (1.0 - gt)).sum();
  const double recall = 1.0 - (ew * gt).sum() / n_fg;
  const double precision = tpw / (kEps + tpw + fpw);
  return (1.0 + beta_sq) * recall * precision / (kEps + recall + beta_sq * precision);
}

MetricReport evaluate_dataset(const std::vector<ProbMap>& preds,
                              const std::vector<ImageSample>& samples, double alpha,
                              double beta_sq) {
  if (preds.size() != samples.size())
    throw std::invalid_argument("prediction / sample count mismatch");
  MetricReport report;
  report.alpha = alpha;
  report.beta_sq = beta_sq;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    SampleMetrics m;
    m.id = samples[i].id;
    m.mae = mae(preds[i], samples[i].gt_map);
    m.s_measure = s_measure(preds[i], samples[i].gt_map, alpha);
    m.e_measure = e_measure(preds[i], samples[i].gt_map);
    m.weighted_f = weighted_f_measure(preds[i], samples[i].gt_map, beta_sq);
    report.mean_mae += m.mae;
    report.mean_s += m.s_measure;
    report.mean_e += m.e_measure;
    report.mean_wf += m.weighted_f;
    report.per_sample.push_back(std::move(m));
  }
  const double n = static_cast<double>(report.per_sample.size());
  if (n > 0) {
    report.mean_mae /= n;
    report.mean_s /= n;
    report.mean_e /= n;
    report.mean_wf /= n;
  }
  return report;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics CSV: " + path.string());
  out << "id,mae,s_measure,e_measure,weighted_f\n";
  char line[256];
  for (const auto& m : report.per_sample) {
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f\n", m.id.c_str(), m.mae, m.s_measure,
                  m.e_measure, m.weighted_f);
    out << line;
  }
  std::snprintf(line, sizeof(line), "MEAN,%.6f,%.6f,%.6f,%.6f\n", report.mean_mae, report.mean_s,
                report.mean_e, report.mean_wf);
  out << line;
}

}  // namespace urcod
