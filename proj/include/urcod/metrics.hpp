#pragma once

#include "urcod/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace urcod {

struct SampleMetrics {
  std::string id;
  double mae = 0;
  double s_measure = 0;
  double e_measure = 0;
  double weighted_f = 0;
};

struct MetricReport {
  std::vector<SampleMetrics> per_sample;
  double mean_mae = 0;
  double mean_s = 0;
  double mean_e = 0;
  double mean_wf = 0;
  double alpha = 0.5;
  double beta_sq = 1.0;
};

double mae(const ProbMap& pred, const ProbMap& gt);

/// Structure measure: alpha * object-aware + (1 - alpha) * region-aware
/// similarity. gt must be binary.
double s_measure(const ProbMap& pred, const ProbMap& gt, double alpha = 0.5);

/// Enhanced-alignment measure with adaptive binarization of pred at
/// min(2 * mean(pred), 1). gt must be binary.
double e_measure(const ProbMap& pred, const ProbMap& gt);

/// Weighted F-measure (distance-weighted errors, Gaussian sigma = 5 over a
/// 7x7 window). gt must be binary.
double weighted_f_measure(const ProbMap& pred, const ProbMap& gt, double beta_sq = 1.0);

MetricReport evaluate_dataset(const std::vector<ProbMap>& preds,
                              const std::vector<ImageSample>& samples, double alpha = 0.5,
                              double beta_sq = 1.0);

/// CSV with header id,mae,s_measure,e_measure,weighted_f and a final MEAN row,
/// 6 decimal places.
void write_metrics_csv(const std::filesystem::path& path, const MetricReport& report);

}  // namespace urcod
