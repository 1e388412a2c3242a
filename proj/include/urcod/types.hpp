#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace urcod {

/// Single-channel map with values in [0,1]; rows = height, cols = width.
using ProbMap = Eigen::ArrayXXd;

struct RgbImage {
  ProbMap r, g, b;

  int height() const { return static_cast<int>(r.rows()); }
  int width() const { return static_cast<int>(r.cols()); }

  ProbMap gray() const { return (r + g + b) / 3.0; }
};

/// One dataset record: image plus ground-truth map and derived edge label.
struct ImageSample {
  std::string id;
  RgbImage image;
  ProbMap gt_map;
  ProbMap gt_edge;
};

/// Diagonal Gaussian over the latent space.
struct GaussianLatent {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  int dim() const { return static_cast<int>(mean.size()); }
};

}  // namespace urcod
