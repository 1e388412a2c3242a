#pragma once

#include "urcod/types.hpp"

#include <cstdint>
#include <random>

namespace urcod {

ProbMap bilinear_resize(const ProbMap& src, int out_h, int out_w);
RgbImage bilinear_resize(const RgbImage& src, int out_h, int out_w);

inline ProbMap binarize(const ProbMap& m, double threshold = 0.5) {
  return (m >= threshold).cast<double>();
}

/// Square-structuring-element morphology on a binary mask; radius in pixels.
ProbMap dilate(const ProbMap& mask, int radius);
ProbMap erode(const ProbMap& mask, int radius);

/// dilation − erosion, clipped to {0,1}.
ProbMap morphological_gradient(const ProbMap& mask, int radius);

/// Separable Gaussian blur; kernel spans [-radius, radius], sigma = radius/2.
/// radius 0 is the identity.
ProbMap gaussian_blur_radius(const ProbMap& m, int radius);

/// Separable Gaussian filter with explicit sigma and half-width.
ProbMap gaussian_filter(const ProbMap& m, double sigma, int half_width);

/// Local mean over a win×win window, zero-padded (matches avg-pool semantics
/// with 'same' padding).
ProbMap box_mean(const ProbMap& m, int win);

/// Exact Euclidean distance transform of the zero set of `mask` (distance from
/// each pixel to the nearest nonzero pixel). `nearest` receives the linear
/// index (y * W + x) of that pixel, or -1 when the mask is empty.
ProbMap distance_transform(const ProbMap& mask, Eigen::ArrayXXi* nearest = nullptr);

/// Smooth value noise in [0,1] on a cell lattice, bilinear between lattice
/// points. Deterministic per rng state.
ProbMap value_noise(int h, int w, int cell, std::mt19937_64& rng);

}  // namespace urcod
