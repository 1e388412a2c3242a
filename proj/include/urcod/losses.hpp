#pragma once

#include "urcod/nn/autograd.hpp"
#include "urcod/types.hpp"

namespace urcod {

/// Probability clamp applied inside every log-based loss.
inline constexpr double kProbEps = 1e-6;

// Differentiable forms. pred is a single-channel Var; targets are constants.

namespace nn {

Var bce_loss(const Var& pred, const ProbMap& target);
Var mse_loss(const Var& pred, const ProbMap& target);

/// Edge-aware first-order smoothness: forward differences of pred damped by
/// image gradients, summed over both axes and divided by the pixel count.
Var smoothness_loss(const Var& pred, const ProbMap& image_gray);

/// Boundary-weighted BCE + boundary-weighted IoU; weights
/// 1 + 5*|box_mean_15(target) - target|. target must be binary.
Var structure_loss(const Var& pred, const ProbMap& target);

/// Diagonal-Gaussian KL(q || p), summed over dimensions. Inputs are
/// single-channel d×1 Vars; standard deviations must be positive.
Var gaussian_kl_loss(const Var& mu_q, const Var& sigma_q, const Var& mu_p, const Var& sigma_p);

/// Flooding loss |bce(pred, target) - b| + b.
Var edge_loss(const Var& pred, const ProbMap& gt_edge, double flooding_level);

}  // namespace nn

// Plain scalar evaluations of the same losses.

double bce(const ProbMap& pred, const ProbMap& target);
double mse(const ProbMap& pred, const ProbMap& target);
double smoothness_loss(const ProbMap& pred, const RgbImage& image);
double structure_loss(const ProbMap& pred, const ProbMap& target);
double gaussian_kl(const GaussianLatent& q, const GaussianLatent& p);
double edge_loss(const ProbMap& pred, const ProbMap& gt_edge, double flooding_level);

}  // namespace urcod
