#pragma once

#include "urcod/nn/layers.hpp"
#include "urcod/types.hpp"

#include <array>

namespace urcod {

struct RefinementOutput {
  ProbMap m_pred;
  ProbMap m_ref;
  ProbMap e_ref;
};

enum class InferMode { mean, sample };

/// Reparameterized Gaussian sample: z = mu + sigma ⊙ eps.
Eigen::VectorXd sample_latent(const GaussianLatent& g, const Eigen::VectorXd& eps);

/// Conv encoder to a diagonal Gaussian: strided convs, global average pool,
/// then a linear head producing (mu, log sigma).
struct LatentEncoder {
  int in_channels = 5;
  int latent_dim = 3;
  nn::Conv2dLayer c1, c2, c3;
  nn::LinearLayer head;

  LatentEncoder() = default;
  LatentEncoder(int in_channels, int latent_dim, std::mt19937_64& rng);

  /// (mu, sigma); sigma = exp(log-sigma head) + 1e-4 floor.
  std::pair<nn::Var, nn::Var> operator()(const nn::Var& x) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
};

struct UamrModel {
  int latent_dim = 3;
  int input_size = 64;
  LatentEncoder prior_net;      // (image, m_pseudo, e_pseudo)
  LatentEncoder posterior_net;  // + m_gt channel
  nn::EncDec refine_backbone;   // (image, m_pseudo, e_pseudo, tiled z)
  nn::Conv2dLayer head_pred, head_mref, head_eref;

  UamrModel() = default;
  UamrModel(int input_size, int latent_dim, std::uint64_t seed);

  // graph builders (x = concatenated conditioning channels)
  std::pair<nn::Var, nn::Var> prior_heads(const nn::Var& x5) const;
  std::pair<nn::Var, nn::Var> posterior_heads(const nn::Var& x6) const;
  std::array<nn::Var, 3> refine_heads(const nn::Var& x5, const nn::Var& z) const;

  GaussianLatent prior_encode(const RgbImage& image, const ProbMap& m_pseudo,
                              const ProbMap& e_pseudo) const;
  GaussianLatent posterior_encode(const RgbImage& image, const ProbMap& m_pseudo,
                                  const ProbMap& e_pseudo, const ProbMap& m_gt) const;
  RefinementOutput refine(const RgbImage& image, const ProbMap& m_pseudo, const ProbMap& e_pseudo,
                          const Eigen::VectorXd& z) const;

  /// Prior-path prediction; mode=mean uses z = mu, mode=sample draws one
  /// seeded noise vector.
  ProbMap infer(const RgbImage& image, const ProbMap& m_pseudo, const ProbMap& e_pseudo,
                InferMode mode, std::uint64_t seed = 0) const;

  nn::ParamList params() const;
};

/// Weights for the six refinement-loss terms (Eq. layout: mse / smoothness /
/// structure, each on the prior and posterior paths).
struct RefineWeights {
  double mse_prior = 1.0, mse_post = 1.0;
  double smooth_prior = 1.0, smooth_post = 1.0;
  double struct_prior = 1.0, struct_post = 1.0;
};

/// Scalar (non-graph) refinement loss over already-computed outputs.
double refinement_loss(const RefinementOutput& prior_out, const RefinementOutput& post_out,
                       const ImageSample& sample, const ProbMap& m_pseudo,
                       const ProbMap& e_pseudo, const RefineWeights& weights);

/// Differentiable per-sample UAMR losses (single Monte-Carlo draw per path).
struct UamrLossGraph {
  nn::Var cvae;
  nn::Var ref;
};
UamrLossGraph build_uamr_loss(const UamrModel& model, const ImageSample& sample,
                              const ProbMap& m_pseudo, const ProbMap& e_pseudo,
                              const Eigen::VectorXd& eps_prior, const Eigen::VectorXd& eps_post,
                              const RefineWeights& weights);

/// Variant that takes pre-built conditioning Vars so pseudo-label inputs may
/// carry gradients (joint training).
UamrLossGraph build_uamr_loss_graph(const UamrModel& model, const ImageSample& sample,
                                    const nn::Var& m_pseudo, const nn::Var& e_pseudo,
                                    const Eigen::VectorXd& eps_prior,
                                    const Eigen::VectorXd& eps_post,
                                    const RefineWeights& weights);

/// Scalar CVAE loss (reconstruction + KL) on one sample.
double cvae_loss(const UamrModel& model, const ImageSample& sample, const ProbMap& m_pseudo,
                 const ProbMap& e_pseudo, const Eigen::VectorXd& eps);

}  // namespace urcod
