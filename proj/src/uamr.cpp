#include "urcod/uamr.hpp"

#include "urcod/losses.hpp"

#include <random>
#include <stdexcept>

namespace urcod {

namespace {

constexpr double kSigmaFloor = 1e-4;

nn::Var map_const(const ProbMap& m) { return nn::constant(nn::Tensor(m)); }

nn::Var latent_const(const Eigen::VectorXd& v) {
  Eigen::ArrayXXd a(v.size(), 1);
  a.col(0) = v.array();
  return nn::constant(nn::Tensor(std::move(a)));
}

Eigen::VectorXd to_vector(const nn::Var& v) {
  return v->value.ch[0].col(0).matrix();
}

void check_aligned(const RgbImage& image, const ProbMap& m, const ProbMap& e) {
  if (m.rows() != image.r.rows() || m.cols() != image.r.cols() || e.rows() != image.r.rows() ||
      e.cols() != image.r.cols())
    throw std::invalid_argument("uamr: conditioning inputs are not spatially aligned");
}

}  // namespace

Eigen::VectorXd sample_latent(const GaussianLatent& g, const Eigen::VectorXd& eps) {
  if (g.mean.size() != g.std.size() || g.mean.size() != eps.size())
    throw std::invalid_argument("sample_latent: dimension mismatch");
  return g.mean + g.std.cwiseProduct(eps);
}

LatentEncoder::LatentEncoder(int in_channels_, int latent_dim_, std::mt19937_64& rng)
    : in_channels(in_channels_),
      latent_dim(latent_dim_),
      c1(in_channels_, 8, 3, 2, 1, 1, rng),
      c2(8, 16, 3, 2, 1, 1, rng),
      c3(16, 32, 3, 2, 1, 1, rng),
      head(32, 2 * latent_dim_, rng) {}

std::pair<nn::Var, nn::Var> LatentEncoder::operator()(const nn::Var& x) const {
  if (x->value.channels() != in_channels)
    throw std::invalid_argument("latent encoder: channel mismatch");
  nn::Var f = nn::relu(c3(nn::relu(c2(nn::relu(c1(x))))));
  nn::Var stats = head(nn::global_avg_pool(f));
  nn::Var mu = nn::slice_rows(stats, 0, latent_dim);
  nn::Var sigma = nn::add_scalar(nn::exp_(nn::slice_rows(stats, latent_dim, latent_dim)),
                                 kSigmaFloor);
  return {mu, sigma};
}

void LatentEncoder::collect(const std::string& prefix, nn::ParamList& out) const {
  c1.collect(prefix + ".c1", out);
  c2.collect(prefix + ".c2", out);
  c3.collect(prefix + ".c3", out);
  head.collect(prefix + ".head", out);
}

UamrModel::UamrModel(int input_size_, int latent_dim_, std::uint64_t seed)
    : latent_dim(latent_dim_), input_size(input_size_) {
  std::mt19937_64 rng(seed);
  prior_net = LatentEncoder(5, latent_dim, rng);
  posterior_net = LatentEncoder(6, latent_dim, rng);
  refine_backbone = nn::EncDec(5 + latent_dim, {12, 24, 32, 32}, 32, rng);
  head_pred = nn::Conv2dLayer(refine_backbone.channels[0], 1, 1, 1, 0, 1, rng);
  head_mref = nn::Conv2dLayer(refine_backbone.channels[0], 1, 1, 1, 0, 1, rng);
  head_eref = nn::Conv2dLayer(refine_backbone.channels[0], 1, 1, 1, 0, 1, rng);
}

std::pair<nn::Var, nn::Var> UamrModel::prior_heads(const nn::Var& x5) const {
  return prior_net(x5);
}

std::pair<nn::Var, nn::Var> UamrModel::posterior_heads(const nn::Var& x6) const {
  return posterior_net(x6);
}

std::array<nn::Var, 3> UamrModel::refine_heads(const nn::Var& x5, const nn::Var& z) const {
  const int h = x5->value.height();
  const int w = x5->value.width();
  nn::Var input = nn::concat({x5, nn::broadcast_plane(z, h, w)});
  nn::Var trunk = refine_backbone.trunk(input);
  return {nn::sigmoid(head_pred(trunk)), nn::sigmoid(head_mref(trunk)),
          nn::sigmoid(head_eref(trunk))};
}

GaussianLatent UamrModel::prior_encode(const RgbImage& image, const ProbMap& m_pseudo,
                                       const ProbMap& e_pseudo) const {
  check_aligned(image, m_pseudo, e_pseudo);
  nn::Var x = nn::concat({nn::constant(nn::from_rgb(image)), map_const(m_pseudo),
                          map_const(e_pseudo)});
  auto [mu, sigma] = prior_heads(x);
  return {to_vector(mu), to_vector(sigma)};
}

GaussianLatent UamrModel::posterior_encode(const RgbImage& image, const ProbMap& m_pseudo,
                                           const ProbMap& e_pseudo, const ProbMap& m_gt) const {
  check_aligned(image, m_pseudo, e_pseudo);
  nn::Var x = nn::concat({nn::constant(nn::from_rgb(image)), map_const(m_pseudo),
                          map_const(e_pseudo), map_const(m_gt)});
  auto [mu, sigma] = posterior_heads(x);
  return {to_vector(mu), to_vector(sigma)};
}

RefinementOutput UamrModel::refine(const RgbImage& image, const ProbMap& m_pseudo,
                                   const ProbMap& e_pseudo, const Eigen::VectorXd& z) const {
  check_aligned(image, m_pseudo, e_pseudo);
  if (z.size() != latent_dim) throw std::invalid_argument("refine: latent dimension mismatch");
  nn::Var x = nn::concat({nn::constant(nn::from_rgb(image)), map_const(m_pseudo),
                          map_const(e_pseudo)});
  auto heads = refine_heads(x, latent_const(z));
  return {heads[0]->value.ch[0], heads[1]->value.ch[0], heads[2]->value.ch[0]};
}

ProbMap UamrModel::infer(const RgbImage& image, const ProbMap& m_pseudo, const ProbMap& e_pseudo,
                         InferMode mode, std::uint64_t seed) const {
  const GaussianLatent prior = prior_encode(image, m_pseudo, e_pseudo);
  Eigen::VectorXd z = prior.mean;
  if (mode == InferMode::sample) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Eigen::VectorXd eps(latent_dim);
    for (int i = 0; i < latent_dim; ++i) eps(i) = noise(rng);
    z = sample_latent(prior, eps);
  }
  return refine(image, m_pseudo, e_pseudo, z).m_pred;
}

nn::ParamList UamrModel::params() const {
  nn::ParamList out;
  prior_net.collect("uamr.prior", out);
  posterior_net.collect("uamr.posterior", out);
  refine_backbone.collect("uamr.refine", out);
  head_pred.collect("uamr.head_pred", out);
  head_mref.collect("uamr.head_mref", out);
  head_eref.collect("uamr.head_eref", out);
  return out;
}

double refinement_loss(const RefinementOutput& prior_out, const RefinementOutput& post_out,
                       const ImageSample& sample, const ProbMap& /*m_pseudo*/,
                       const ProbMap& /*e_pseudo*/, const RefineWeights& w) {
  double loss = 0.0;
  loss += w.mse_prior * (mse(prior_out.m_ref, sample.gt_map) + mse(prior_out.e_ref, sample.gt_edge));
  loss += w.mse_post * (mse(post_out.m_ref, sample.gt_map) + mse(post_out.e_ref, sample.gt_edge));
  loss += w.smooth_prior * smoothness_loss(prior_out.m_pred, sample.image);
  loss += w.smooth_post * smoothness_loss(post_out.m_pred, sample.image);
  loss += w.struct_prior * structure_loss(prior_out.m_pred, sample.gt_map);
  loss += w.struct_post * structure_loss(post_out.m_pred, sample.gt_map);
  return loss;
}

UamrLossGraph build_uamr_loss_graph(const UamrModel& model, const ImageSample& sample,
                                    const nn::Var& m_pseudo, const nn::Var& e_pseudo,
                                    const Eigen::VectorXd& eps_prior,
                                    const Eigen::VectorXd& eps_post,
                                    const RefineWeights& w) {
  nn::Var image = nn::constant(nn::from_rgb(sample.image));
  nn::Var x5 = nn::concat({image, m_pseudo, e_pseudo});
  nn::Var x6 = nn::concat({image, m_pseudo, e_pseudo, map_const(sample.gt_map)});

  auto [mu_prior, sigma_prior] = model.prior_heads(x5);
  auto [mu_post, sigma_post] = model.posterior_heads(x6);

  // reparameterized draws
  nn::Var z_prior = nn::add(mu_prior, nn::mul(sigma_prior, latent_const(eps_prior)));
  nn::Var z_post = nn::add(mu_post, nn::mul(sigma_post, latent_const(eps_post)));

  auto prior_out = model.refine_heads(x5, z_prior);
  auto post_out = model.refine_heads(x5, z_post);

  // CVAE: Bernoulli reconstruction of the gt map from the posterior path + KL
  nn::Var recon = nn::bce_loss(post_out[0], sample.gt_map);
  nn::Var kl = nn::gaussian_kl_loss(mu_post, sigma_post, mu_prior, sigma_prior);
  nn::Var cvae = nn::add(recon, kl);

  const ProbMap gray = sample.image.gray();
  nn::Var ref = nn::scale(
      nn::add(nn::mse_loss(prior_out[1], sample.gt_map), nn::mse_loss(prior_out[2], sample.gt_edge)),
      w.mse_prior);
  ref = nn::add(ref, nn::scale(nn::add(nn::mse_loss(post_out[1], sample.gt_map),
                                       nn::mse_loss(post_out[2], sample.gt_edge)),
                               w.mse_post));
  ref = nn::add(ref, nn::scale(nn::smoothness_loss(prior_out[0], gray), w.smooth_prior));
  ref = nn::add(ref, nn::scale(nn::smoothness_loss(post_out[0], gray), w.smooth_post));
  ref = nn::add(ref, nn::scale(nn::structure_loss(prior_out[0], sample.gt_map), w.struct_prior));
  ref = nn::add(ref, nn::scale(nn::structure_loss(post_out[0], sample.gt_map), w.struct_post));

  return {cvae, ref};
}

UamrLossGraph build_uamr_loss(const UamrModel& model, const ImageSample& sample,
                              const ProbMap& m_pseudo, const ProbMap& e_pseudo,
                              const Eigen::VectorXd& eps_prior, const Eigen::VectorXd& eps_post,
                              const RefineWeights& weights) {
  return build_uamr_loss_graph(model, sample, map_const(m_pseudo), map_const(e_pseudo), eps_prior,
                               eps_post, weights);
}

double cvae_loss(const UamrModel& model, const ImageSample& sample, const ProbMap& m_pseudo,
                 const ProbMap& e_pseudo, const Eigen::VectorXd& eps) {
  UamrLossGraph g = build_uamr_loss(model, sample, m_pseudo, e_pseudo, eps, eps, RefineWeights{});
  return g.cvae->value.item();
}

}  // namespace urcod
