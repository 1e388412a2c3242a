#include "test_support.hpp"
#include "urcod/losses.hpp"
#include "urcod/uamr.hpp"

#include <doctest.h>

using namespace urcod;

namespace {

ImageSample random_sample(int size, std::mt19937_64& rng) {
  ImageSample s;
  s.id = "t";
  s.image = {testutil::random_map(size, size, rng), testutil::random_map(size, size, rng),
             testutil::random_map(size, size, rng)};
  s.gt_map = testutil::random_binary(size, size, rng);
  s.gt_edge = testutil::random_binary(size, size, rng, 0.1);
  return s;
}

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("sample_latent reparameterization") {
  GaussianLatent g{vec3(0.5, -1.0, 2.0), vec3(1.0, 0.5, 2.0)};
  CHECK((sample_latent(g, Eigen::VectorXd::Zero(3)) - g.mean).norm() == 0.0);
  GaussianLatent unit{vec3(0, 0, 0), vec3(1, 1, 1)};
  const Eigen::VectorXd eps = vec3(1, -1, 2);
  CHECK((sample_latent(unit, eps) - eps).norm() == 0.0);
  GaussianLatent tight{vec3(0.3, 0.3, 0.3), vec3(1e-12, 1e-12, 1e-12)};
  CHECK((sample_latent(tight, eps) - tight.mean).norm() < 1e-10);
  CHECK_THROWS_AS(sample_latent(g, Eigen::VectorXd::Zero(2)), std::invalid_argument);
}

TEST_CASE("encoders produce 3-dim positive-sigma Gaussians") {
  std::mt19937_64 rng(1);
  UamrModel model(48, 3, 11);
  const ImageSample s = random_sample(48, rng);
  const ProbMap mp = testutil::random_map(48, 48, rng);
  const ProbMap ep = testutil::random_map(48, 48, rng);

  const GaussianLatent prior = model.prior_encode(s.image, mp, ep);
  CHECK(prior.dim() == 3);
  CHECK((prior.std.array() > 0.0).all());
  const GaussianLatent post = model.posterior_encode(s.image, mp, ep, s.gt_map);
  CHECK(post.dim() == 3);
  CHECK((post.std.array() > 0.0).all());

  // determinism
  const GaussianLatent prior2 = model.prior_encode(s.image, mp, ep);
  CHECK((prior.mean - prior2.mean).norm() == 0.0);
  CHECK((prior.std - prior2.std).norm() == 0.0);
}

TEST_CASE("posterior reduces to the prior when the gt channel is ignored") {
  std::mt19937_64 rng(2);
  UamrModel model(48, 3, 13);
  // copy the prior weights into the posterior; zero the columns of the first
  // conv that read the extra m_gt channel (channel blocks are contiguous)
  const int k = model.prior_net.c1.spec.kernel;
  auto& post_c1 = model.posterior_net.c1;
  post_c1.w->value.ch[0].setZero();
  post_c1.w->value.ch[0].leftCols(5 * k * k) = model.prior_net.c1.w->value.ch[0];
  post_c1.b->value = model.prior_net.c1.b->value;
  model.posterior_net.c2.w->value = model.prior_net.c2.w->value;
  model.posterior_net.c2.b->value = model.prior_net.c2.b->value;
  model.posterior_net.c3.w->value = model.prior_net.c3.w->value;
  model.posterior_net.c3.b->value = model.prior_net.c3.b->value;
  model.posterior_net.head.w->value = model.prior_net.head.w->value;
  model.posterior_net.head.b->value = model.prior_net.head.b->value;

  const ImageSample s = random_sample(48, rng);
  const ProbMap mp = testutil::random_map(48, 48, rng);
  const ProbMap ep = testutil::random_map(48, 48, rng);
  const GaussianLatent prior = model.prior_encode(s.image, mp, ep);
  const GaussianLatent post = model.posterior_encode(s.image, mp, ep, s.gt_map);
  CHECK((prior.mean - post.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((prior.std - post.std).cwiseAbs().maxCoeff() < 1e-12);

  // and the KL between them is zero, so the cvae KL term vanishes
  CHECK(gaussian_kl(post, prior) < 1e-12);
}

TEST_CASE("refine output contracts") {
  std::mt19937_64 rng(3);
  UamrModel model(48, 3, 17);
  const ImageSample s = random_sample(48, rng);
  const ProbMap mp = testutil::random_map(48, 48, rng);
  const ProbMap ep = testutil::random_map(48, 48, rng);

  const RefinementOutput out = model.refine(s.image, mp, ep, vec3(0.1, -0.2, 0.3));
  for (const ProbMap* m : {&out.m_pred, &out.m_ref, &out.e_ref}) {
    CHECK(m->rows() == 48);
    CHECK(m->cols() == 48);
    CHECK(m->minCoeff() >= 0.0);
    CHECK(m->maxCoeff() <= 1.0);
  }
  SUBCASE("the latent conditions the output") {
    const RefinementOutput other = model.refine(s.image, mp, ep, vec3(2.0, 1.0, -1.5));
    CHECK((out.m_pred - other.m_pred).abs().maxCoeff() > 0.0);
  }
  SUBCASE("deterministic") {
    const RefinementOutput again = model.refine(s.image, mp, ep, vec3(0.1, -0.2, 0.3));
    CHECK((out.m_pred - again.m_pred).abs().maxCoeff() == 0.0);
  }
  SUBCASE("wrong latent dimension throws") {
    CHECK_THROWS(model.refine(s.image, mp, ep, Eigen::VectorXd::Zero(2)));
  }
}

TEST_CASE("infer modes") {
  std::mt19937_64 rng(4);
  UamrModel model(48, 3, 19);
  const ImageSample s = random_sample(48, rng);
  const ProbMap mp = testutil::random_map(48, 48, rng);
  const ProbMap ep = testutil::random_map(48, 48, rng);

  const ProbMap mean1 = model.infer(s.image, mp, ep, InferMode::mean);
  const ProbMap mean2 = model.infer(s.image, mp, ep, InferMode::mean);
  CHECK((mean1 - mean2).abs().maxCoeff() == 0.0);

  const ProbMap s1a = model.infer(s.image, mp, ep, InferMode::sample, 5);
  const ProbMap s1b = model.infer(s.image, mp, ep, InferMode::sample, 5);
  const ProbMap s2 = model.infer(s.image, mp, ep, InferMode::sample, 6);
  CHECK((s1a - s1b).abs().maxCoeff() == 0.0);
  CHECK((s1a - s2).abs().maxCoeff() > 0.0);
}

TEST_CASE("refinement loss weighting") {
  std::mt19937_64 rng(5);
  UamrModel model(48, 3, 23);
  const ImageSample s = random_sample(48, rng);
  const ProbMap mp = testutil::random_map(48, 48, rng);
  const ProbMap ep = testutil::random_map(48, 48, rng);
  const RefinementOutput prior_out = model.refine(s.image, mp, ep, vec3(0, 0, 0));
  const RefinementOutput post_out = model.refine(s.image, mp, ep, vec3(0.5, 0.5, 0.5));

  RefineWeights zero{0, 0, 0, 0, 0, 0};
  CHECK(refinement_loss(prior_out, post_out, s, mp, ep, zero) == doctest::Approx(0.0));

  RefineWeights ones;
  const double base = refinement_loss(prior_out, post_out, s, mp, ep, ones);
  CHECK(base > 0.0);
  RefineWeights twos{2, 2, 2, 2, 2, 2};
  CHECK(refinement_loss(prior_out, post_out, s, mp, ep, twos) ==
        doctest::Approx(2.0 * base).epsilon(1e-9));

  SUBCASE("perfect confident outputs cost only the gt smoothness") {
    ImageSample sq = s;
    sq.gt_map = ProbMap::Zero(48, 48);
    sq.gt_map.block(16, 16, 16, 16) = 1.0;
    sq.gt_edge = ProbMap::Zero(48, 48);
    sq.gt_edge.block(15, 15, 2, 18) = 1.0;
    const ProbMap conf_m = sq.gt_map * (1.0 - 2e-6) + 1e-6;
    const ProbMap conf_e = sq.gt_edge * (1.0 - 2e-6) + 1e-6;
    RefinementOutput perfect{conf_m, conf_m, conf_e};
    const double loss = refinement_loss(perfect, perfect, sq, conf_m, conf_e, ones);
    const double smooth = smoothness_loss(conf_m, sq.image);
    CHECK(loss == doctest::Approx(2.0 * smooth).epsilon(1e-3));
  }
}

TEST_CASE("cvae loss is nonnegative and KL gradients check out") {
  std::mt19937_64 rng(6);
  UamrModel model(48, 3, 29);
  const ImageSample s = random_sample(48, rng);
  const ProbMap mp = testutil::random_map(48, 48, rng);
  const ProbMap ep = testutil::random_map(48, 48, rng);
  CHECK(cvae_loss(model, s, mp, ep, Eigen::VectorXd::Zero(3)) >= 0.0);

  // gradient of the KL with respect to the posterior encoder inputs
  auto params = model.posterior_net.c1.w;
  auto build = [&] {
    nn::Var x6 = nn::concat({nn::constant(nn::from_rgb(s.image)),
                             nn::constant(nn::Tensor(mp)), nn::constant(nn::Tensor(ep)),
                             nn::constant(nn::Tensor(s.gt_map))});
    nn::Var x5 = nn::concat({nn::constant(nn::from_rgb(s.image)),
                             nn::constant(nn::Tensor(mp)), nn::constant(nn::Tensor(ep))});
    auto [mu_q, sigma_q] = model.posterior_heads(x6);
    auto [mu_p, sigma_p] = model.prior_heads(x5);
    return nn::gaussian_kl_loss(mu_q, sigma_q, mu_p, sigma_p);
  };
  CHECK(testutil::gradcheck({params}, build, 1e-4, 16) < 1e-3);
}

TEST_CASE("end-to-end objective gradients match finite differences") {
  std::mt19937_64 rng(7);
  UamrModel model(64, 3, 31);
  std::vector<ImageSample> batch = {random_sample(64, rng), random_sample(64, rng)};
  std::vector<ProbMap> mps = {testutil::random_map(64, 64, rng),
                              testutil::random_map(64, 64, rng)};
  std::vector<ProbMap> eps_maps = {testutil::random_map(64, 64, rng),
                                   testutil::random_map(64, 64, rng)};
  const Eigen::VectorXd ep1 = vec3(0.3, -0.7, 0.2), ep2 = vec3(-0.1, 0.4, 0.9);

  auto build = [&] {
    RefineWeights w;
    nn::Var total = nn::constant(nn::Tensor::scalar(0.0));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto losses =
          build_uamr_loss(model, batch[i], mps[i], eps_maps[i], ep1, ep2, w);
      total = nn::add(total, nn::add(losses.cvae, losses.ref));
    }
    return total;
  };

  // ten parameters spread across the prior, posterior and refinement nets
  auto all = model.params();
  std::vector<nn::Var> chosen;
  for (std::size_t i = 0; i < all.size(); i += std::max<std::size_t>(1, all.size() / 10)) {
    chosen.push_back(all[i].var);
    if (chosen.size() == 10) break;
  }
  // step 1e-5: the larger canonical step occasionally straddles a ReLU kink
  CHECK(testutil::gradcheck(chosen, build, 1e-5, 4) < 1e-2);
}
