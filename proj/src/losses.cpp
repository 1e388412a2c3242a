#include "urcod/losses.hpp"

#include "urcod/imaging.hpp"

#include <cmath>
#include <stdexcept>

namespace urcod {
namespace {

void check_dims(const nn::Var& pred, const ProbMap& target, const char* op) {
  if (pred->value.channels() != 1 || pred->value.height() != target.rows() ||
      pred->value.width() != target.cols())
    throw std::invalid_argument(std::string(op) + ": dimension mismatch");
}

nn::Var make_loss(double value, std::vector<nn::Var> parents,
                  std::function<void(nn::Node&)> backprop) {
  auto n = std::make_shared<nn::Node>();
  n->value = nn::Tensor::scalar(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || (p && p->requires_grad);
  n->requires_grad = needs;
  if (needs) {
    n->parents = std::move(parents);
    n->backprop = std::move(backprop);
  }
  return n;
}

}  // namespace

namespace nn {

Var bce_loss(const Var& pred, const ProbMap& target) {
  check_dims(pred, target, "bce");
  const Eigen::ArrayXXd p = pred->value.ch[0].cwiseMax(kProbEps).cwiseMin(1.0 - kProbEps);
  const double n = static_cast<double>(p.size());
  const double value = (-(target * p.log() + (1.0 - target) * (1.0 - p).log())).mean();
  auto t = std::make_shared<ProbMap>(target);
  auto pc = std::make_shared<Eigen::ArrayXXd>(p);
  return make_loss(value, {pred}, [t, pc, n](Node& node) {
    Var& x = node.parents[0];
    if (!x->requires_grad) return;
    const double g = node.grad.item() / n;
    // zero gradient where the clamp is active
    const auto active = ((x->value.ch[0] >= kProbEps) && (x->value.ch[0] <= 1.0 - kProbEps))
                            .cast<double>();
    x->grad.ch[0] += g * active * (-(*t) / *pc + (1.0 - *t) / (1.0 - *pc));
  });
}

Var mse_loss(const Var& pred, const ProbMap& target) {
  check_dims(pred, target, "mse");
  const Eigen::ArrayXXd diff = pred->value.ch[0] - target;
  const double n = static_cast<double>(diff.size());
  const double value = diff.square().mean();
  auto d = std::make_shared<Eigen::ArrayXXd>(diff);
  return make_loss(value, {pred}, [d, n](Node& node) {
    Var& x = node.parents[0];
    if (!x->requires_grad) return;
    x->grad.ch[0] += node.grad.item() * 2.0 / n * *d;
  });
}

Var smoothness_loss(const Var& pred, const ProbMap& image_gray) {
  check_dims(pred, image_gray, "smoothness");
  const Eigen::ArrayXXd& p = pred->value.ch[0];
  const int h = static_cast<int>(p.rows());
  const int w = static_cast<int>(p.cols());
  const double n = static_cast<double>(h) * w;

  // forward differences; weights from the image gradient magnitude
  Eigen::ArrayXXd dxp = p.rightCols(w - 1) - p.leftCols(w - 1);
  Eigen::ArrayXXd dyp = p.bottomRows(h - 1) - p.topRows(h - 1);
  Eigen::ArrayXXd wx =
      (-(image_gray.rightCols(w - 1) - image_gray.leftCols(w - 1)).abs()).exp();
  Eigen::ArrayXXd wy =
      (-(image_gray.bottomRows(h - 1) - image_gray.topRows(h - 1)).abs()).exp();

  const double value = ((dxp.abs() * wx).sum() + (dyp.abs() * wy).sum()) / n;
  auto sx = std::make_shared<Eigen::ArrayXXd>((dxp.sign() * wx).eval());
  auto sy = std::make_shared<Eigen::ArrayXXd>((dyp.sign() * wy).eval());
  return make_loss(value, {pred}, [sx, sy, h, w, n](Node& node) {
    Var& x = node.parents[0];
    if (!x->requires_grad) return;
    const double g = node.grad.item() / n;
    Eigen::ArrayXXd& gx = x->grad.ch[0];
    gx.leftCols(w - 1) -= g * *sx;
    gx.rightCols(w - 1) += g * *sx;
    gx.topRows(h - 1) -= g * *sy;
    gx.bottomRows(h - 1) += g * *sy;
  });
}

Var structure_loss(const Var& pred, const ProbMap& target) {
  check_dims(pred, target, "structure");
  constexpr double kIouEps = 1e-6;
  const Eigen::ArrayXXd p = pred->value.ch[0].cwiseMax(kProbEps).cwiseMin(1.0 - kProbEps);
  const Eigen::ArrayXXd weit = 1.0 + 5.0 * (box_mean(target, 15) - target).abs();
  const double wsum = weit.sum();

  const Eigen::ArrayXXd pix_bce = -(target * p.log() + (1.0 - target) * (1.0 - p).log());
  const double wbce = (weit * pix_bce).sum() / wsum;

  const double inter = (weit * p * target).sum();
  const double uni = (weit * (p + target - p * target)).sum();
  const double wiou = 1.0 - inter / (uni + kIouEps);

  auto tgt = std::make_shared<ProbMap>(target);
  auto pc = std::make_shared<Eigen::ArrayXXd>(p);
  auto wt = std::make_shared<Eigen::ArrayXXd>(weit);
  return make_loss(wbce + wiou, {pred}, [tgt, pc, wt, wsum, inter, uni](Node& node) {
    Var& x = node.parents[0];
    if (!x->requires_grad) return;
    const double g = node.grad.item();
    const auto active = ((x->value.ch[0] >= kProbEps) && (x->value.ch[0] <= 1.0 - kProbEps))
                            .cast<double>();
    const Eigen::ArrayXXd dbce = *wt / wsum * (-(*tgt) / *pc + (1.0 - *tgt) / (1.0 - *pc));
    const double denom = uni + kIouEps;
    const Eigen::ArrayXXd di = *wt * *tgt;
    const Eigen::ArrayXXd du = *wt * (1.0 - *tgt);
    const Eigen::ArrayXXd diou = -(di * denom - inter * du) / (denom * denom);
    x->grad.ch[0] += g * active * (dbce + diou);
  });
}

Var gaussian_kl_loss(const Var& mu_q, const Var& sigma_q, const Var& mu_p, const Var& sigma_p) {
  const auto& mq = mu_q->value.ch[0];
  const auto& sq = sigma_q->value.ch[0];
  const auto& mp = mu_p->value.ch[0];
  const auto& sp = sigma_p->value.ch[0];
  if (mq.rows() != sq.rows() || mq.rows() != mp.rows() || mq.rows() != sp.rows())
    throw std::invalid_argument("gaussian_kl: latent dimension mismatch");
  if ((sq <= 0.0).any() || (sp <= 0.0).any())
    throw std::invalid_argument("gaussian_kl: standard deviations must be positive");

  const Eigen::ArrayXXd d = mq - mp;
  const double value =
      ((sp / sq).log() + (sq.square() + d.square()) / (2.0 * sp.square()) - 0.5).sum();
  return make_loss(value, {mu_q, sigma_q, mu_p, sigma_p}, [](Node& node) {
    const auto& mq = node.parents[0]->value.ch[0];
    const auto& sq = node.parents[1]->value.ch[0];
    const auto& mp = node.parents[2]->value.ch[0];
    const auto& sp = node.parents[3]->value.ch[0];
    const double g = node.grad.item();
    const Eigen::ArrayXXd d = mq - mp;
    const Eigen::ArrayXXd sp2 = sp.square();
    if (node.parents[0]->requires_grad) node.parents[0]->grad.ch[0] += g * d / sp2;
    if (node.parents[1]->requires_grad)
      node.parents[1]->grad.ch[0] += g * (sq / sp2 - 1.0 / sq);
    if (node.parents[2]->requires_grad) node.parents[2]->grad.ch[0] -= g * d / sp2;
    if (node.parents[3]->requires_grad)
      node.parents[3]->grad.ch[0] += g * (1.0 / sp - (sq.square() + d.square()) / (sp2 * sp));
  });
}

Var edge_loss(const Var& pred, const ProbMap& gt_edge, double flooding_level) {
  Var l = bce_loss(pred, gt_edge);
  return add_scalar(abs_(add_scalar(l, -flooding_level)), flooding_level);
}

}  // namespace nn

double bce(const ProbMap& pred, const ProbMap& target) {
  return nn::bce_loss(nn::constant(nn::Tensor(pred)), target)->value.item();
}

double mse(const ProbMap& pred, const ProbMap& target) {
  return nn::mse_loss(nn::constant(nn::Tensor(pred)), target)->value.item();
}

double smoothness_loss(const ProbMap& pred, const RgbImage& image) {
  return nn::smoothness_loss(nn::constant(nn::Tensor(pred)), image.gray())->value.item();
}

double structure_loss(const ProbMap& pred, const ProbMap& target) {
  return nn::structure_loss(nn::constant(nn::Tensor(pred)), target)->value.item();
}

double gaussian_kl(const GaussianLatent& q, const GaussianLatent& p) {
  auto vec = [](const Eigen::VectorXd& v) {
    Eigen::ArrayXXd a(v.size(), 1);
    a.col(0) = v.array();
    return nn::constant(nn::Tensor(std::move(a)));
  };
  return nn::gaussian_kl_loss(vec(q.mean), vec(q.std), vec(p.mean), vec(p.std))->value.item();
}

double edge_loss(const ProbMap& pred, const ProbMap& gt_edge, double flooding_level) {
  return std::abs(bce(pred, gt_edge) - flooding_level) + flooding_level;
}

}  // namespace urcod
