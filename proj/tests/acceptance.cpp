// Acceptance driver: exercises the end-to-end contracts of the library and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include "test_support.hpp"
#include "urcod/cli.hpp"
#include "urcod/dataset.hpp"
#include "urcod/losses.hpp"
#include "urcod/metrics.hpp"
#include "urcod/peg.hpp"
#include "urcod/pmg.hpp"
#include "urcod/trainer.hpp"
#include "urcod/uamr.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace urcod;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nn::Var param_map(const ProbMap& m) { return nn::parameter(nn::Tensor(m.array())); }

ImageSample random_sample(int size, std::mt19937_64& rng) {
  ImageSample s;
  s.id = "t";
  s.image = {testutil::random_map(size, size, rng), testutil::random_map(size, size, rng),
             testutil::random_map(size, size, rng)};
  s.gt_map = testutil::random_binary(size, size, rng);
  s.gt_edge = testutil::random_binary(size, size, rng, 0.1);
  return s;
}

// --- criterion 1: metric oracle equivalence ---

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(11);
  double worst = 0;
  auto compare = [&](const ProbMap& pred, const ProbMap& gt) {
    worst = std::max(worst, std::fabs(mae(pred, gt) - oracle::mae(pred, gt)));
    worst = std::max(worst, std::fabs(s_measure(pred, gt) - oracle::s_measure(pred, gt)));
    worst = std::max(worst, std::fabs(e_measure(pred, gt) - oracle::e_measure(pred, gt)));
    worst = std::max(worst,
                     std::fabs(weighted_f_measure(pred, gt) - oracle::weighted_f_measure(pred, gt)));
  };
  for (int i = 0; i < 200; ++i)
    compare(testutil::random_map(16, 16, rng), testutil::random_binary(16, 16, rng));
  // 20 structured cases: perfect, inverted, all-zero and all-one predictions
  for (int i = 0; i < 5; ++i) {
    const ProbMap gt = testutil::random_binary(16, 16, rng, 0.3);
    compare(gt, gt);
    compare(ProbMap(1.0 - gt.array()), gt);
    compare(ProbMap::Zero(16, 16), gt);
    compare(ProbMap::Ones(16, 16), gt);
  }
  const double sec = elapsed_s(t0);
  report(1, worst < 1e-6 && sec < 30.0,
         "metric oracle equivalence (worst |diff| " + fmt(worst) + ", " + fmt(sec) + " s)");
}

// --- criterion 2: perfect-prediction fixed point ---

void criterion_2() {
  SyntheticConfig sc;
  sc.count = 50;
  sc.size = 64;
  sc.seed = 5;
  const auto data = generate_synthetic_dataset(sc);
  std::vector<ProbMap> preds;
  for (const auto& s : data) preds.push_back(s.gt_map);
  const auto r = evaluate_dataset(preds, data);
  const double worst = std::max({std::fabs(r.mean_mae), std::fabs(r.mean_s - 1.0),
                                 std::fabs(r.mean_e - 1.0), std::fabs(r.mean_wf - 1.0)});
  report(2, worst < 1e-6, "perfect-prediction fixed point (worst |diff| " + fmt(worst) + ")");
}

// --- criterion 3: flooding floor ---

void criterion_3() {
  std::mt19937_64 rng(13);
  const double b = 0.02;
  bool floored = true;
  for (int i = 0; i < 1000; ++i) {
    const ProbMap pred = testutil::random_map(8, 8, rng);
    const ProbMap target = testutil::random_binary(8, 8, rng);
    if (edge_loss(pred, target, b) < b) floored = false;
  }
  // bce constructed to equal b exactly: pred = exp(-b) against an all-one target
  const ProbMap at_floor = ProbMap::Constant(8, 8, std::exp(-b));
  const double at = edge_loss(at_floor, ProbMap::Ones(8, 8), b);
  report(3, floored && std::fabs(at - b) < 1e-9,
         "flooding floor (loss at bce==b: " + fmt(at) + ")");
}

// --- criterion 4: KL properties ---

void criterion_4() {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mu(-2.0, 2.0), sd(0.1, 2.0);
  bool nonneg = true, zero = true;
  for (int i = 0; i < 1000; ++i) {
    const int d = 1 + static_cast<int>(rng() % 5);
    GaussianLatent q, p;
    q.mean.resize(d), q.std.resize(d), p.mean.resize(d), p.std.resize(d);
    for (int j = 0; j < d; ++j) {
      q.mean[j] = mu(rng), q.std[j] = sd(rng);
      p.mean[j] = mu(rng), p.std[j] = sd(rng);
    }
    if (gaussian_kl(q, p) < 0.0) nonneg = false;
    if (std::fabs(gaussian_kl(q, q)) > 1e-12) zero = false;
  }
  GaussianLatent q1, p1;
  q1.mean = Eigen::VectorXd::Ones(1), q1.std = Eigen::VectorXd::Ones(1);
  p1.mean = Eigen::VectorXd::Zero(1), p1.std = Eigen::VectorXd::Ones(1);
  const double half = gaussian_kl(q1, p1);
  report(4, nonneg && zero && std::fabs(half - 0.5) < 1e-9,
         "KL nonnegativity / identity / KL(N(1,1)||N(0,1)) = " + fmt(half));
}

// --- criterion 5: gradient correctness ---

void criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(19);
  double worst = 0;
  for (const int n : {4, 16}) {
    const ProbMap target = testutil::random_binary(n, n, rng);
    ProbMap start = testutil::random_map(n, n, rng);
    start = start * 0.8 + 0.1;  // keep clear of the log clamps
    const ProbMap gray = testutil::random_map(n, n, rng);
    auto p1 = param_map(start);
    worst = std::max(worst, testutil::gradcheck({p1}, [&] { return nn::bce_loss(p1, target); }));
    auto p2 = param_map(start);
    worst = std::max(worst, testutil::gradcheck({p2}, [&] { return nn::mse_loss(p2, target); }));
    auto p3 = param_map(start);
    worst = std::max(
        worst, testutil::gradcheck({p3}, [&] { return nn::smoothness_loss(p3, gray); }));
    auto p4 = param_map(start);
    worst = std::max(worst,
                     testutil::gradcheck({p4}, [&] { return nn::structure_loss(p4, target); }));
    auto p5 = param_map(start);
    worst = std::max(
        worst, testutil::gradcheck({p5}, [&] { return nn::edge_loss(p5, target, 0.02); }));
  }
  {
    std::uniform_real_distribution<double> uni(0.3, 1.5);
    auto vec = [&](double lo, double hi) {
      std::uniform_real_distribution<double> u(lo, hi);
      Eigen::ArrayXXd a(3, 1);
      for (int i = 0; i < 3; ++i) a(i, 0) = u(rng);
      return nn::parameter(nn::Tensor(std::move(a)));
    };
    auto mq = vec(-1, 1), sq = vec(0.3, 1.5), mp = vec(-1, 1), sp = vec(0.3, 1.5);
    worst = std::max(worst, testutil::gradcheck({mq, sq, mp, sp}, [&] {
      return nn::gaussian_kl_loss(mq, sq, mp, sp);
    }));
  }
  const bool simple_ok = worst < 1e-3;

  // end-to-end objective: PEG edge term plus the UAMR CVAE + refinement terms
  DacConfig dac;
  dac.channels = 8;
  PegModel peg(64, dac, EdgeLossConfig{}, 23);
  UamrModel uamr(64, 3, 29);
  const ImageSample sample = random_sample(64, rng);
  const ProbMap m_pseudo = testutil::random_map(64, 64, rng);
  const ProbMap e_pseudo = testutil::random_map(64, 64, rng);
  Eigen::VectorXd ep1(3), ep2(3);
  ep1 << 0.3, -0.7, 0.2;
  ep2 << -0.1, 0.4, 0.9;
  auto build = [&] {
    nn::Var edge = nn::edge_loss(peg.forward(nn::constant(nn::from_rgb(sample.image))),
                                 sample.gt_edge, peg.loss_cfg.flooding_level);
    const auto losses =
        build_uamr_loss(uamr, sample, m_pseudo, e_pseudo, ep1, ep2, RefineWeights{});
    return nn::add(edge, nn::add(losses.cvae, losses.ref));
  };
  std::vector<nn::Var> chosen;
  auto pick = [&](const nn::ParamList& all, std::size_t want) {
    const std::size_t stride = std::max<std::size_t>(1, all.size() / want);
    for (std::size_t i = 0; i < all.size() && chosen.size() < want; i += stride)
      chosen.push_back(all[i].var);
  };
  pick(peg.params(), 4);
  pick(uamr.params(), 10);
  // step 1e-5: the canonical 1e-4 step occasionally straddles a ReLU kink
  const double e2e = testutil::gradcheck(chosen, build, 1e-5, 3);
  const double sec = elapsed_s(t0);
  report(5, simple_ok && e2e < 1e-2 && sec < 120.0,
         "gradient checks (losses " + fmt(worst) + ", end-to-end " + fmt(e2e) + ", " +
             fmt(sec) + " s)");
}

// --- criterion 6: atrous convolution equivalence ---

void criterion_6() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  bool ok = true;
  for (int t = 0; t < 100; ++t) {
    const int k = 1 + static_cast<int>(rng() % 4);
    const int r = 1 + static_cast<int>(rng() % 3);
    const int n = r * (k - 1) + 1 + static_cast<int>(rng() % 12);
    Eigen::ArrayXd x(n), w(k);
    for (int i = 0; i < n; ++i) x[i] = uni(rng);
    for (int i = 0; i < k; ++i) w[i] = uni(rng);
    const Eigen::ArrayXd got = atrous_conv(x, w, r);
    const int out = n - r * (k - 1);
    if (got.size() != out) ok = false;
    for (int i = 0; i < out && ok; ++i) {
      double acc = 0;
      for (int j = 0; j < k; ++j) acc += x[i + r * j] * w[j];
      if (got[i] != acc) ok = false;  // identical summation order: exact match
    }
    if (r == 1) {
      // rate 1 must coincide with the standard valid convolution
      Eigen::ArrayXd plain(out);
      for (int i = 0; i < out; ++i) {
        double acc = 0;
        for (int j = 0; j < k; ++j) acc += x[i + j] * w[j];
        plain[i] = acc;
      }
      if ((got - plain).abs().maxCoeff() != 0.0) ok = false;
    }
  }
  report(6, ok, "atrous_conv matches the dilated-sum oracle exactly");
}

// --- criteria 7 and 8: desk-scale benchmark (shared dataset and config) ---

void criteria_7_and_8() {
  SyntheticConfig sc;
  sc.count = 200;
  sc.size = 64;
  sc.seed = 2026;
  const auto data = generate_synthetic_dataset(sc);

  TrainConfig cfg;
  cfg.peg_epochs = 25;
  cfg.epochs = 15;  // UAMR stage; well under the 50-epoch budget
  cfg.batch_size = 10;
  cfg.lr0 = 2e-4;
  cfg.input_size = 64;
  cfg.seed = 1;
  const auto src = PseudoMapSource::corrupted(2, 0.1, cfg.seed);

  // criterion 7: refinement must beat the corrupted pseudo-maps it was fed.
  // ablate(full) trains on the first 160 samples and evaluates on the held-out
  // 40 with the deterministic prior-mean decode.
  const auto t7 = std::chrono::steady_clock::now();
  const auto full = ablate(cfg, data, src, AblateMode::full);
  std::vector<ProbMap> pseudos;
  std::vector<ImageSample> held(data.begin() + 160, data.end());
  for (const auto& s : held) pseudos.push_back(generate_pseudo_map(src, s));
  const auto raw = evaluate_dataset(pseudos, held);
  const double sec7 = elapsed_s(t7);
  report(7,
         full.mean_wf > raw.mean_wf && full.mean_mae < raw.mean_mae && sec7 < 900.0,
         "uncertainty reduction (refined wf " + fmt(full.mean_wf) + " vs pseudo " +
             fmt(raw.mean_wf) + ", mae " + fmt(full.mean_mae) + " vs " + fmt(raw.mean_mae) +
             ", " + fmt(sec7) + " s)");

  const auto no_peg = ablate(cfg, data, src, AblateMode::no_peg);
  const auto no_pmg = ablate(cfg, data, src, AblateMode::no_pmg);
  report(8,
         full.mean_wf >= no_peg.mean_wf && no_peg.mean_wf >= no_pmg.mean_wf &&
             full.mean_wf - no_pmg.mean_wf > 0.05,
         "ablation direction (wf full " + fmt(full.mean_wf) + " >= no_peg " +
             fmt(no_peg.mean_wf) + " >= no_pmg " + fmt(no_pmg.mean_wf) + ")");
}

// --- criterion 9: determinism ---

void criterion_9() {
  const fs::path root = fs::temp_directory_path() / "urcod_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string data = (root / "data").string();
  auto run = [&](std::initializer_list<std::string> args) {
    return cli::run(std::vector<std::string>(args));
  };
  bool ok = run({"prepare", "--out", data, "--count", "6", "--size", "48", "--seed", "3"}) == 0;
  std::vector<std::vector<char>> bytes[2];
  for (int pass = 0; pass < 2 && ok; ++pass) {
    const std::string rund = (root / ("run" + std::to_string(pass))).string();
    const std::string pred = (root / ("pred" + std::to_string(pass))).string();
    ok = ok && run({"train", "--data", data, "--out", rund, "--epochs", "2", "--batch-size",
                    "3", "--input-size", "48", "--seed", "9"}) == 0;
    ok = ok && run({"infer", "--data", data, "--checkpoint", rund + "/checkpoint.urck",
                    "--out", pred, "--seed", "9"}) == 0;
    for (int i = 0; i < 6 && ok; ++i)
      bytes[pass].push_back(slurp(fs::path(pred) / ("syn_0000" + std::to_string(i) + ".png")));
  }
  bool identical = ok;
  for (int i = 0; i < 6 && identical; ++i)
    identical = !bytes[0][i].empty() && bytes[0][i] == bytes[1][i];
  fs::remove_all(root);
  report(9, identical, "seeded train + infer reruns produce byte-identical PNGs");
}

// --- criterion 10: learning-rate schedule ---

void criterion_10() {
  const TrainConfig cfg;  // defaults: lr0 5e-5, decay 0.9 from epoch 80 of 100
  bool ok = true;
  for (int e = 1; e <= 100; ++e) {
    const double want = e <= 80 ? 5e-5 : 5e-5 * std::pow(0.9, e - 80);
    if (learning_rate(cfg, e) != want) ok = false;
  }
  report(10, ok, "learning-rate schedule matches 5e-5 * 0.9^(max(0, e-80)) exactly");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criteria_7_and_8();
  criterion_9();
  criterion_10();
  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
