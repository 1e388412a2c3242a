#include "test_support.hpp"
#include "urcod/dataset.hpp"
#include "urcod/metrics.hpp"
#include "urcod/pmg.hpp"
#include "urcod/png_io.hpp"

#include <doctest.h>

#include <filesystem>

using namespace urcod;
namespace fs = std::filesystem;

TEST_CASE("corrupt_map basics") {
  std::mt19937_64 rng(1);
  ProbMap gt = ProbMap::Zero(24, 24);
  gt.block(8, 8, 8, 8) = 1.0;

  SUBCASE("identity corruption") {
    CHECK((corrupt_map(gt, 0, 0.0, 5) - gt).abs().maxCoeff() == 0.0);
  }
  SUBCASE("strictly perturbs a non-constant map") {
    CHECK(mae(corrupt_map(gt, 3, 0.1, 5), gt) > 0.0);
  }
  SUBCASE("deterministic per seed") {
    const ProbMap a = corrupt_map(gt, 2, 0.1, 9);
    const ProbMap b = corrupt_map(gt, 2, 0.1, 9);
    CHECK((a - b).abs().maxCoeff() == 0.0);
    CHECK(mae(corrupt_map(gt, 2, 0.1, 10), a) > 0.0);
  }
  SUBCASE("stays in the unit interval") {
    const ProbMap c = corrupt_map(gt, 1, 0.5, 3);
    CHECK(c.minCoeff() >= 0.0);
    CHECK(c.maxCoeff() <= 1.0);
  }
}

TEST_CASE("corrupt_map blur radius monotonically degrades mae") {
  SyntheticConfig cfg;
  cfg.count = 20;
  cfg.size = 48;
  cfg.seed = 77;
  const auto masks = generate_synthetic_dataset(cfg);
  double prev = -1.0;
  for (int radius : {0, 1, 2, 3}) {
    double acc = 0;
    for (const auto& s : masks) acc += mae(corrupt_map(s.gt_map, radius, 0.0, 1), s.gt_map);
    acc /= masks.size();
    CHECK(acc >= prev);
    prev = acc;
  }
}

TEST_CASE("precomputed pseudo-map source") {
  const fs::path dir = fs::temp_directory_path() / "urcod_pmg_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  ImageSample sample;
  sample.id = "cat_01";
  sample.image = {ProbMap::Zero(12, 12), ProbMap::Zero(12, 12), ProbMap::Zero(12, 12)};
  sample.gt_map = ProbMap::Zero(12, 12);
  sample.gt_edge = ProbMap::Zero(12, 12);

  SUBCASE("8-bit 255 map loads as all ones") {
    write_png_gray(dir / "cat_01.png", ProbMap::Ones(12, 12));
    const ProbMap m = generate_pseudo_map(PseudoMapSource::precomputed(dir), sample);
    CHECK((m - 1.0).abs().maxCoeff() == 0.0);
  }
  SUBCASE("maps at another resolution are resized to the sample") {
    write_png_gray(dir / "cat_01.png", ProbMap::Constant(30, 20, 0.5));
    const ProbMap m = generate_pseudo_map(PseudoMapSource::precomputed(dir), sample);
    CHECK(m.rows() == 12);
    CHECK(m.cols() == 12);
  }
  SUBCASE("missing file error names the id") {
    try {
      generate_pseudo_map(PseudoMapSource::precomputed(dir), sample);
      FAIL("expected an error for the missing pseudo map");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("cat_01") != std::string::npos);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("builtin segmenter source is deterministic and interchangeable") {
  std::mt19937_64 rng(3);
  ImageSample sample;
  sample.id = "s";
  sample.image = {testutil::random_map(48, 48, rng), testutil::random_map(48, 48, rng),
                  testutil::random_map(48, 48, rng)};
  sample.gt_map = testutil::random_binary(48, 48, rng);
  sample.gt_edge = ProbMap::Zero(48, 48);

  auto model = std::make_shared<BuiltinSegmenter>(48, 99);
  const auto source = PseudoMapSource::builtin(model);
  const ProbMap a = generate_pseudo_map(source, sample);
  const ProbMap b = generate_pseudo_map(source, sample);
  CHECK((a - b).abs().maxCoeff() == 0.0);
  CHECK(a.rows() == 48);
  CHECK(a.minCoeff() >= 0.0);
  CHECK(a.maxCoeff() <= 1.0);

  // corrupted source satisfies the same output contract
  const ProbMap c = generate_pseudo_map(PseudoMapSource::corrupted(2, 0.1, 7), sample);
  CHECK(c.rows() == 48);
  CHECK(c.minCoeff() >= 0.0);
  CHECK(c.maxCoeff() <= 1.0);

  // parameters carry the pmg prefix
  for (const auto& p : model->params()) CHECK(p.name.rfind("pmg.", 0) == 0);
}
