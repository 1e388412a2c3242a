#include "urcod/pmg.hpp"

#include "urcod/imaging.hpp"
#include "urcod/png_io.hpp"

#include <random>
#include <stdexcept>

namespace urcod {

BuiltinSegmenter::BuiltinSegmenter(int input_size_, std::uint64_t seed) : input_size(input_size_) {
  std::mt19937_64 rng(seed);
  backbone = nn::EncDec(3, {16, 32, 64, 64}, 64, rng);
  head = nn::Conv2dLayer(backbone.channels[0], 1, 1, 1, 0, 1, rng);
}

nn::Var BuiltinSegmenter::forward(const nn::Var& image) const {
  return nn::sigmoid(head(backbone.trunk(image)));
}

ProbMap BuiltinSegmenter::predict(const RgbImage& image) const {
  if (image.height() != input_size || image.width() != input_size)
    throw std::invalid_argument("builtin segmenter: image size does not match model input size");
  return forward(nn::constant(nn::from_rgb(image)))->value.ch[0];
}

nn::ParamList BuiltinSegmenter::params() const {
  nn::ParamList out;
  backbone.collect("pmg.backbone", out);
  head.collect("pmg.head", out);
  return out;
}

PseudoMapSource PseudoMapSource::builtin(std::shared_ptr<BuiltinSegmenter> m) {
  PseudoMapSource s;
  s.kind = PseudoKind::builtin;
  s.model = std::move(m);
  return s;
}

PseudoMapSource PseudoMapSource::precomputed(std::filesystem::path dir) {
  PseudoMapSource s;
  s.kind = PseudoKind::precomputed;
  s.map_directory = std::move(dir);
  return s;
}

PseudoMapSource PseudoMapSource::corrupted(int blur_radius, double noise_sigma,
                                           std::uint64_t seed) {
  PseudoMapSource s;
  s.kind = PseudoKind::corrupted;
  s.blur_radius = blur_radius;
  s.noise_sigma = noise_sigma;
  s.seed = seed;
  return s;
}

ProbMap corrupt_map(const ProbMap& gt, int blur_radius, double noise_sigma, std::uint64_t seed) {
  if (blur_radius < 0 || noise_sigma < 0)
    throw std::invalid_argument("corrupt_map: radius and sigma must be nonnegative");
  ProbMap out = gaussian_blur_radius(gt, blur_radius);
  if (noise_sigma > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (int x = 0; x < out.cols(); ++x)
      for (int y = 0; y < out.rows(); ++y) out(y, x) += noise(rng);
  }
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

namespace {

std::uint64_t mix_id(std::uint64_t seed, const std::string& id) {
  // FNV-1a over the id, mixed with the source seed
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ProbMap generate_pseudo_map(const PseudoMapSource& source, const ImageSample& sample) {
  const int h = static_cast<int>(sample.gt_map.rows());
  const int w = static_cast<int>(sample.gt_map.cols());
  switch (source.kind) {
    case PseudoKind::builtin:
      if (!source.model) throw std::runtime_error("builtin pseudo-map source has no model");
      return source.model->predict(sample.image);
    case PseudoKind::precomputed: {
      const auto path = source.map_directory / (sample.id + ".png");
      if (!std::filesystem::exists(path))
        throw std::runtime_error("missing pseudo-map file for id " + sample.id + ": " +
                                 path.string());
      ProbMap map = to_prob_map(read_png(path));
      if (map.rows() != h || map.cols() != w) map = bilinear_resize(map, h, w);
      return map;
    }
    case PseudoKind::corrupted:
      return corrupt_map(sample.gt_map, source.blur_radius, source.noise_sigma,
                         mix_id(source.seed, sample.id));
  }
  throw std::logic_error("unreachable pseudo-map source kind");
}

}  // namespace urcod
