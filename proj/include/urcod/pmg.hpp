#pragma once

#include "urcod/nn/layers.hpp"
#include "urcod/types.hpp"

#include <filesystem>
#include <memory>

namespace urcod {

/// Toy conventional-COD stand-in: the PEG encoder/decoder skeleton without the
/// DAC/RMP context blocks, trained with structure loss only.
struct BuiltinSegmenter {
  int input_size = 64;
  nn::EncDec backbone;
  nn::Conv2dLayer head;

  BuiltinSegmenter() = default;
  BuiltinSegmenter(int input_size, std::uint64_t seed);

  nn::Var forward(const nn::Var& image) const;
  ProbMap predict(const RgbImage& image) const;
  nn::ParamList params() const;
};

enum class PseudoKind { builtin, precomputed, corrupted };

struct PseudoMapSource {
  PseudoKind kind = PseudoKind::corrupted;
  std::shared_ptr<BuiltinSegmenter> model;  // builtin
  std::filesystem::path map_directory;      // precomputed
  int blur_radius = 2;                      // corrupted
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  static PseudoMapSource builtin(std::shared_ptr<BuiltinSegmenter> m);
  static PseudoMapSource precomputed(std::filesystem::path dir);
  static PseudoMapSource corrupted(int blur_radius, double noise_sigma, std::uint64_t seed = 0);
};

/// Gaussian blur followed by additive Gaussian noise, clipped to [0,1].
ProbMap corrupt_map(const ProbMap& gt, int blur_radius, double noise_sigma, std::uint64_t seed);

ProbMap generate_pseudo_map(const PseudoMapSource& source, const ImageSample& sample);

}  // namespace urcod
