#pragma once

#include "urcod/types.hpp"

#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace urcod {

enum class ShapeKind { ellipse, blob, polygon };

struct SyntheticConfig {
  int count = 1;
  int size = 64;  // square, pixels
  std::set<ShapeKind> shape_kinds = {ShapeKind::ellipse, ShapeKind::blob, ShapeKind::polygon};
  double texture_similarity = 0.8;  // in [0,1]; higher = harder camouflage
  std::uint64_t seed = 0;
};

/// Edge label from a binary mask: morphological gradient with a square
/// structuring element of side 2*width+1.
ProbMap derive_edge_label(const ProbMap& mask, int width);

/// Loads an RGB image + grayscale mask pair; derives the edge label from the
/// binarized mask. Throws on missing files, bad encodings, or a size mismatch.
ImageSample load_sample(const std::filesystem::path& image_path,
                        const std::filesystem::path& map_path, int edge_width = 1);

/// Bilinear image resize; the map is re-binarized at 0.5 and the edge label is
/// re-derived from the resized map.
ImageSample resize_sample(const ImageSample& sample, int size, int edge_width = 1);

std::vector<ImageSample> generate_synthetic_dataset(const SyntheticConfig& cfg);

/// Writes samples in the dataset directory layout:
///   <root>/images/<id>.png  (8-bit RGB)
///   <root>/masks/<id>.png   (8-bit grayscale, 0 background / 255 foreground)
void write_dataset(const std::filesystem::path& root, const std::vector<ImageSample>& samples);

/// Loads every id found under <root>/masks, sorted by id.
std::vector<ImageSample> load_dataset(const std::filesystem::path& root, int edge_width = 1);

}  // namespace urcod
