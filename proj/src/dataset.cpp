#include "urcod/dataset.hpp"

#include "urcod/imaging.hpp"
#include "urcod/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace urcod {

ProbMap derive_edge_label(const ProbMap& mask, int width) {
  if (width < 1) throw std::invalid_argument("edge width must be >= 1");
  return morphological_gradient(binarize(mask), width);
}

ImageSample load_sample(const std::filesystem::path& image_path,
                        const std::filesystem::path& map_path, int edge_width) {
  if (!std::filesystem::exists(image_path))
    throw std::runtime_error("missing image file: " + image_path.string());
  if (!std::filesystem::exists(map_path))
    throw std::runtime_error("missing map file: " + map_path.string());

  ImageSample sample;
  sample.id = image_path.stem().string();
  sample.image = to_rgb_image(read_png(image_path));
  sample.gt_map = to_prob_map(read_png(map_path));
  if (sample.gt_map.rows() != sample.image.r.rows() || sample.gt_map.cols() != sample.image.r.cols())
    throw std::runtime_error("dimension mismatch between image and map for id " + sample.id);
  sample.gt_map = binarize(sample.gt_map);
  sample.gt_edge = derive_edge_label(sample.gt_map, edge_width);
  return sample;
}

ImageSample resize_sample(const ImageSample& sample, int size, int edge_width) {
  if (size < 16) throw std::invalid_argument("resize target must be >= 16");
  ImageSample out;
  out.id = sample.id;
  out.image = bilinear_resize(sample.image, size, size);
  out.gt_map = binarize(bilinear_resize(sample.gt_map, size, size));
  out.gt_edge = derive_edge_label(out.gt_map, edge_width);
  return out;
}

namespace {

constexpr double kPi = std::numbers::pi;

ProbMap ellipse_mask(int s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double cy = (0.35 + 0.3 * uni(rng)) * s;
  const double cx = (0.35 + 0.3 * uni(rng)) * s;
  const double a = (0.12 + 0.15 * uni(rng)) * s;
  const double b = (0.12 + 0.15 * uni(rng)) * s;
  const double th = uni(rng) * kPi;
  ProbMap mask = ProbMap::Zero(s, s);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      const double dy = y - cy, dx = x - cx;
      const double u = std::cos(th) * dx + std::sin(th) * dy;
      const double v = -std::sin(th) * dx + std::cos(th) * dy;
      if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0) mask(y, x) = 1.0;
    }
  return mask;
}

ProbMap blob_mask(int s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double cy = (0.35 + 0.3 * uni(rng)) * s;
  const double cx = (0.35 + 0.3 * uni(rng)) * s;
  const double base = (0.13 + 0.12 * uni(rng)) * s;
  double amp[3], phase[3];
  for (int k = 0; k < 3; ++k) {
    amp[k] = 0.08 + 0.12 * uni(rng);
    phase[k] = uni(rng) * 2 * kPi;
  }
  ProbMap mask = ProbMap::Zero(s, s);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      const double dy = y - cy, dx = x - cx;
      const double theta = std::atan2(dy, dx);
      double r = base;
      for (int k = 0; k < 3; ++k) r *= 1.0 + amp[k] * std::sin((k + 2) * theta + phase[k]);
      if (dx * dx + dy * dy <= r * r) mask(y, x) = 1.0;
    }
  return mask;
}

ProbMap polygon_mask(int s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double cy = (0.35 + 0.3 * uni(rng)) * s;
  const double cx = (0.35 + 0.3 * uni(rng)) * s;
  const int n = 5 + static_cast<int>(uni(rng) * 4);  // 5..8 vertices
  std::vector<double> px(n), py(n);
  for (int i = 0; i < n; ++i) {
    const double theta = 2 * kPi * (i + 0.6 * uni(rng)) / n;
    const double r = (0.12 + 0.16 * uni(rng)) * s;
    px[i] = cx + r * std::cos(theta);
    py[i] = cy + r * std::sin(theta);
  }
  ProbMap mask = ProbMap::Zero(s, s);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x) {
      bool inside = false;  // ray crossing test
      for (int i = 0, j = n - 1; i < n; j = i++) {
        if ((py[i] > y) != (py[j] > y) &&
            x < (px[j] - px[i]) * (y - py[i]) / (py[j] - py[i]) + px[i])
          inside = !inside;
      }
      if (inside) mask(y, x) = 1.0;
    }
  return mask;
}

/// Rescales noise to a given mean/std, clipped to [0,1].
ProbMap match_stats(const ProbMap& noise, double mean, double std_dev) {
  const double m = noise.mean();
  const double sd = std::sqrt((noise - m).square().mean()) + 1e-12;
  return ((noise - m) * (std_dev / sd) + mean).cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

std::vector<ImageSample> generate_synthetic_dataset(const SyntheticConfig& cfg) {
  if (cfg.count < 1) throw std::invalid_argument("count must be >= 1");
  if (cfg.size < 16) throw std::invalid_argument("size must be >= 16");
  if (cfg.shape_kinds.empty()) throw std::invalid_argument("shape_kinds must be nonempty");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const std::vector<ShapeKind> kinds(cfg.shape_kinds.begin(), cfg.shape_kinds.end());
  const int s = cfg.size;
  const int cell = std::max(2, s / 12);

  std::vector<ImageSample> samples;
  samples.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) {
    ImageSample sm;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "syn_%05d", i);
    sm.id = buf;

    const ShapeKind kind = kinds[static_cast<std::size_t>(uni(rng) * kinds.size()) % kinds.size()];
    switch (kind) {
      case ShapeKind::ellipse: sm.gt_map = ellipse_mask(s, rng); break;
      case ShapeKind::blob: sm.gt_map = blob_mask(s, rng); break;
      case ShapeKind::polygon: sm.gt_map = polygon_mask(s, rng); break;
    }
    sm.gt_edge = derive_edge_label(sm.gt_map, 1);

    const double bg_mean = 0.35 + 0.3 * uni(rng);
    const double bg_std = 0.10 + 0.08 * uni(rng);
    const ProbMap bg = match_stats(value_noise(s, s, cell, rng), bg_mean, bg_std);

    // Foreground: fresh noise whose statistics slide from contrasting to
    // background-matched as texture_similarity rises.
    const double t = std::clamp(cfg.texture_similarity, 0.0, 1.0);
    const double contrast_mean = bg_mean > 0.5 ? bg_mean - 0.35 : bg_mean + 0.35;
    const double fg_mean = t * bg_mean + (1 - t) * contrast_mean;
    const double fg_std = t * bg_std + (1 - t) * (bg_std * 2.5);
    const ProbMap fg = match_stats(value_noise(s, s, std::max(2, cell - 1), rng), fg_mean, fg_std);

    const ProbMap gray = sm.gt_map * fg + (1.0 - sm.gt_map) * bg;
    // mild fixed channel tints so images are genuinely RGB
    sm.image.r = (gray * 1.05).cwiseMin(1.0);
    sm.image.g = gray;
    sm.image.b = (gray * 0.95).cwiseMax(0.0);
    samples.push_back(std::move(sm));
  }
  return samples;
}

void write_dataset(const std::filesystem::path& root, const std::vector<ImageSample>& samples) {
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "masks");
  for (const auto& s : samples) {
    write_png_rgb(root / "images" / (s.id + ".png"), s.image);
    write_png_gray(root / "masks" / (s.id + ".png"), s.gt_map);
  }
}

std::vector<ImageSample> load_dataset(const std::filesystem::path& root, int edge_width) {
  const auto mask_dir = root / "masks";
  if (!std::filesystem::is_directory(mask_dir))
    throw std::runtime_error("dataset mask directory not found: " + mask_dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(mask_dir)) {
    if (entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  std::vector<ImageSample> samples;
  samples.reserve(ids.size());
  for (const auto& id : ids) {
    samples.push_back(
        load_sample(root / "images" / (id + ".png"), root / "masks" / (id + ".png"), edge_width));
  }
  return samples;
}

}  // namespace urcod
