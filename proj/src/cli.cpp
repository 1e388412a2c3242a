#include "urcod/cli.hpp"

#include "urcod/dataset.hpp"
#include "urcod/metrics.hpp"
#include "urcod/imaging.hpp"
#include "urcod/png_io.hpp"
#include "urcod/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace urcod::cli {
namespace {

PseudoMapSource parse_pseudo_spec(const std::string& spec, std::uint64_t seed) {
  if (spec == "builtin") return PseudoMapSource::builtin(nullptr);
  if (spec.rfind("precomputed:", 0) == 0) {
    const std::string dir = spec.substr(12);
    if (dir.empty()) throw std::invalid_argument("precomputed pseudo spec needs a directory");
    return PseudoMapSource::precomputed(dir);
  }
  if (spec.rfind("corrupted:", 0) == 0) {
    const std::string rest = spec.substr(10);
    const auto comma = rest.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument("corrupted pseudo spec is corrupted:<radius>,<sigma>");
    return PseudoMapSource::corrupted(std::stoi(rest.substr(0, comma)),
                                      std::stod(rest.substr(comma + 1)), seed);
  }
  throw std::invalid_argument("unknown pseudo map source: " + spec);
}

std::set<ShapeKind> parse_shapes(const std::string& csv) {
  std::set<ShapeKind> kinds;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const std::string tok =
        csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (tok == "ellipse")
      kinds.insert(ShapeKind::ellipse);
    else if (tok == "blob")
      kinds.insert(ShapeKind::blob);
    else if (tok == "polygon")
      kinds.insert(ShapeKind::polygon);
    else
      throw std::invalid_argument("unknown shape kind: " + tok);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return kinds;
}

RgbImage gray_to_rgb(const ProbMap& m) { return RgbImage{m, m, m}; }

/// Horizontal strip of equally sized panels separated by a 2px white gutter.
RgbImage panel_strip(const std::vector<RgbImage>& panels) {
  const int h = static_cast<int>(panels.front().r.rows());
  const int w = static_cast<int>(panels.front().r.cols());
  const int gutter = 2;
  const int total_w = static_cast<int>(panels.size()) * w +
                      (static_cast<int>(panels.size()) - 1) * gutter;
  RgbImage out{ProbMap::Ones(h, total_w), ProbMap::Ones(h, total_w), ProbMap::Ones(h, total_w)};
  int x = 0;
  for (const auto& p : panels) {
    out.r.block(0, x, h, w) = p.r;
    out.g.block(0, x, h, w) = p.g;
    out.b.block(0, x, h, w) = p.b;
    x += w + gutter;
  }
  return out;
}

int cmd_prepare(const fs::path& out, int count, int size, double similarity,
                const std::string& shapes, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.count = count;
  cfg.size = size;
  cfg.texture_similarity = similarity;
  cfg.seed = seed;
  if (!shapes.empty()) cfg.shape_kinds = parse_shapes(shapes);
  const auto samples = generate_synthetic_dataset(cfg);
  write_dataset(out, samples);
  std::cout << "wrote " << samples.size() << " samples to " << out.string() << "\n";
  return 0;
}

int cmd_train(const fs::path& data, const fs::path& out, const TrainConfig& cfg,
              const std::string& pseudo_spec) {
  auto dataset = load_dataset(data);
  if (dataset.empty()) throw std::runtime_error("no samples under " + data.string());
  const auto source = parse_pseudo_spec(pseudo_spec, cfg.seed);
  const auto ckpt = train(cfg, dataset, source, out);
  std::cout << "checkpoint: " << ckpt.string() << "\n";
  return 0;
}

int cmd_infer(const fs::path& data, const fs::path& checkpoint, const fs::path& out,
              const std::string& mode_name, const std::string& pseudo_spec, std::uint64_t seed) {
  const auto pipeline = load_pipeline(checkpoint);
  auto samples = load_dataset(data);
  if (samples.empty()) throw std::runtime_error("no samples under " + data.string());
  for (auto& s : samples)
    if (s.image.height() != pipeline.input_size || s.image.width() != pipeline.input_size)
      s = resize_sample(s, pipeline.input_size);
  auto source = parse_pseudo_spec(pseudo_spec, seed);
  if (source.kind == PseudoKind::builtin) {
    if (!pipeline.pmg) throw std::runtime_error("checkpoint has no builtin pseudo-map model");
    source.model = pipeline.pmg;
  }
  const InferMode mode = mode_name == "sample" ? InferMode::sample : InferMode::mean;
  const auto preds = infer_dataset(pipeline, source, samples, mode, seed);
  fs::create_directories(out);
  for (std::size_t i = 0; i < preds.size(); ++i)
    write_png_gray(out / (samples[i].id + ".png"), preds[i]);
  std::cout << "wrote " << preds.size() << " predictions to " << out.string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& data, const fs::path& pred_dir, const fs::path& out_csv) {
  const auto samples = load_dataset(data);
  if (samples.empty()) throw std::runtime_error("no samples under " + data.string());
  std::vector<ProbMap> preds;
  preds.reserve(samples.size());
  for (const auto& s : samples) {
    const auto path = pred_dir / (s.id + ".png");
    if (!fs::exists(path)) throw std::runtime_error("missing prediction for " + s.id);
    ProbMap p = to_prob_map(read_png(path));
    if (p.rows() != s.gt_map.rows() || p.cols() != s.gt_map.cols())
      p = bilinear_resize(p, static_cast<int>(s.gt_map.rows()), static_cast<int>(s.gt_map.cols()));
    preds.push_back(std::move(p));
  }
  const auto report = evaluate_dataset(preds, samples);
  write_metrics_csv(out_csv, report);
  std::cout << "mae=" << report.mean_mae << " s=" << report.mean_s << " e=" << report.mean_e
            << " wf=" << report.mean_wf << "\n";
  return 0;
}

int cmd_visualize(const fs::path& data, const fs::path& checkpoint, const fs::path& out,
                  const std::string& pseudo_spec, int count, std::uint64_t seed) {
  const auto pipeline = load_pipeline(checkpoint);
  auto samples = load_dataset(data);
  if (samples.empty()) throw std::runtime_error("no samples under " + data.string());
  if (count > 0 && static_cast<int>(samples.size()) > count) samples.resize(count);
  for (auto& s : samples)
    if (s.image.height() != pipeline.input_size || s.image.width() != pipeline.input_size)
      s = resize_sample(s, pipeline.input_size);
  auto source = parse_pseudo_spec(pseudo_spec, seed);
  if (source.kind == PseudoKind::builtin) {
    if (!pipeline.pmg) throw std::runtime_error("checkpoint has no builtin pseudo-map model");
    source.model = pipeline.pmg;
  }
  const auto preds = infer_dataset(pipeline, source, samples, InferMode::mean, seed);
  fs::create_directories(out);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ProbMap e_pseudo = pipeline.peg->predict(samples[i].image);
    const auto strip = panel_strip({samples[i].image, gray_to_rgb(e_pseudo),
                                    gray_to_rgb(samples[i].gt_map), gray_to_rgb(preds[i])});
    write_png_rgb(out / (samples[i].id + "_panel.png"), strip);
  }
  std::cout << "wrote " << samples.size() << " panels to " << out.string() << "\n";
  return 0;
}

int cmd_ablate(const fs::path& data, const fs::path& out_csv, const TrainConfig& cfg,
               const std::string& pseudo_spec) {
  const auto dataset = load_dataset(data);
  if (dataset.empty()) throw std::runtime_error("no samples under " + data.string());
  const auto source = parse_pseudo_spec(pseudo_spec, cfg.seed);
  std::ofstream csv(out_csv);
  if (!csv) throw std::runtime_error("cannot write " + out_csv.string());
  csv << "mode,mae,s_measure,e_measure,weighted_f\n";
  for (const auto mode : {AblateMode::full, AblateMode::no_peg, AblateMode::no_pmg}) {
    const auto report = ablate(cfg, dataset, source, mode);
    char line[160];
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f\n", to_string(mode).c_str(),
                  report.mean_mae, report.mean_s, report.mean_e, report.mean_wf);
    csv << line;
    std::cout << line;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"urcod: uncertainty-aware camouflaged object detection"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Generate a synthetic dataset");
  std::string prep_out;
  int prep_count = 40, prep_size = 64;
  double prep_sim = 0.8;
  std::string prep_shapes;
  std::uint64_t prep_seed = 0;
  prepare->add_option("--out", prep_out, "Dataset directory")->required();
  prepare->add_option("--count", prep_count, "Number of samples");
  prepare->add_option("--size", prep_size, "Image side in pixels");
  prepare->add_option("--texture-similarity", prep_sim, "Camouflage difficulty in [0,1]");
  prepare->add_option("--shapes", prep_shapes, "Comma list of ellipse,blob,polygon");
  prepare->add_option("--seed", prep_seed, "RNG seed");

  // shared train-style options
  TrainConfig cfg;
  std::string cfg_path;
  std::string pseudo_spec = "corrupted:2,0.1";
  auto add_train_opts = [&](CLI::App* sub) {
    sub->add_option("--config", cfg_path, "key=value config file");
    sub->add_option("--pseudo", pseudo_spec,
                    "builtin | precomputed:<dir> | corrupted:<radius>,<sigma>");
    sub->add_option("--epochs", cfg.epochs);
    sub->add_option("--batch-size", cfg.batch_size);
    sub->add_option("--lr0", cfg.lr0);
    sub->add_option("--seed", cfg.seed);
    sub->add_option("--input-size", cfg.input_size);
    sub->add_option("--latent-dim", cfg.latent_dim);
    sub->add_option("--flooding", cfg.flooding_level);
    sub->add_option("--lambda-edge", cfg.lambda_edge);
    sub->add_option("--lambda-cvae", cfg.lambda_cvae);
    sub->add_option("--lambda-ref", cfg.lambda_ref);
    sub->add_option("--peg-epochs", cfg.peg_epochs);
    sub->add_option("--pmg-epochs", cfg.pmg_epochs);
    sub->add_flag("--joint", cfg.joint, "Train PEG and UAMR jointly");
  };
  // A config file supplies the base values; explicit flags override it.
  auto finalize_cfg = [&](CLI::App* sub) {
    if (cfg_path.empty()) return;
    TrainConfig from_file = load_train_config(cfg_path);
    auto keep = [&](const char* flag, auto member) {
      if (sub->count(flag) > 0) from_file.*member = cfg.*member;
    };
    keep("--epochs", &TrainConfig::epochs);
    keep("--batch-size", &TrainConfig::batch_size);
    keep("--lr0", &TrainConfig::lr0);
    keep("--seed", &TrainConfig::seed);
    keep("--input-size", &TrainConfig::input_size);
    keep("--latent-dim", &TrainConfig::latent_dim);
    keep("--flooding", &TrainConfig::flooding_level);
    keep("--lambda-edge", &TrainConfig::lambda_edge);
    keep("--lambda-cvae", &TrainConfig::lambda_cvae);
    keep("--lambda-ref", &TrainConfig::lambda_ref);
    keep("--peg-epochs", &TrainConfig::peg_epochs);
    keep("--pmg-epochs", &TrainConfig::pmg_epochs);
    keep("--joint", &TrainConfig::joint);
    cfg = from_file;
  };

  // train
  auto* train_cmd = app.add_subcommand("train", "Two-stage training run");
  std::string train_data, train_out;
  train_cmd->add_option("--data", train_data, "Dataset directory")->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  add_train_opts(train_cmd);

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Write refined predictions as PNGs");
  std::string infer_data, infer_ckpt, infer_out, infer_mode = "mean";
  std::string infer_pseudo = "corrupted:2,0.1";
  std::uint64_t infer_seed = 0;
  infer_cmd->add_option("--data", infer_data, "Dataset directory")->required();
  infer_cmd->add_option("--checkpoint", infer_ckpt, "Trained checkpoint")->required();
  infer_cmd->add_option("--out", infer_out, "Prediction directory")->required();
  infer_cmd->add_option("--mode", infer_mode, "mean | sample")
      ->check(CLI::IsMember({"mean", "sample"}));
  infer_cmd->add_option("--pseudo", infer_pseudo,
                        "builtin | precomputed:<dir> | corrupted:<radius>,<sigma>");
  infer_cmd->add_option("--seed", infer_seed, "RNG seed (sample mode)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against a dataset");
  std::string eval_data, eval_pred, eval_out = "metrics.csv";
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--pred", eval_pred, "Prediction directory")->required();
  eval_cmd->add_option("--out", eval_out, "Metrics CSV path");

  // visualize
  auto* vis_cmd = app.add_subcommand("visualize", "Side-by-side panels per sample");
  std::string vis_data, vis_ckpt, vis_out;
  std::string vis_pseudo = "corrupted:2,0.1";
  int vis_count = 0;
  std::uint64_t vis_seed = 0;
  vis_cmd->add_option("--data", vis_data, "Dataset directory")->required();
  vis_cmd->add_option("--checkpoint", vis_ckpt, "Trained checkpoint")->required();
  vis_cmd->add_option("--out", vis_out, "Panel directory")->required();
  vis_cmd->add_option("--pseudo", vis_pseudo,
                      "builtin | precomputed:<dir> | corrupted:<radius>,<sigma>");
  vis_cmd->add_option("--count", vis_count, "Limit to the first N samples (0 = all)");
  vis_cmd->add_option("--seed", vis_seed, "RNG seed");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Full / no-PEG / no-PMG comparison");
  std::string abl_data, abl_out = "ablation.csv";
  ablate_cmd->add_option("--data", abl_data, "Dataset directory")->required();
  ablate_cmd->add_option("--out", abl_out, "Ablation CSV path");
  add_train_opts(ablate_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (prepare->parsed())
      return cmd_prepare(prep_out, prep_count, prep_size, prep_sim, prep_shapes, prep_seed);
    if (train_cmd->parsed()) {
      finalize_cfg(train_cmd);
      return cmd_train(train_data, train_out, cfg, pseudo_spec);
    }
    if (infer_cmd->parsed())
      return cmd_infer(infer_data, infer_ckpt, infer_out, infer_mode, infer_pseudo, infer_seed);
    if (eval_cmd->parsed()) return cmd_eval(eval_data, eval_pred, eval_out);
    if (vis_cmd->parsed())
      return cmd_visualize(vis_data, vis_ckpt, vis_out, vis_pseudo, vis_count, vis_seed);
    if (ablate_cmd->parsed()) {
      finalize_cfg(ablate_cmd);
      return cmd_ablate(abl_data, abl_out, cfg, pseudo_spec);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace urcod::cli
