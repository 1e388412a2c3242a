#pragma once

#include "urcod/metrics.hpp"
#include "urcod/peg.hpp"
#include "urcod/pmg.hpp"
#include "urcod/uamr.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace urcod {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 10;
  double lr0 = 5e-5;
  int decay_start_epoch = 80;
  double decay_factor = 0.9;
  double lambda_edge = 1.0;
  double lambda_cvae = 1.0;
  double lambda_ref = 1.0;
  std::uint64_t seed = 0;

  // artifact knobs
  int input_size = 64;
  int latent_dim = 3;
  double flooding_level = 0.02;
  bool joint = false;     // end-to-end training of PEG + UAMR under one objective
  int peg_epochs = -1;    // -1: same as epochs
  int pmg_epochs = -1;

  void validate() const;
};

/// Flat key=value config file, one key per line, '#' comments.
TrainConfig load_train_config(const std::filesystem::path& path);
void set_config_key(TrainConfig& cfg, const std::string& key, const std::string& value);

/// lr0 up to decay_start_epoch, then compounding decay_factor per epoch.
double learning_rate(const TrainConfig& cfg, int epoch);

double total_loss(double edge, double cvae, double ref, const TrainConfig& cfg);

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int t = 0;
  std::vector<nn::Tensor> m, v;

  explicit Adam(const nn::ParamList& params);
  /// Applies one update from the accumulated gradients, then zeroes them.
  void step(const nn::ParamList& params, double lr);
};

struct Pipeline {
  std::shared_ptr<PegModel> peg;
  std::shared_ptr<BuiltinSegmenter> pmg;  // only for builtin pseudo-map sources
  std::shared_ptr<UamrModel> uamr;
  int input_size = 64;
};

/// Two-stage training (PEG, builtin PMG when applicable, then UAMR against
/// frozen pseudo labels). Writes train.log plus periodic checkpoints under
/// out_dir; returns the final checkpoint path.
std::filesystem::path train(const TrainConfig& cfg, const std::vector<ImageSample>& dataset,
                            const PseudoMapSource& source, const std::filesystem::path& out_dir);

void save_pipeline(const Pipeline& pipeline, const TrainConfig& cfg,
                   const std::filesystem::path& path);
Pipeline load_pipeline(const std::filesystem::path& checkpoint_path);

enum class AblateMode { full, no_peg, no_pmg };
std::string to_string(AblateMode mode);

/// Trains on an 80% split with the mode's pseudo input zeroed, evaluates the
/// held-out 20%.
MetricReport ablate(const TrainConfig& cfg, const std::vector<ImageSample>& dataset,
                    const PseudoMapSource& source, AblateMode mode);

/// Inference over a dataset with the pipeline's PEG providing pseudo-edges.
std::vector<ProbMap> infer_dataset(const Pipeline& pipeline, const PseudoMapSource& source,
                                   const std::vector<ImageSample>& samples, InferMode mode,
                                   std::uint64_t seed);

}  // namespace urcod
