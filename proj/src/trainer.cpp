#include "urcod/trainer.hpp"

#include "urcod/checkpoint.hpp"
#include "urcod/dataset.hpp"
#include "urcod/losses.hpp"
#include "urcod/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace urcod {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (decay_factor <= 0.0 || decay_factor > 1.0)
    throw std::invalid_argument("decay_factor must be in (0, 1]");
  if (decay_start_epoch < 1) throw std::invalid_argument("decay_start_epoch must be >= 1");
  if (flooding_level < 0.0) throw std::invalid_argument("flooding_level must be >= 0");
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  if (input_size < 48 || input_size % 8 != 0)
    throw std::invalid_argument("input_size must be a multiple of 8 and >= 48");
}

void set_config_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "epochs") cfg.epochs = std::stoi(value);
  else if (key == "batch_size") cfg.batch_size = std::stoi(value);
  else if (key == "lr0") cfg.lr0 = std::stod(value);
  else if (key == "decay_start_epoch") cfg.decay_start_epoch = std::stoi(value);
  else if (key == "decay_factor") cfg.decay_factor = std::stod(value);
  else if (key == "lambda_edge") cfg.lambda_edge = std::stod(value);
  else if (key == "lambda_cvae") cfg.lambda_cvae = std::stod(value);
  else if (key == "lambda_ref") cfg.lambda_ref = std::stod(value);
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "input_size") cfg.input_size = std::stoi(value);
  else if (key == "latent_dim") cfg.latent_dim = std::stoi(value);
  else if (key == "flooding_level") cfg.flooding_level = std::stod(value);
  else if (key == "joint") cfg.joint = (value == "1" || value == "true");
  else if (key == "peg_epochs") cfg.peg_epochs = std::stoi(value);
  else if (key == "pmg_epochs") cfg.pmg_epochs = std::stoi(value);
  else throw std::invalid_argument("unknown config key: " + key);
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file: " + path.string());
  TrainConfig cfg;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)); };
    line.erase(line.begin(), std::find_if_not(line.begin(), line.end(), is_space));
    line.erase(std::find_if_not(line.rbegin(), line.rend(), is_space).base(), line.end());
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("malformed config line (expected key=value): " + line);
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    key.erase(std::find_if_not(key.rbegin(), key.rend(), is_space).base(), key.end());
    value.erase(value.begin(), std::find_if_not(value.begin(), value.end(), is_space));
    set_config_key(cfg, key, value);
  }
  return cfg;
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  if (epoch < 1 || epoch > cfg.epochs) throw std::out_of_range("epoch out of range");
  if (epoch <= cfg.decay_start_epoch) return cfg.lr0;
  return cfg.lr0 * std::pow(cfg.decay_factor, epoch - cfg.decay_start_epoch);
}

double total_loss(double edge, double cvae, double ref, const TrainConfig& cfg) {
  return cfg.lambda_edge * edge + cfg.lambda_cvae * cvae + cfg.lambda_ref * ref;
}

Adam::Adam(const nn::ParamList& params) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const auto& p : params) {
    const auto& t = p.var->value;
    m.push_back(nn::Tensor::zeros(t.channels(), t.height(), t.width()));
    v.push_back(nn::Tensor::zeros(t.channels(), t.height(), t.width()));
  }
}

void Adam::step(const nn::ParamList& params, double lr) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, t);
  const double bc2 = 1.0 - std::pow(beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Node& node = *params[i].var;
    if (node.grad.ch.empty()) continue;  // untouched this step
    for (int c = 0; c < node.value.channels(); ++c) {
      const Eigen::ArrayXXd& g = node.grad.ch[c];
      m[i].ch[c] = beta1 * m[i].ch[c] + (1.0 - beta1) * g;
      v[i].ch[c] = beta2 * v[i].ch[c] + (1.0 - beta2) * g.square();
      node.value.ch[c] -= lr * (m[i].ch[c] / bc1) / ((v[i].ch[c] / bc2).sqrt() + eps);
    }
    node.zero_grad();
  }
}

namespace {

std::vector<ImageSample> conform(const std::vector<ImageSample>& dataset, int size) {
  std::vector<ImageSample> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset)
    out.push_back(s.gt_map.rows() == size && s.gt_map.cols() == size ? s
                                                                     : resize_sample(s, size));
  return out;
}

void check_finite(double value, const char* term) {
  if (!std::isfinite(value))
    throw std::runtime_error(std::string("non-finite ") + term + " loss; aborting training");
}

struct EpochStats {
  double edge = 0, cvae = 0, ref = 0, total = 0;
};

void log_epoch(std::ostream& log, int epoch, double lr, const EpochStats& s) {
  char line[256];
  std::snprintf(line, sizeof(line), "epoch=%d lr=%.8g edge=%.6g cvae=%.6g ref=%.6g total=%.6g\n",
                epoch, lr, s.edge, s.cvae, s.ref, s.total);
  log << line;
  log.flush();
}

std::vector<std::vector<int>> make_batches(std::size_t n, int batch_size, std::mt19937_64& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + i,
                         order.begin() + std::min(n, i + static_cast<std::size_t>(batch_size)));
  }
  return batches;
}

/// Trains the PEG with the flooding edge loss; logs per-epoch means.
void train_peg_stage(PegModel& peg, const TrainConfig& cfg, int epochs,
                     const std::vector<ImageSample>& data, std::mt19937_64& rng,
                     std::ostream& log) {
  nn::ParamList params = peg.params();
  Adam opt(params);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const double lr = learning_rate(cfg, std::min(epoch, cfg.epochs));
    EpochStats stats;
    for (const auto& batch : make_batches(data.size(), cfg.batch_size, rng)) {
      for (int idx : batch) {
        nn::Var pred = peg.forward(nn::constant(nn::from_rgb(data[idx].image)));
        nn::Var loss = nn::edge_loss(pred, data[idx].gt_edge, peg.loss_cfg.flooding_level);
        const double edge = loss->value.item();
        check_finite(edge, "edge");
        stats.edge += edge;
        stats.total += cfg.lambda_edge * edge;
        nn::backward(loss, cfg.lambda_edge / batch.size());
      }
      opt.step(params, lr);
    }
    stats.edge /= data.size();
    stats.total /= data.size();
    log_epoch(log, epoch, lr, stats);
  }
}

/// Trains the builtin toy segmenter with structure loss only.
void train_pmg_stage(BuiltinSegmenter& pmg, const TrainConfig& cfg, int epochs,
                     const std::vector<ImageSample>& data, std::mt19937_64& rng,
                     std::ostream& log) {
  nn::ParamList params = pmg.params();
  Adam opt(params);
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const double lr = learning_rate(cfg, std::min(epoch, cfg.epochs));
    EpochStats stats;
    for (const auto& batch : make_batches(data.size(), cfg.batch_size, rng)) {
      for (int idx : batch) {
        nn::Var pred = pmg.forward(nn::constant(nn::from_rgb(data[idx].image)));
        nn::Var loss = nn::structure_loss(pred, data[idx].gt_map);
        check_finite(loss->value.item(), "structure");
        stats.total += loss->value.item();
        nn::backward(loss, 1.0 / batch.size());
      }
      opt.step(params, lr);
    }
    stats.total /= data.size();
    log_epoch(log, epoch, lr, stats);
  }
}

Eigen::VectorXd draw_eps(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::VectorXd eps(dim);
  for (int i = 0; i < dim; ++i) eps(i) = noise(rng);
  return eps;
}

/// UAMR stage against frozen per-sample pseudo labels.
void train_uamr_stage(UamrModel& uamr, const TrainConfig& cfg,
                      const std::vector<ImageSample>& data,
                      const std::vector<ProbMap>& m_pseudos,
                      const std::vector<ProbMap>& e_pseudos, std::mt19937_64& rng,
                      std::ostream& log,
                      const std::function<void(int)>& on_epoch_end = {}) {
  nn::ParamList params = uamr.params();
  Adam opt(params);
  const RefineWeights weights;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    EpochStats stats;
    for (const auto& batch : make_batches(data.size(), cfg.batch_size, rng)) {
      for (int idx : batch) {
        const Eigen::VectorXd eps_prior = draw_eps(uamr.latent_dim, rng);
        const Eigen::VectorXd eps_post = draw_eps(uamr.latent_dim, rng);
        UamrLossGraph g = build_uamr_loss(uamr, data[idx], m_pseudos[idx], e_pseudos[idx],
                                          eps_prior, eps_post, weights);
        const double cvae = g.cvae->value.item();
        const double ref = g.ref->value.item();
        check_finite(cvae, "cvae");
        check_finite(ref, "ref");
        stats.cvae += cvae;
        stats.ref += ref;
        stats.total += cfg.lambda_cvae * cvae + cfg.lambda_ref * ref;
        nn::Var loss =
            nn::add(nn::scale(g.cvae, cfg.lambda_cvae), nn::scale(g.ref, cfg.lambda_ref));
        nn::backward(loss, 1.0 / batch.size());
      }
      opt.step(params, lr);
    }
    stats.cvae /= data.size();
    stats.ref /= data.size();
    stats.total /= data.size();
    log_epoch(log, epoch, lr, stats);
    if (on_epoch_end) on_epoch_end(epoch);
  }
}

/// Joint end-to-end training: one optimizer over PEG + UAMR, pseudo edges
/// taken from the live PEG forward pass so gradients flow through it.
void train_joint_stage(PegModel& peg, UamrModel& uamr, const TrainConfig& cfg,
                       const std::vector<ImageSample>& data,
                       const std::vector<ProbMap>& m_pseudos, std::mt19937_64& rng,
                       std::ostream& log, const std::function<void(int)>& on_epoch_end = {}) {
  nn::ParamList params = peg.params();
  for (auto& p : uamr.params()) params.push_back(p);
  Adam opt(params);
  const RefineWeights weights;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    EpochStats stats;
    for (const auto& batch : make_batches(data.size(), cfg.batch_size, rng)) {
      for (int idx : batch) {
        nn::Var e_pseudo = peg.forward(nn::constant(nn::from_rgb(data[idx].image)));
        nn::Var edge =
            nn::edge_loss(e_pseudo, data[idx].gt_edge, peg.loss_cfg.flooding_level);
        nn::Var m_pseudo = nn::constant(nn::Tensor(m_pseudos[idx]));
        UamrLossGraph g =
            build_uamr_loss_graph(uamr, data[idx], m_pseudo, e_pseudo,
                                  draw_eps(uamr.latent_dim, rng), draw_eps(uamr.latent_dim, rng),
                                  weights);
        const double ev = edge->value.item(), cv = g.cvae->value.item(), rv = g.ref->value.item();
        check_finite(ev, "edge");
        check_finite(cv, "cvae");
        check_finite(rv, "ref");
        stats.edge += ev;
        stats.cvae += cv;
        stats.ref += rv;
        stats.total += total_loss(ev, cv, rv, cfg);
        nn::Var loss = nn::add(nn::scale(edge, cfg.lambda_edge),
                               nn::add(nn::scale(g.cvae, cfg.lambda_cvae),
                                       nn::scale(g.ref, cfg.lambda_ref)));
        nn::backward(loss, 1.0 / batch.size());
      }
      opt.step(params, lr);
    }
    const double n = static_cast<double>(data.size());
    stats.edge /= n;
    stats.cvae /= n;
    stats.ref /= n;
    stats.total /= n;
    log_epoch(log, epoch, lr, stats);
    if (on_epoch_end) on_epoch_end(epoch);
  }
}

std::string serialize_rates(const DacConfig& cfg) {
  std::ostringstream out;
  for (std::size_t b = 0; b < cfg.branch_rates.size(); ++b) {
    if (b) out << ";";
    for (std::size_t i = 0; i < cfg.branch_rates[b].size(); ++i) {
      if (i) out << ",";
      out << cfg.branch_rates[b][i];
    }
  }
  return out.str();
}

}  // namespace

void save_pipeline(const Pipeline& pipeline, const TrainConfig& cfg,
                   const std::filesystem::path& path) {
  Checkpoint ckpt;
  ckpt.meta["input_size"] = std::to_string(pipeline.input_size);
  ckpt.meta["latent_dim"] = std::to_string(pipeline.uamr->latent_dim);
  ckpt.meta["flooding_level"] = std::to_string(pipeline.peg->loss_cfg.flooding_level);
  ckpt.meta["dac_rates"] = serialize_rates(pipeline.peg->dac_cfg);
  ckpt.meta["has_pmg"] = pipeline.pmg ? "1" : "0";
  ckpt.meta["seed"] = std::to_string(cfg.seed);
  ckpt.add_params(pipeline.peg->params());
  if (pipeline.pmg) ckpt.add_params(pipeline.pmg->params());
  ckpt.add_params(pipeline.uamr->params());
  ckpt.save(path);
}

Pipeline load_pipeline(const std::filesystem::path& checkpoint_path) {
  const Checkpoint ckpt = Checkpoint::load(checkpoint_path);
  Pipeline p;
  p.input_size = static_cast<int>(ckpt.meta_num("input_size"));
  EdgeLossConfig edge_cfg{ckpt.meta_num("flooding_level")};
  p.peg = std::make_shared<PegModel>(p.input_size, DacConfig{}, edge_cfg, 0);
  ckpt.restore_params(p.peg->params());
  if (ckpt.meta_at("has_pmg") == "1") {
    p.pmg = std::make_shared<BuiltinSegmenter>(p.input_size, 0);
    ckpt.restore_params(p.pmg->params());
  }
  p.uamr = std::make_shared<UamrModel>(p.input_size,
                                       static_cast<int>(ckpt.meta_num("latent_dim")), 0);
  ckpt.restore_params(p.uamr->params());
  return p;
}

std::filesystem::path train(const TrainConfig& cfg, const std::vector<ImageSample>& dataset,
                            const PseudoMapSource& source, const std::filesystem::path& out_dir) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  std::filesystem::create_directories(out_dir);
  std::ofstream log(out_dir / "train.log");

  const std::vector<ImageSample> data = conform(dataset, cfg.input_size);

  Pipeline pipeline;
  pipeline.input_size = cfg.input_size;
  pipeline.peg = std::make_shared<PegModel>(cfg.input_size, DacConfig{},
                                            EdgeLossConfig{cfg.flooding_level}, cfg.seed + 1);
  pipeline.uamr = std::make_shared<UamrModel>(cfg.input_size, cfg.latent_dim, cfg.seed + 3);

  PseudoMapSource src = source;
  if (src.kind == PseudoKind::builtin && !src.model)
    src.model = std::make_shared<BuiltinSegmenter>(cfg.input_size, cfg.seed + 2);
  pipeline.pmg = src.kind == PseudoKind::builtin ? src.model : nullptr;

  std::mt19937_64 rng(cfg.seed + 1000);

  // m_pseudo sources are frozen before the UAMR stage in both modes
  if (src.kind == PseudoKind::builtin) {
    const int pmg_epochs = cfg.pmg_epochs > 0 ? cfg.pmg_epochs : cfg.epochs;
    train_pmg_stage(*src.model, cfg, pmg_epochs, data, rng, log);
  }
  std::vector<ProbMap> m_pseudos;
  m_pseudos.reserve(data.size());
  for (const auto& s : data) m_pseudos.push_back(generate_pseudo_map(src, s));

  const auto checkpoint_hook = [&](int epoch) {
    if (epoch % 10 == 0 && epoch != cfg.epochs)
      save_pipeline(pipeline, cfg, out_dir / ("checkpoint_" + std::to_string(epoch) + ".urck"));
  };

  if (cfg.joint) {
    train_joint_stage(*pipeline.peg, *pipeline.uamr, cfg, data, m_pseudos, rng, log,
                      checkpoint_hook);
  } else {
    if (cfg.lambda_edge != 0.0) {
      const int peg_epochs = cfg.peg_epochs > 0 ? cfg.peg_epochs : cfg.epochs;
      train_peg_stage(*pipeline.peg, cfg, peg_epochs, data, rng, log);
    }
    std::vector<ProbMap> e_pseudos;
    e_pseudos.reserve(data.size());
    for (const auto& s : data)
      e_pseudos.push_back(cfg.lambda_edge != 0.0 ? pipeline.peg->predict(s.image)
                                                 : ProbMap::Zero(cfg.input_size, cfg.input_size));
    train_uamr_stage(*pipeline.uamr, cfg, data, m_pseudos, e_pseudos, rng, log, checkpoint_hook);
  }

  const auto final_path = out_dir / "checkpoint.urck";
  save_pipeline(pipeline, cfg, final_path);
  return final_path;
}

std::string to_string(AblateMode mode) {
  switch (mode) {
    case AblateMode::full: return "full";
    case AblateMode::no_peg: return "no_peg";
    case AblateMode::no_pmg: return "no_pmg";
  }
  return "?";
}

std::vector<ProbMap> infer_dataset(const Pipeline& pipeline, const PseudoMapSource& source,
                                   const std::vector<ImageSample>& samples, InferMode mode,
                                   std::uint64_t seed) {
  std::vector<ProbMap> preds(samples.size());
  parallel_for(static_cast<int>(samples.size()), [&](int i) {
    const ImageSample s = samples[i].gt_map.rows() == pipeline.input_size &&
                                  samples[i].gt_map.cols() == pipeline.input_size
                              ? samples[i]
                              : resize_sample(samples[i], pipeline.input_size);
    const ProbMap m_pseudo = generate_pseudo_map(source, s);
    const ProbMap e_pseudo = pipeline.peg->predict(s.image);
    preds[i] = pipeline.uamr->infer(s.image, m_pseudo, e_pseudo, mode, seed + i);
  });
  return preds;
}

MetricReport ablate(const TrainConfig& cfg, const std::vector<ImageSample>& dataset,
                    const PseudoMapSource& source, AblateMode mode) {
  cfg.validate();
  if (dataset.size() < 5) throw std::invalid_argument("ablate: dataset too small to split");
  const std::vector<ImageSample> data = conform(dataset, cfg.input_size);
  const std::size_t train_n = data.size() * 4 / 5;
  const std::vector<ImageSample> train_split(data.begin(), data.begin() + train_n);
  const std::vector<ImageSample> held_split(data.begin() + train_n, data.end());

  std::ofstream log;  // discarded
  std::mt19937_64 rng(cfg.seed + 1000);

  PseudoMapSource src = source;
  if (mode != AblateMode::no_pmg && src.kind == PseudoKind::builtin) {
    if (!src.model) src.model = std::make_shared<BuiltinSegmenter>(cfg.input_size, cfg.seed + 2);
    const int pmg_epochs = cfg.pmg_epochs > 0 ? cfg.pmg_epochs : cfg.epochs;
    train_pmg_stage(*src.model, cfg, pmg_epochs, train_split, rng, log);
  }

  auto peg = std::make_shared<PegModel>(cfg.input_size, DacConfig{},
                                        EdgeLossConfig{cfg.flooding_level}, cfg.seed + 1);
  if (mode != AblateMode::no_peg) {
    const int peg_epochs = cfg.peg_epochs > 0 ? cfg.peg_epochs : cfg.epochs;
    train_peg_stage(*peg, cfg, peg_epochs, train_split, rng, log);
  }

  const ProbMap zero = ProbMap::Zero(cfg.input_size, cfg.input_size);
  auto m_pseudo_of = [&](const ImageSample& s) {
    return mode == AblateMode::no_pmg ? zero : generate_pseudo_map(src, s);
  };
  auto e_pseudo_of = [&](const ImageSample& s) {
    return mode == AblateMode::no_peg ? zero : peg->predict(s.image);
  };

  std::vector<ProbMap> m_pseudos, e_pseudos;
  for (const auto& s : train_split) {
    m_pseudos.push_back(m_pseudo_of(s));
    e_pseudos.push_back(e_pseudo_of(s));
  }
  auto uamr = std::make_shared<UamrModel>(cfg.input_size, cfg.latent_dim, cfg.seed + 3);
  train_uamr_stage(*uamr, cfg, train_split, m_pseudos, e_pseudos, rng, log);

  std::vector<ProbMap> preds(held_split.size());
  parallel_for(static_cast<int>(held_split.size()), [&](int i) {
    preds[i] = uamr->infer(held_split[i].image, m_pseudo_of(held_split[i]),
                           e_pseudo_of(held_split[i]), InferMode::mean);
  });
  return evaluate_dataset(preds, held_split);
}

}  // namespace urcod
