#ifndef CAPLAB_TRAINER_HPP
#define CAPLAB_TRAINER_HPP

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "caplab/data.hpp"
#include "caplab/model.hpp"

namespace caplab {

enum class OptimizerKind { Adam, Rmsprop, Adadelta };

struct HyperparamSpec {
  WeightInit init_method = WeightInit::Xavier;
  double max_init_weight = 0.1;          // [1e-5, 1.0]
  std::size_t embed_size = 128;          // [64, 512]
  std::size_t rnn_size = 128;            // [64, 512]
  std::size_t post_image_size = 128;     // [64, 512]
  Activation post_image_act = Activation::Identity;  // relu or identity
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;           // [1e-5, 1.0]
  bool normalize_image = false;
  double weight_decay = 0.0;             // [1e-10, 0.1]
  double image_dropout = 0.0;            // [0, 0.5]
  double post_image_dropout = 0.0;
  double embed_dropout = 0.0;
  double rnn_dropout = 0.0;
  double max_grad_norm = 10.0;           // [1, 1000]
  std::size_t minibatch_size = 32;       // [10, 300]
  std::size_t beam_width = 3;            // [1, 5]

  // Throws ConfigError if any field is outside its range or the
  // architecture's size-tying constraint is violated.
  void validate(ArchKind kind) const;
  ModelConfig model_config(ArchKind kind, std::size_t vocab_size, std::size_t feat_dim) const;
};

std::string hyperparams_to_json(const HyperparamSpec& h);
HyperparamSpec hyperparams_from_json(const std::string& text);

// RMSProp decay 0.9 / eps 1e-8 and AdaDelta rho 0.95 / eps 1e-6 are
// conventional defaults; Adam uses beta1 0.9, beta2 0.999, eps 1e-8.
struct OptimizerConstants {
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  double rmsprop_decay = 0.9, rmsprop_eps = 1e-8;
  double adadelta_rho = 0.95, adadelta_eps = 1e-6;
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  OptimizerConstants constants;
  std::int64_t step_count = 0;
  std::vector<std::vector<double>> m1;  // first moment / grad accumulator
  std::vector<std::vector<double>> m2;  // second moment / update accumulator

  static OptimizerState create(OptimizerKind kind,
                               const std::vector<std::pair<std::string, Tensor>>& params);
};

// -mean over masked positions of ln p(target), over a stack of per-step
// distributions; weight decay handled separately in batch_loss.
Tensor cross_entropy_loss(const std::vector<Tensor>& step_dists,
                          const std::vector<std::vector<int>>& targets,
                          const std::vector<std::vector<double>>& mask);

// If the global L2 norm exceeds max_norm, scales every grad vector by
// max_norm / norm in place.
void clip_by_norm(std::vector<std::vector<double>*>& grads, double max_norm);

void optimizer_step(const std::vector<std::pair<std::string, Tensor>>& params,
                    OptimizerState& state, double learning_rate);

// Forward + loss for one batch (training or eval mode); includes the
// weight-decay term when lambda > 0.
Tensor batch_loss(const CaptionModel& model, const Batch& batch, double weight_decay,
                  bool training, Rng& rng);

struct EpochStats {
  double loss = 0.0;
  double val_geomean_pplx = 0.0;
  double wall_seconds = 0.0;
};

struct TrainOptions {
  std::size_t max_epochs = 100;
  bool early_stopping = true;  // stop on first val-perplexity degradation,
                               // keeping the previous epoch's parameters
  std::set<std::string> freeze;
  std::uint64_t seed = 0;
  std::function<bool(std::size_t epoch)> stop_when;  // optional convergence probe
};

// Geometric-mean perplexity over reference captions, teacher forced.
double geomean_perplexity(const CaptionModel& model,
                          const std::vector<const CaptionedItem*>& items);

std::vector<EpochStats> train(CaptionModel& model,
                              const std::vector<const CaptionedItem*>& train_items,
                              const std::vector<const CaptionedItem*>& val_items,
                              const HyperparamSpec& spec, const TrainOptions& options);

}  // namespace caplab

#endif
