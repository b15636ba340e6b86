#ifndef CAPLAB_MODEL_HPP
#define CAPLAB_MODEL_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "caplab/layers.hpp"
#include "caplab/tensor.hpp"

namespace caplab {

enum class ArchKind { InitInject, PreInject, ParInject, Merge, TextOnlyLM };
enum class CellKind { Gru, Lstm };
enum class LstmInjectTarget { Hidden, Cell };

std::string arch_name(ArchKind k);
ArchKind arch_from_name(const std::string& s);

// Raised when a model constraint (size tying, missing image, ...) is violated;
// the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelConfig {
  ArchKind kind = ArchKind::Merge;
  CellKind cell = CellKind::Gru;
  std::size_t vocab_size = 0;
  std::size_t feat_dim = 0;
  std::size_t embed_size = 0;
  std::size_t state_size = 0;
  std::size_t post_image_size = 0;
  Activation post_image_act = Activation::Identity;
  bool normalize_image = false;
  double image_dropout = 0.0;
  double post_image_dropout = 0.0;
  double embed_dropout = 0.0;
  double rnn_dropout = 0.0;
  LstmInjectTarget lstm_inject = LstmInjectTarget::Cell;

  std::size_t multimodal_size() const {
    return kind == ArchKind::Merge ? state_size + post_image_size : state_size;
  }
};

struct CaptionModel {
  ModelConfig config;
  EmbeddingParams embedding;
  std::optional<GruParams> gru;
  std::optional<LstmParams> lstm;
  std::optional<DenseParams> post_image;
  DenseParams output;  // softmax applied on top of its identity logits

  // Stable (name, tensor) view of every parameter; order is fixed so that
  // optimizer state, checkpoints, and freeze sets line up across runs.
  std::vector<std::pair<std::string, Tensor>> parameters() const;
  void zero_grads() const;
};

// Validates the architecture's size-tying constraints and initialises
// all parameters (biases zero).
CaptionModel build_model(const ModelConfig& config, WeightInit method,
                         double max_abs, Rng& rng);

struct StepTrace {
  Tensor embedded;    // embedding consumed at this step (undefined at a pre-inject image step)
  Tensor state;       // RNN hidden state after the step [B x state]
  Tensor multimodal;  // vector fed to the output layer
  Tensor logits;      // pre-softmax output
  Tensor dist;        // softmax output [B x vocab]
};

struct ForwardTrace {
  Tensor image_leaf;  // the raw feature input (undefined for TextOnlyLM)
  Tensor post_image;  // projected image vector after the post-image layer
  std::vector<StepTrace> steps;  // one per word position
};

// Teacher-forced forward over a batch. inputs[b] must begin with the start
// token; all rows must have equal length. Dropout applies only in training
// mode. One distribution is produced per input token (the pre-inject image
// step's output is dropped).
ForwardTrace forward_batch(const CaptionModel& model,
                           const std::vector<std::vector<double>>& features,
                           const std::vector<std::vector<int>>& inputs,
                           bool training, Rng& rng);

// Single-item convenience: tokens begins with the start token.
ForwardTrace forward(const CaptionModel& model, const std::vector<double>* image_feats,
                     const std::vector<int>& tokens, bool training, Rng& rng);

// The multimodal vector at step t (1-based over the prefix), exposed for
// omission scoring. prefix excludes the start token.
Tensor multimodal_at(const CaptionModel& model, const std::vector<double>& image,
                     const std::vector<int>& prefix, std::size_t t);

}  // namespace caplab

#endif
