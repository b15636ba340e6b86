#include "caplab/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "caplab/metrics.hpp"

namespace caplab {

void HyperparamSpec::validate(ArchKind kind) const {
  auto in_range = [](double v, double lo, double hi, const char* what) {
    if (v < lo || v > hi)
      throw ConfigError(std::string(what) + " out of range [" + std::to_string(lo) + "," +
                        std::to_string(hi) + "]: " + std::to_string(v));
  };
  in_range(max_init_weight, 1e-5, 1.0, "max init weight");
  in_range(static_cast<double>(embed_size), 64, 512, "embed size");
  in_range(static_cast<double>(rnn_size), 64, 512, "rnn size");
  in_range(static_cast<double>(post_image_size), 64, 512, "post-image size");
  in_range(learning_rate, 1e-5, 1.0, "learning rate");
  in_range(weight_decay, 0.0, 0.1, "weight decay weight");
  in_range(image_dropout, 0.0, 0.5, "image dropout");
  in_range(post_image_dropout, 0.0, 0.5, "post-image dropout");
  in_range(embed_dropout, 0.0, 0.5, "embed dropout");
  in_range(rnn_dropout, 0.0, 0.5, "rnn dropout");
  in_range(max_grad_norm, 1.0, 1000.0, "max gradient norm");
  in_range(static_cast<double>(minibatch_size), 10, 300, "minibatch size");
  in_range(static_cast<double>(beam_width), 1, 5, "beam width");
  if (kind == ArchKind::InitInject && post_image_size != rnn_size)
    throw ConfigError("init-inject requires post_image size == rnn size");
  if (kind == ArchKind::PreInject && post_image_size != embed_size)
    throw ConfigError("pre-inject requires post_image size == embed size");
}

ModelConfig HyperparamSpec::model_config(ArchKind kind, std::size_t vocab_size,
                                         std::size_t feat_dim) const {
  ModelConfig c;
  c.kind = kind;
  c.vocab_size = vocab_size;
  c.feat_dim = kind == ArchKind::TextOnlyLM ? 0 : feat_dim;
  c.embed_size = embed_size;
  c.state_size = rnn_size;
  c.post_image_size = kind == ArchKind::TextOnlyLM ? 0 : post_image_size;
  c.post_image_act = post_image_act;
  c.normalize_image = normalize_image;
  c.image_dropout = image_dropout;
  c.post_image_dropout = post_image_dropout;
  c.embed_dropout = embed_dropout;
  c.rnn_dropout = rnn_dropout;
  return c;
}

std::string hyperparams_to_json(const HyperparamSpec& h) {
  nlohmann::json j;
  j["init_method"] = h.init_method == WeightInit::Xavier ? "xavier" : "normal";
  j["max_init_weight"] = h.max_init_weight;
  j["embed_size"] = h.embed_size;
  j["rnn_size"] = h.rnn_size;
  j["post_image_size"] = h.post_image_size;
  j["post_image_act"] = h.post_image_act == Activation::Relu ? "relu" : "identity";
  j["optimizer"] = h.optimizer == OptimizerKind::Adam      ? "adam"
                   : h.optimizer == OptimizerKind::Rmsprop ? "rmsprop"
                                                           : "adadelta";
  j["learning_rate"] = h.learning_rate;
  j["normalize_image"] = h.normalize_image;
  j["weight_decay"] = h.weight_decay;
  j["image_dropout"] = h.image_dropout;
  j["post_image_dropout"] = h.post_image_dropout;
  j["embed_dropout"] = h.embed_dropout;
  j["rnn_dropout"] = h.rnn_dropout;
  j["max_grad_norm"] = h.max_grad_norm;
  j["minibatch_size"] = h.minibatch_size;
  j["beam_width"] = h.beam_width;
  return j.dump(2);
}

HyperparamSpec hyperparams_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  HyperparamSpec h;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  if (j.contains("init_method"))
    h.init_method = j.at("init_method").get<std::string>() == "normal" ? WeightInit::Normal
                                                                       : WeightInit::Xavier;
  get("max_init_weight", h.max_init_weight);
  get("embed_size", h.embed_size);
  get("rnn_size", h.rnn_size);
  get("post_image_size", h.post_image_size);
  if (j.contains("post_image_act"))
    h.post_image_act = j.at("post_image_act").get<std::string>() == "relu" ? Activation::Relu
                                                                           : Activation::Identity;
  if (j.contains("optimizer")) {
    const std::string o = j.at("optimizer").get<std::string>();
    if (o == "adam") h.optimizer = OptimizerKind::Adam;
    else if (o == "rmsprop") h.optimizer = OptimizerKind::Rmsprop;
    else if (o == "adadelta") h.optimizer = OptimizerKind::Adadelta;
    else throw ConfigError("unknown optimizer: '" + o + "'");
  }
  get("learning_rate", h.learning_rate);
  get("normalize_image", h.normalize_image);
  get("weight_decay", h.weight_decay);
  get("image_dropout", h.image_dropout);
  get("post_image_dropout", h.post_image_dropout);
  get("embed_dropout", h.embed_dropout);
  get("rnn_dropout", h.rnn_dropout);
  get("max_grad_norm", h.max_grad_norm);
  get("minibatch_size", h.minibatch_size);
  get("beam_width", h.beam_width);
  return h;
}

OptimizerState OptimizerState::create(OptimizerKind kind,
                                      const std::vector<std::pair<std::string, Tensor>>& params) {
  OptimizerState s;
  s.kind = kind;
  for (const auto& [name, t] : params) {
    s.m1.emplace_back(t.numel(), 0.0);
    s.m2.emplace_back(t.numel(), 0.0);
  }
  return s;
}

Tensor cross_entropy_loss(const std::vector<Tensor>& step_dists,
                          const std::vector<std::vector<int>>& targets,
                          const std::vector<std::vector<double>>& mask) {
  const std::size_t t_len = step_dists.size();
  const std::size_t batch = targets.size();
  double count = 0.0;
  for (const auto& row : mask)
    for (double m : row) count += m;
  if (count == 0.0) throw std::invalid_argument("cross_entropy_loss: all positions masked");
  Tensor total;
  for (std::size_t t = 0; t < t_len; ++t) {
    std::vector<int> tgt(batch);
    std::vector<double> msk(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      tgt[b] = targets[b][t];
      msk[b] = mask[b][t];
    }
    Tensor term = masked_nll_sum(step_dists[t], tgt, msk);
    total = t == 0 ? term : add(total, term);
  }
  return mul_scalar(total, 1.0 / count);
}

void clip_by_norm(std::vector<std::vector<double>*>& grads, double max_norm) {
  if (max_norm <= 0.0) throw std::invalid_argument("clip_by_norm: max_norm must be positive");
  double sq = 0.0;
  for (const auto* g : grads)
    for (double v : *g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double scale = max_norm / norm;
  for (auto* g : grads)
    for (double& v : *g) v *= scale;
}

void optimizer_step(const std::vector<std::pair<std::string, Tensor>>& params,
                    OptimizerState& state, double learning_rate) {
  if (params.size() != state.m1.size())
    throw std::invalid_argument("optimizer state does not match parameter list");
  const OptimizerConstants& k = state.constants;
  ++state.step_count;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor t = params[p].second;
    auto& vals = t.values();
    const auto& grad = t.grad();
    auto& m1 = state.m1[p];
    auto& m2 = state.m2[p];
    if (grad.size() != vals.size() || m1.size() != vals.size())
      throw std::invalid_argument("optimizer shape mismatch for " + params[p].first);
    switch (state.kind) {
      case OptimizerKind::Adam: {
        const double bc1 = 1.0 - std::pow(k.adam_beta1, static_cast<double>(state.step_count));
        const double bc2 = 1.0 - std::pow(k.adam_beta2, static_cast<double>(state.step_count));
        for (std::size_t i = 0; i < vals.size(); ++i) {
          m1[i] = k.adam_beta1 * m1[i] + (1.0 - k.adam_beta1) * grad[i];
          m2[i] = k.adam_beta2 * m2[i] + (1.0 - k.adam_beta2) * grad[i] * grad[i];
          vals[i] -= learning_rate * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + k.adam_eps);
        }
        break;
      }
      case OptimizerKind::Rmsprop:
        for (std::size_t i = 0; i < vals.size(); ++i) {
          m1[i] = k.rmsprop_decay * m1[i] + (1.0 - k.rmsprop_decay) * grad[i] * grad[i];
          vals[i] -= learning_rate * grad[i] / (std::sqrt(m1[i]) + k.rmsprop_eps);
        }
        break;
      case OptimizerKind::Adadelta:
        for (std::size_t i = 0; i < vals.size(); ++i) {
          m1[i] = k.adadelta_rho * m1[i] + (1.0 - k.adadelta_rho) * grad[i] * grad[i];
          const double dx = -std::sqrt(m2[i] + k.adadelta_eps) /
                            std::sqrt(m1[i] + k.adadelta_eps) * grad[i];
          m2[i] = k.adadelta_rho * m2[i] + (1.0 - k.adadelta_rho) * dx * dx;
          vals[i] += learning_rate * dx;
        }
        break;
    }
  }
}

Tensor batch_loss(const CaptionModel& model, const Batch& batch, double weight_decay,
                  bool training, Rng& rng) {
  std::vector<std::vector<double>> feats;
  if (model.config.kind != ArchKind::TextOnlyLM)
    for (const auto* f : batch.features) feats.push_back(*f);
  ForwardTrace trace = forward_batch(model, feats, batch.inputs, training, rng);
  std::vector<Tensor> dists;
  for (const auto& s : trace.steps) dists.push_back(s.dist);
  Tensor loss = cross_entropy_loss(dists, batch.targets, batch.mask);
  if (weight_decay > 0.0) {
    Tensor reg;
    bool first = true;
    for (const auto& [name, t] : model.parameters()) {
      // weight matrices only; biases and learned initial states excluded
      const auto dot = name.find('.');
      const std::string leafname = name.substr(dot + 1);
      if (leafname[0] != 'W' && leafname[0] != 'E') continue;
      reg = first ? sumsq(t) : add(reg, sumsq(t));
      first = false;
    }
    loss = add(loss, mul_scalar(reg, weight_decay));
  }
  return loss;
}

double geomean_perplexity(const CaptionModel& model,
                          const std::vector<const CaptionedItem*>& items) {
  double entropy_sum = 0.0;
  std::size_t n = 0;
  for (const auto* item : items) {
    for (const auto& cap : item->encoded) {
      const bool has_image = model.config.kind != ArchKind::TextOnlyLM;
      CaptionScore sc = caption_logprob(model, has_image ? &item->features : nullptr, cap);
      entropy_sum += sc.entropy;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("geomean_perplexity: no captions");
  return std::pow(2.0, entropy_sum / static_cast<double>(n));
}

std::vector<EpochStats> train(CaptionModel& model,
                              const std::vector<const CaptionedItem*>& train_items,
                              const std::vector<const CaptionedItem*>& val_items,
                              const HyperparamSpec& spec, const TrainOptions& options) {
  if (train_items.empty() || val_items.empty())
    throw std::invalid_argument("train: empty train or validation split");
  std::vector<TrainRow> rows;
  for (const auto* item : train_items)
    for (const auto& cap : item->encoded) rows.push_back({&item->features, &cap});
  if (rows.empty()) throw std::invalid_argument("train: no encoded captions (call encode_dataset)");

  Rng rng(options.seed);
  auto all_params = model.parameters();
  std::vector<std::pair<std::string, Tensor>> live_params;
  for (const auto& p : all_params)
    if (!options.freeze.count(p.first)) live_params.push_back(p);
  OptimizerState opt = OptimizerState::create(spec.optimizer, live_params);

  std::vector<EpochStats> history;
  std::vector<std::vector<double>> snapshot;
  auto take_snapshot = [&] {
    snapshot.clear();
    for (const auto& [name, t] : all_params) snapshot.push_back(t.values());
  };
  auto restore_snapshot = [&] {
    for (std::size_t i = 0; i < all_params.size(); ++i)
      const_cast<Tensor&>(all_params[i].second).values() = snapshot[i];
  };
  take_snapshot();

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t batches_done = 0;
    for (const Batch& batch : make_batches(rows, spec.minibatch_size, rng)) {
      model.zero_grads();
      Tensor loss = batch_loss(model, batch, spec.weight_decay, true, rng);
      const double loss_value = loss.item();
      if (std::isnan(loss_value))
        throw std::runtime_error("NaN loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batches_done) + "; try a smaller learning rate");
      backward(loss);
      std::vector<std::vector<double>*> grads;
      for (const auto& [name, t] : live_params) grads.push_back(&t.node()->grad);
      clip_by_norm(grads, spec.max_grad_norm);
      optimizer_step(live_params, opt, spec.learning_rate);
      loss_sum += loss_value;
      ++batches_done;
    }

    EpochStats stats;
    stats.loss = loss_sum / static_cast<double>(batches_done);
    stats.val_geomean_pplx = geomean_perplexity(model, val_items);
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(stats);

    if (options.early_stopping && history.size() >= 2 &&
        stats.val_geomean_pplx > history[history.size() - 2].val_geomean_pplx) {
      restore_snapshot();  // keep the pre-degradation parameters
      break;
    }
    take_snapshot();
    if (options.stop_when && options.stop_when(epoch)) break;
  }
  return history;
}

}  // namespace caplab
