#include "caplab/model.hpp"

#include <stdexcept>

namespace caplab {

std::string arch_name(ArchKind k) {
  switch (k) {
    case ArchKind::InitInject: return "init-inject";
    case ArchKind::PreInject: return "pre-inject";
    case ArchKind::ParInject: return "par-inject";
    case ArchKind::Merge: return "merge";
    case ArchKind::TextOnlyLM: return "lm";
  }
  return "?";
}

ArchKind arch_from_name(const std::string& s) {
  if (s == "init-inject") return ArchKind::InitInject;
  if (s == "pre-inject") return ArchKind::PreInject;
  if (s == "par-inject") return ArchKind::ParInject;
  if (s == "merge") return ArchKind::Merge;
  if (s == "lm") return ArchKind::TextOnlyLM;
  throw ConfigError("unknown architecture kind: '" + s + "'");
}

std::vector<std::pair<std::string, Tensor>> CaptionModel::parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("embedding.E", embedding.E);
  if (gru) {
    out.emplace_back("gru.W_f", gru->W_f);
    out.emplace_back("gru.b_f", gru->b_f);
    out.emplace_back("gru.W_r", gru->W_r);
    out.emplace_back("gru.b_r", gru->b_r);
    out.emplace_back("gru.W_s", gru->W_s);
    out.emplace_back("gru.b_s", gru->b_s);
    if (config.kind != ArchKind::InitInject) out.emplace_back("gru.s0", gru->s0);
  }
  if (lstm) {
    out.emplace_back("lstm.W_f", lstm->W_f);
    out.emplace_back("lstm.b_f", lstm->b_f);
    out.emplace_back("lstm.W_i", lstm->W_i);
    out.emplace_back("lstm.b_i", lstm->b_i);
    out.emplace_back("lstm.W_o", lstm->W_o);
    out.emplace_back("lstm.b_o", lstm->b_o);
    out.emplace_back("lstm.W_c", lstm->W_c);
    out.emplace_back("lstm.b_c", lstm->b_c);
    const bool init_hidden = config.kind == ArchKind::InitInject &&
                             config.lstm_inject == LstmInjectTarget::Hidden;
    const bool init_cell = config.kind == ArchKind::InitInject &&
                           config.lstm_inject == LstmInjectTarget::Cell;
    if (!init_hidden) out.emplace_back("lstm.h0", lstm->h0);
    if (!init_cell) out.emplace_back("lstm.c0", lstm->c0);
  }
  if (post_image) {
    out.emplace_back("post_image.W", post_image->W);
    out.emplace_back("post_image.b", post_image->b);
  }
  out.emplace_back("output.W", output.W);
  out.emplace_back("output.b", output.b);
  return out;
}

void CaptionModel::zero_grads() const {
  for (auto& [name, t] : parameters()) const_cast<Tensor&>(t).zero_grad();
}

CaptionModel build_model(const ModelConfig& config, WeightInit method,
                         double max_abs, Rng& rng) {
  if (config.vocab_size < 5)
    throw ConfigError("vocabulary must contain at least one non-reserved word");
  if (config.embed_size == 0 || config.state_size == 0)
    throw ConfigError("embed and state sizes must be positive");
  const bool has_image = config.kind != ArchKind::TextOnlyLM;
  if (has_image && (config.feat_dim == 0 || config.post_image_size == 0))
    throw ConfigError("conditioned architectures need feat_dim and post_image_size");
  if (config.kind == ArchKind::InitInject && config.post_image_size != config.state_size)
    throw ConfigError("init-inject requires post_image size == state size (got " +
                      std::to_string(config.post_image_size) + " vs " +
                      std::to_string(config.state_size) + ")");
  if (config.kind == ArchKind::PreInject && config.post_image_size != config.embed_size)
    throw ConfigError("pre-inject requires post_image size == embed size (got " +
                      std::to_string(config.post_image_size) + " vs " +
                      std::to_string(config.embed_size) + ")");

  std::size_t cell_input = config.embed_size;
  if (config.kind == ArchKind::ParInject) cell_input += config.post_image_size;

  CaptionModel m;
  m.config = config;
  m.embedding = EmbeddingParams::create(config.vocab_size, config.embed_size, method, max_abs, rng);
  if (config.cell == CellKind::Gru)
    m.gru = GruParams::create(config.state_size, cell_input, method, max_abs, rng);
  else
    m.lstm = LstmParams::create(config.state_size, cell_input, method, max_abs, rng);
  if (has_image)
    m.post_image = DenseParams::create(config.feat_dim, config.post_image_size,
                                       config.post_image_act, method, max_abs, rng);
  m.output = DenseParams::create(config.multimodal_size(), config.vocab_size,
                                 Activation::Identity, method, max_abs, rng);
  return m;
}

namespace {

struct CellState {
  Tensor h;  // GRU state or LSTM hidden state
  Tensor c;  // LSTM cell state only
};

CellState initial_state(const CaptionModel& m, const Tensor& img, std::size_t batch) {
  const ModelConfig& cfg = m.config;
  CellState s;
  if (cfg.cell == CellKind::Gru) {
    s.h = cfg.kind == ArchKind::InitInject ? img : repeat_rows(m.gru->s0, batch);
  } else {
    if (cfg.kind == ArchKind::InitInject) {
      if (cfg.lstm_inject == LstmInjectTarget::Hidden) {
        s.h = img;
        s.c = repeat_rows(m.lstm->c0, batch);
      } else {
        s.h = repeat_rows(m.lstm->h0, batch);
        s.c = img;
      }
    } else {
      s.h = repeat_rows(m.lstm->h0, batch);
      s.c = repeat_rows(m.lstm->c0, batch);
    }
  }
  return s;
}

CellState cell_step(const CaptionModel& m, const CellState& prev, const Tensor& x) {
  CellState next;
  if (m.config.cell == CellKind::Gru) {
    next.h = gru_step(prev.h, x, *m.gru);
  } else {
    auto [h, c] = lstm_step(prev.h, prev.c, x, *m.lstm);
    next.h = h;
    next.c = c;
  }
  return next;
}

}  // namespace

ForwardTrace forward_batch(const CaptionModel& model,
                           const std::vector<std::vector<double>>& features,
                           const std::vector<std::vector<int>>& inputs,
                           bool training, Rng& rng) {
  const ModelConfig& cfg = model.config;
  const bool has_image = cfg.kind != ArchKind::TextOnlyLM;
  const std::size_t batch = inputs.size();
  if (batch == 0) throw std::invalid_argument("forward_batch: empty batch");
  const std::size_t t_len = inputs[0].size();
  if (t_len == 0) throw std::invalid_argument("forward_batch: token length 0");
  for (const auto& row : inputs) {
    if (row.size() != t_len) throw std::invalid_argument("forward_batch: ragged input rows");
    if (row[0] != 1) throw std::invalid_argument("forward_batch: inputs must begin with the start token");
  }
  if (has_image && features.size() != batch)
    throw ConfigError("architecture " + arch_name(cfg.kind) + " requires an image per row");

  ForwardTrace trace;
  Tensor img;
  if (has_image) {
    std::vector<double> flat;
    flat.reserve(batch * cfg.feat_dim);
    for (const auto& f : features) {
      if (f.size() != cfg.feat_dim)
        throw std::invalid_argument("feature vector length " + std::to_string(f.size()) +
                                    " != feat_dim " + std::to_string(cfg.feat_dim));
      flat.insert(flat.end(), f.begin(), f.end());
    }
    trace.image_leaf = Tensor::leaf({batch, cfg.feat_dim}, std::move(flat));
    Tensor x = trace.image_leaf;
    if (cfg.normalize_image) x = l2_normalize_rows(x);
    x = dropout(x, cfg.image_dropout, training, rng);
    trace.post_image = dense(x, *model.post_image);
    img = dropout(trace.post_image, cfg.post_image_dropout, training, rng);
  }

  CellState state = initial_state(model, img, batch);
  if (cfg.kind == ArchKind::PreInject) {
    // image consumed as the first input; its output distribution is dropped
    state = cell_step(model, state, img);
    state.h = dropout(state.h, cfg.rnn_dropout, training, rng);
  }

  std::vector<int> column(batch);
  for (std::size_t t = 0; t < t_len; ++t) {
    StepTrace step;
    for (std::size_t b = 0; b < batch; ++b) column[b] = inputs[b][t];
    step.embedded = dropout(embed(column, model.embedding), cfg.embed_dropout, training, rng);
    Tensor x = step.embedded;
    if (cfg.kind == ArchKind::ParInject) x = concat(x, img, 1);
    state = cell_step(model, state, x);
    state.h = dropout(state.h, cfg.rnn_dropout, training, rng);
    step.state = state.h;
    step.multimodal = cfg.kind == ArchKind::Merge ? concat(state.h, img, 1) : state.h;
    step.logits = dense(step.multimodal, model.output);
    step.dist = softmax(step.logits);
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

ForwardTrace forward(const CaptionModel& model, const std::vector<double>* image_feats,
                     const std::vector<int>& tokens, bool training, Rng& rng) {
  std::vector<std::vector<double>> feats;
  if (image_feats) feats.push_back(*image_feats);
  return forward_batch(model, feats, {tokens}, training, rng);
}

Tensor multimodal_at(const CaptionModel& model, const std::vector<double>& image,
                     const std::vector<int>& prefix, std::size_t t) {
  if (t < 1 || t > prefix.size())
    throw std::out_of_range("multimodal_at: t=" + std::to_string(t) + " out of range for prefix of " +
                            std::to_string(prefix.size()));
  std::vector<int> tokens;
  tokens.push_back(1);  // start
  tokens.insert(tokens.end(), prefix.begin(), prefix.end());
  Rng rng(0);
  const bool has_image = model.config.kind != ArchKind::TextOnlyLM;
  ForwardTrace trace = forward(model, has_image ? &image : nullptr, tokens, false, rng);
  return trace.steps[t - 1].multimodal;
}

}  // namespace caplab
