#include "caplab/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace caplab {

std::set<std::string> prefix_encoding_names(const CaptionModel& model) {
  std::set<std::string> out;
  for (const auto& [name, t] : model.parameters())
    if (name.rfind("embedding.", 0) == 0 || name.rfind("gru.", 0) == 0 ||
        name.rfind("lstm.", 0) == 0)
      out.insert(name);
  return out;
}

std::vector<std::vector<std::string>> subsample_corpus(
    const std::vector<std::vector<std::string>>& corpus, double exponent,
    std::size_t base_count, Rng& rng) {
  const std::size_t want =
      static_cast<std::size_t>(std::llround(std::pow(10.0, exponent) * static_cast<double>(base_count)));
  if (want > corpus.size())
    throw std::invalid_argument("subsample_corpus: requested " + std::to_string(want) +
                                " sentences from a corpus of " + std::to_string(corpus.size()));
  std::vector<std::vector<std::string>> out;
  out.reserve(want);
  std::sample(corpus.begin(), corpus.end(), std::back_inserter(out), want, rng);
  return out;
}

Vocabulary intersect_vocab(const Vocabulary& lm_vocab, const Vocabulary& caption_vocab) {
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [w, ix] : caption_vocab.index)
    if (lm_vocab.contains(w)) kept.emplace_back(w, caption_vocab.counts.at(w));
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.words = {"<pad>", "<start>", "<end>", "<unk>"};
  for (const auto& [w, c] : kept) {
    v.index[w] = static_cast<int>(v.words.size());
    v.words.push_back(w);
    v.counts[w] = c;
  }
  return v;
}

CaptionModel transfer(const CaptionModel& lm, const Vocabulary& lm_vocab,
                      const Vocabulary& target_vocab, const HyperparamSpec& target_spec,
                      std::size_t feat_dim, Rng& rng) {
  if (!lm.gru) throw ConfigError("transfer: source language model must use a GRU cell");
  if (lm.config.embed_size != target_spec.embed_size ||
      lm.config.state_size != target_spec.rnn_size)
    throw ConfigError("transfer: source LM geometry (embed " +
                      std::to_string(lm.config.embed_size) + ", state " +
                      std::to_string(lm.config.state_size) +
                      ") does not match the target (embed " +
                      std::to_string(target_spec.embed_size) + ", state " +
                      std::to_string(target_spec.rnn_size) + ")");

  target_spec.validate(ArchKind::Merge);
  ModelConfig cfg = target_spec.model_config(ArchKind::Merge, target_vocab.size(), feat_dim);
  CaptionModel m = build_model(cfg, target_spec.init_method, target_spec.max_init_weight, rng);

  m.gru->W_f.values() = lm.gru->W_f.values();
  m.gru->b_f.values() = lm.gru->b_f.values();
  m.gru->W_r.values() = lm.gru->W_r.values();
  m.gru->b_r.values() = lm.gru->b_r.values();
  m.gru->W_s.values() = lm.gru->W_s.values();
  m.gru->b_s.values() = lm.gru->b_s.values();
  m.gru->s0.values() = lm.gru->s0.values();

  const std::size_t d = lm.config.embed_size;
  const auto& src = lm.embedding.E.values();
  auto& dst = m.embedding.E.values();
  for (int r = 0; r < 4; ++r)  // reserved pseudo-token rows
    std::copy_n(src.data() + r * d, d, dst.data() + r * d);
  for (const auto& [w, target_ix] : target_vocab.index) {
    if (!lm_vocab.contains(w)) continue;
    const int src_ix = lm_vocab.lookup(w);
    std::copy_n(src.data() + static_cast<std::size_t>(src_ix) * d, d,
                dst.data() + static_cast<std::size_t>(target_ix) * d);
  }
  return m;
}

PartialTrainResult partial_train_lm(const std::vector<const CaptionedItem*>& train_items,
                                    const std::vector<const CaptionedItem*>& val_items,
                                    const HyperparamSpec& spec, std::size_t vocab_size,
                                    std::size_t n_epochs, bool enforce_improving,
                                    std::uint64_t seed) {
  const std::size_t max_attempts = enforce_improving ? 5 : 1;
  PartialTrainResult result;
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    const std::uint64_t attempt_seed = seed + attempt;
    Rng rng(attempt_seed);
    ModelConfig cfg = spec.model_config(ArchKind::TextOnlyLM, vocab_size, 0);
    result.model = build_model(cfg, spec.init_method, spec.max_init_weight, rng);
    result.attempts = attempt + 1;
    result.degraded_at_epoch = 0;
    result.history.clear();
    if (n_epochs == 0) return result;

    TrainOptions opt;
    opt.max_epochs = n_epochs;
    opt.early_stopping = false;
    opt.seed = attempt_seed;
    result.history = train(result.model, train_items, val_items, spec, opt);

    for (std::size_t e = 1; e < result.history.size(); ++e) {
      if (result.history[e].val_geomean_pplx > result.history[e - 1].val_geomean_pplx) {
        result.degraded_at_epoch = e + 1;
        break;
      }
    }
    if (result.degraded_at_epoch == 0) break;
  }
  return result;
}

}  // namespace caplab
