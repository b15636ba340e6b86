#ifndef CAPLAB_TRANSFER_HPP
#define CAPLAB_TRANSFER_HPP

#include <set>
#include <string>
#include <vector>

#include "caplab/data.hpp"
#include "caplab/model.hpp"
#include "caplab/trainer.hpp"

namespace caplab {

enum class TransferMode { Frozen, FineTuned };

struct TransferPlan {
  TransferMode mode = TransferMode::Frozen;
  double corpus_exponent = 0.0;      // corpus = 10^x * base_count sentences
  std::size_t partial_epochs = 0;    // optional cap for partial LM training (0 = untrained)
};

// Parameter names frozen by a frozen-mode transfer: the embedding matrix
// plus the whole RNN (its learned initial state included).
std::set<std::string> prefix_encoding_names(const CaptionModel& model);

// Uniform sample without replacement of round(10^x * base_count) sentences.
std::vector<std::vector<std::string>> subsample_corpus(
    const std::vector<std::vector<std::string>>& corpus, double exponent,
    std::size_t base_count, Rng& rng);

// Non-reserved words = set intersection; counts from the caption corpus.
Vocabulary intersect_vocab(const Vocabulary& lm_vocab, const Vocabulary& caption_vocab);

// Copies the GRU wholesale and the embedding rows of intersected words from
// a text-only LM into a freshly initialised merge caption generator.
// Reserved-token rows are copied too; post-image and output layers stay
// freshly initialised.
CaptionModel transfer(const CaptionModel& lm, const Vocabulary& lm_vocab,
                      const Vocabulary& target_vocab, const HyperparamSpec& target_spec,
                      std::size_t feat_dim, Rng& rng);

struct PartialTrainResult {
  CaptionModel model;
  std::vector<EpochStats> history;   // exactly n entries
  std::size_t attempts = 1;
  std::size_t degraded_at_epoch = 0;  // first epoch where validation worsened (0 = never)
};

// Initialises and trains an LM for exactly n epochs (n = 0 returns the
// untrained initialisation). With enforce_improving, restarts from a new
// seed (up to 5 times) whenever validation perplexity degrades before
// epoch n, then proceeds without the guard, recording where it degraded.
PartialTrainResult partial_train_lm(const std::vector<const CaptionedItem*>& train_items,
                                    const std::vector<const CaptionedItem*>& val_items,
                                    const HyperparamSpec& spec, std::size_t vocab_size,
                                    std::size_t n_epochs, bool enforce_improving,
                                    std::uint64_t seed);

}  // namespace caplab

#endif
