#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "caplab/decoder.hpp"
#include "caplab/model.hpp"

using namespace caplab;

namespace {

CaptionModel tiny_model(std::size_t vocab, std::uint64_t seed, double scale = 0.5) {
  ModelConfig c;
  c.kind = ArchKind::Merge;
  c.vocab_size = vocab;
  c.feat_dim = 3;
  c.embed_size = 4;
  c.state_size = 5;
  c.post_image_size = 4;
  Rng rng(seed);
  return build_model(c, WeightInit::Normal, scale, rng);
}

const std::vector<double> kImage{0.4, -0.8, 0.6};

double step_logprob(const CaptionModel& m, const std::vector<int>& words, int next) {
  std::vector<int> inputs{Vocabulary::kStart};
  inputs.insert(inputs.end(), words.begin(), words.end());
  Rng rng(0);
  ForwardTrace tr = forward(m, &kImage, inputs, false, rng);
  return std::log(tr.steps.back().dist.values()[static_cast<std::size_t>(next)]);
}

// Exhaustive enumeration of every legal sentence: words from the non-reserved
// range, no adjacent duplicates, length in [min_len, max_len], end appended.
void enumerate(const CaptionModel& m, std::vector<int>& words, double logprob,
               std::size_t min_len, std::size_t max_len, std::vector<int>& best_tokens,
               double& best_logprob) {
  if (words.size() >= min_len) {
    const double total = logprob + step_logprob(m, words, Vocabulary::kEnd);
    if (total > best_logprob ||
        (total == best_logprob && words < best_tokens)) {
      best_logprob = total;
      best_tokens = words;
    }
  }
  if (words.size() == max_len) return;
  for (int w = 4; w < static_cast<int>(m.config.vocab_size); ++w) {
    if (!words.empty() && words.back() == w) continue;
    const double lp = logprob + step_logprob(m, words, w);
    words.push_back(w);
    enumerate(m, words, lp, min_len, max_len, best_tokens, best_logprob);
    words.pop_back();
  }
}

}  // namespace

TEST_CASE("beam search equals exhaustive enumeration for 20 random models") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const CaptionModel m = tiny_model(7, seed, 0.8);  // 3 content words
    std::vector<int> best;
    double best_lp = -1e300;
    std::vector<int> scratch;
    enumerate(m, scratch, 0.0, 1, 5, best, best_lp);

    // 93 legal word sequences exist; width 100 makes the beam exhaustive
    const Hypothesis hyp = beam_search(m, &kImage, 100, 1, 5);
    INFO("seed ", seed);
    CHECK(hyp.tokens == best);
    CHECK(hyp.logprob == doctest::Approx(best_lp).epsilon(1e-9));
    CHECK(hyp.complete);
  }
}

TEST_CASE("width one is greedy argmax over the allowed tokens") {
  const CaptionModel m = tiny_model(8, 99);
  const Hypothesis hyp = beam_search(m, &kImage, 1, 2, 6);

  std::vector<int> words;
  while (true) {
    std::vector<int> inputs{Vocabulary::kStart};
    inputs.insert(inputs.end(), words.begin(), words.end());
    Rng rng(0);
    ForwardTrace tr = forward(m, &kImage, inputs, false, rng);
    const auto& dist = tr.steps.back().dist.values();
    int best = -1;
    double best_p = -1.0;
    for (int t = 2; t < static_cast<int>(dist.size()); ++t) {
      if (t == Vocabulary::kUnknown) continue;
      if (!words.empty() && t == words.back()) continue;
      if (t == Vocabulary::kEnd && words.size() < 2) continue;
      if (words.size() >= 6 && t != Vocabulary::kEnd) continue;
      if (dist[static_cast<std::size_t>(t)] > best_p) {
        best_p = dist[static_cast<std::size_t>(t)];
        best = t;
      }
    }
    if (best == Vocabulary::kEnd) break;
    words.push_back(best);
  }
  CHECK(hyp.tokens == words);
}

TEST_CASE("min_len forbids early end and max_len forces it") {
  CaptionModel eager = tiny_model(8, 3);
  eager.output.b.values()[Vocabulary::kEnd] = 25.0;  // wants to stop immediately
  const Hypothesis early = beam_search(eager, &kImage, 3, 5, 20);
  CHECK(early.word_count() == 5);  // held open until min_len, then closed

  CaptionModel reluctant = tiny_model(8, 4);
  reluctant.output.b.values()[Vocabulary::kEnd] = -25.0;  // never wants to stop
  const Hypothesis late = beam_search(reluctant, &kImage, 3, 5, 20);
  CHECK(late.word_count() == 20);  // end forced at max_len
  CHECK(late.complete);
}

TEST_CASE("forbidden tokens never appear") {
  for (std::uint64_t seed : {31, 32, 33}) {
    const CaptionModel m = tiny_model(9, seed, 1.0);
    const Hypothesis hyp = beam_search(m, &kImage, 4, 5, 20);
    REQUIRE(hyp.complete);
    REQUIRE(hyp.word_count() >= 5);
    for (std::size_t i = 0; i < hyp.tokens.size(); ++i) {
      CHECK(hyp.tokens[i] != Vocabulary::kPad);
      CHECK(hyp.tokens[i] != Vocabulary::kStart);
      CHECK(hyp.tokens[i] != Vocabulary::kUnknown);
      if (i > 0) CHECK(hyp.tokens[i] != hyp.tokens[i - 1]);
    }
  }
}

TEST_CASE("invalid widths are rejected") {
  const CaptionModel m = tiny_model(8, 5);
  CHECK_THROWS(beam_search(m, &kImage, 0));
}
