#include "caplab/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace caplab {

namespace {

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return a.tokens < b.tokens;  // deterministic tie-break: lower token index first
}

}  // namespace

Hypothesis beam_search(const CaptionModel& model, const std::vector<double>* image,
                       std::size_t width, std::size_t min_len, std::size_t max_len) {
  if (width < 1) throw std::invalid_argument("beam_search: width must be >= 1");
  Rng rng(0);
  std::vector<Hypothesis> beam{Hypothesis{}};

  for (std::size_t iter = 0; iter <= max_len + 1; ++iter) {
    std::sort(beam.begin(), beam.end(), better);
    if (beam.front().complete) {
      Hypothesis out = beam.front();
      out.tokens.pop_back();  // strip the end token
      return out;
    }

    std::vector<Hypothesis> next;
    for (const Hypothesis& hyp : beam) {
      if (hyp.complete) {
        next.push_back(hyp);  // completed hypotheses stay and compete
        continue;
      }
      std::vector<int> inputs;
      inputs.push_back(Vocabulary::kStart);
      inputs.insert(inputs.end(), hyp.tokens.begin(), hyp.tokens.end());
      ForwardTrace trace = forward(model, image, inputs, false, rng);
      const auto& dist = trace.steps.back().dist.values();
      const int prev = hyp.tokens.empty() ? -1 : hyp.tokens.back();
      const bool force_end = hyp.word_count() >= max_len;
      for (int t = 0; t < static_cast<int>(dist.size()); ++t) {
        if (t == Vocabulary::kPad || t == Vocabulary::kStart || t == Vocabulary::kUnknown)
          continue;
        if (t == prev) continue;
        if (t == Vocabulary::kEnd && hyp.word_count() < min_len) continue;
        if (force_end && t != Vocabulary::kEnd) continue;
        Hypothesis h = hyp;
        h.tokens.push_back(t);
        h.logprob += std::log(dist[static_cast<std::size_t>(t)]);
        h.complete = t == Vocabulary::kEnd;
        next.push_back(std::move(h));
      }
    }
    if (next.empty())
      throw std::runtime_error("beam_search: every continuation is forbidden "
                               "(degenerate model or vocabulary)");
    std::sort(next.begin(), next.end(), better);
    if (next.size() > width) next.resize(width);
    beam = std::move(next);
  }
  throw std::runtime_error("beam_search: failed to complete a hypothesis within max_len");
}

}  // namespace caplab
