#ifndef CAPLAB_DECODER_HPP
#define CAPLAB_DECODER_HPP

#include <vector>

#include "caplab/data.hpp"
#include "caplab/model.hpp"

namespace caplab {

struct Hypothesis {
  std::vector<int> tokens;  // after the start token; beam_search strips the
                            // trailing end token from its return value
  double logprob = 0.0;     // sum of ln p of chosen tokens (end included)
  bool complete = false;

  std::size_t word_count() const {
    const bool has_end = !tokens.empty() && tokens.back() == Vocabulary::kEnd;
    return tokens.size() - (has_end ? 1 : 0);
  }
};

// Constrained beam search. Forbidden everywhere: unknown, pad, start tokens
// and a token equal to the previous one; the end token is forbidden below
// min_len words and forced at max_len. Terminates when the most probable
// hypothesis in the beam is complete; returns it with start/end stripped.
Hypothesis beam_search(const CaptionModel& model, const std::vector<double>* image,
                       std::size_t width, std::size_t min_len = 5, std::size_t max_len = 20);

}  // namespace caplab

#endif
