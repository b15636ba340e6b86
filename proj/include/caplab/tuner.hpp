#ifndef CAPLAB_TUNER_HPP
#define CAPLAB_TUNER_HPP

#include <functional>
#include <vector>

#include "caplab/model.hpp"
#include "caplab/trainer.hpp"

namespace caplab {

// Ranges per the tuned hyperparameter space: log-uniform for scale-like
// parameters (learning rate, weight decay, max init weight), uniform for
// sizes and dropouts, categorical otherwise. Samples always satisfy the
// architecture's size-tying constraints.
HyperparamSpec sample_hyperparams(ArchKind kind, Rng& rng);

struct SearchResult {
  HyperparamSpec spec;
  std::vector<double> repeat_scores;
  double mean_score = 0.0;
  bool failed = false;
};

using EvalFn = std::function<double(const HyperparamSpec&, std::uint64_t seed)>;

// Random search: sample `budget` valid specs, evaluate each `repeats` times
// with distinct seeds, rank by mean score descending (stable, so equal
// scores keep sampling order). Evaluation failures score as worst.
std::vector<SearchResult> random_search(ArchKind kind, std::size_t budget, const EvalFn& eval,
                                        std::size_t repeats, Rng& rng);

}  // namespace caplab

#endif
