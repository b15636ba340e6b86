#include "caplab/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace caplab {

namespace {

double log_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

std::size_t uniform_size(Rng& rng, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> u(lo, hi);
  return u(rng);
}

double uniform_real(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return u(rng);
}

}  // namespace

HyperparamSpec sample_hyperparams(ArchKind kind, Rng& rng) {
  HyperparamSpec h;
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> three(0, 2);
  h.init_method = coin(rng) ? WeightInit::Xavier : WeightInit::Normal;
  h.max_init_weight = log_uniform(rng, 1e-5, 1.0);
  h.embed_size = uniform_size(rng, 64, 512);
  h.rnn_size = uniform_size(rng, 64, 512);
  h.post_image_size = uniform_size(rng, 64, 512);
  h.post_image_act = coin(rng) ? Activation::Relu : Activation::Identity;
  switch (three(rng)) {
    case 0: h.optimizer = OptimizerKind::Adam; break;
    case 1: h.optimizer = OptimizerKind::Rmsprop; break;
    default: h.optimizer = OptimizerKind::Adadelta; break;
  }
  h.learning_rate = log_uniform(rng, 1e-5, 1.0);
  h.normalize_image = coin(rng) != 0;
  h.weight_decay = log_uniform(rng, 1e-10, 0.1);
  h.image_dropout = uniform_real(rng, 0.0, 0.5);
  h.post_image_dropout = uniform_real(rng, 0.0, 0.5);
  h.embed_dropout = uniform_real(rng, 0.0, 0.5);
  h.rnn_dropout = uniform_real(rng, 0.0, 0.5);
  h.max_grad_norm = log_uniform(rng, 1.0, 1000.0);
  h.minibatch_size = uniform_size(rng, 10, 300);
  h.beam_width = uniform_size(rng, 1, 5);
  // size tying makes uniform sampling of the tied field pointless
  if (kind == ArchKind::InitInject) h.post_image_size = h.rnn_size;
  if (kind == ArchKind::PreInject) h.post_image_size = h.embed_size;
  h.validate(kind);
  return h;
}

std::vector<SearchResult> random_search(ArchKind kind, std::size_t budget, const EvalFn& eval,
                                        std::size_t repeats, Rng& rng) {
  if (budget < 1) throw std::invalid_argument("random_search: budget must be >= 1");
  std::vector<SearchResult> results;
  for (std::size_t i = 0; i < budget; ++i) {
    SearchResult r;
    r.spec = sample_hyperparams(kind, rng);
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      const std::uint64_t seed = i * 1000 + rep;
      try {
        r.repeat_scores.push_back(eval(r.spec, seed));
      } catch (const std::exception&) {
        r.failed = true;
        break;
      }
    }
    if (r.failed || r.repeat_scores.empty()) {
      r.failed = true;
      r.mean_score = -std::numeric_limits<double>::infinity();
    } else {
      double s = 0.0;
      for (double v : r.repeat_scores) s += v;
      r.mean_score = s / static_cast<double>(r.repeat_scores.size());
    }
    results.push_back(std::move(r));
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const SearchResult& a, const SearchResult& b) {
                     return a.mean_score > b.mean_score;
                   });
  return results;
}

}  // namespace caplab
