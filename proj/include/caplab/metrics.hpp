#ifndef CAPLAB_METRICS_HPP
#define CAPLAB_METRICS_HPP

#include <string>
#include <vector>

#include "caplab/data.hpp"
#include "caplab/model.hpp"

namespace caplab {

struct CaptionScore {
  double logprob = 0.0;     // sum of ln p over words and the end token
  double entropy = 0.0;     // -(1/|s|) sum log2 p, |s| counting start and end
  double perplexity = 1.0;  // 2^entropy
};

// Teacher-forced probability of a caption (token indices, no start/end).
CaptionScore caption_logprob(const CaptionModel& model, const std::vector<double>* image,
                             const std::vector<int>& caption);

// Unknown-token probabilities divided by the number of out-of-vocabulary
// word types the token stands for.
CaptionScore adjusted_unknown_logprob(const CaptionModel& model, const std::vector<double>* image,
                                      const std::vector<int>& caption,
                                      std::int64_t oov_type_count);

using Sentence = std::vector<std::string>;

// Corpus-level BLEU-n: clipped modified precision, geometric mean over
// 1..n, brevity penalty, no smoothing.
double bleu_n(const std::vector<Sentence>& candidates,
              const std::vector<std::vector<Sentence>>& references, std::size_t n);

// LCS F-measure (beta = 1.2), max over references, mean over corpus.
double rouge_l(const std::vector<Sentence>& candidates,
               const std::vector<std::vector<Sentence>>& references);

// Plain CIDEr: TF-IDF n-gram cosine for n = 1..4, averaged, x10.
double cider(const std::vector<Sentence>& candidates,
             const std::vector<std::vector<Sentence>>& references);

struct DiversityStats {
  double vocab_used_pct = 0.0;        // of non-reserved vocabulary words
  std::int64_t min_freq_of_used = 0;  // training frequency of the rarest used word
  double mean_length = 0.0;
  double reused_pct = 0.0;  // candidates copied verbatim from the training set
  double unique_pct = 0.0;
};

DiversityStats diversity(const std::vector<Sentence>& candidates, const Vocabulary& vocab,
                         const std::vector<Sentence>& training_sentences);

struct RetrievalStats {
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  double recall_at_10 = 0.0;
  double median_rank = 0.0;
};

struct RetrievalItem {
  std::string id;
  const std::vector<double>* features;
  std::vector<int> caption;  // the one reference caption for this image
};

// Relevance of an image to a caption is the teacher-forced caption
// log-probability; ties broken by image id.
RetrievalStats retrieval(const CaptionModel& model, const std::vector<RetrievalItem>& items);

struct MetricsReport {
  double mean_prob = 0.0, median_prob = 0.0, geomean_prob = 0.0;
  double mean_pplx = 0.0, median_pplx = 0.0, geomean_pplx = 0.0;
  double bleu1 = 0.0, bleu2 = 0.0, bleu3 = 0.0, bleu4 = 0.0;
  double rouge_l = 0.0, cider = 0.0;
  DiversityStats diversity;
  RetrievalStats retrieval;

  std::string to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

}  // namespace caplab

#endif
