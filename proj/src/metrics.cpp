#include "caplab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace caplab {

namespace {

CaptionScore score_caption(const CaptionModel& model, const std::vector<double>* image,
                           const std::vector<int>& caption, std::int64_t oov_type_count) {
  if (caption.empty()) throw std::invalid_argument("caption_logprob: empty caption");
  std::vector<int> inputs;
  inputs.push_back(Vocabulary::kStart);
  inputs.insert(inputs.end(), caption.begin(), caption.end());
  std::vector<int> targets(caption);
  targets.push_back(Vocabulary::kEnd);

  Rng rng(0);
  ForwardTrace trace = forward(model, image, inputs, false, rng);
  const std::size_t vocab = model.config.vocab_size;
  CaptionScore sc;
  double log2_sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    double p = trace.steps[i].dist.values()[static_cast<std::size_t>(targets[i])];
    if (targets[i] == Vocabulary::kUnknown && oov_type_count > 1)
      p /= static_cast<double>(oov_type_count);
    sc.logprob += std::log(p);
    log2_sum += std::log2(p);
  }
  (void)vocab;
  // |s| counts the start and end tokens; the sum has |s|-1 terms
  const double s_len = static_cast<double>(caption.size() + 2);
  sc.entropy = -log2_sum / s_len;
  sc.perplexity = std::pow(2.0, sc.entropy);
  return sc;
}

}  // namespace

CaptionScore caption_logprob(const CaptionModel& model, const std::vector<double>* image,
                             const std::vector<int>& caption) {
  return score_caption(model, image, caption, 1);
}

CaptionScore adjusted_unknown_logprob(const CaptionModel& model, const std::vector<double>* image,
                                      const std::vector<int>& caption,
                                      std::int64_t oov_type_count) {
  const bool has_unknown =
      std::find(caption.begin(), caption.end(), Vocabulary::kUnknown) != caption.end();
  if (has_unknown && oov_type_count < 1)
    throw std::invalid_argument("adjusted_unknown_logprob: oov_type_count must be >= 1 "
                                "when the caption contains unknown tokens");
  return score_caption(model, image, caption, std::max<std::int64_t>(oov_type_count, 1));
}

namespace {

using Ngram = std::vector<std::string>;

std::map<Ngram, std::int64_t> ngram_counts(const Sentence& s, std::size_t n) {
  std::map<Ngram, std::int64_t> out;
  if (s.size() < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++out[Ngram(s.begin() + i, s.begin() + i + n)];
  return out;
}

void check_corpus(const std::vector<Sentence>& candidates,
                  const std::vector<std::vector<Sentence>>& references) {
  if (candidates.empty() || candidates.size() != references.size())
    throw std::invalid_argument("metric corpus empty or candidate/reference count mismatch");
}

}  // namespace

double bleu_n(const std::vector<Sentence>& candidates,
              const std::vector<std::vector<Sentence>>& references, std::size_t n) {
  check_corpus(candidates, references);
  if (n < 1 || n > 4) throw std::invalid_argument("bleu_n: n must be in 1..4");
  std::vector<double> clipped(n, 0.0), total(n, 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Sentence& cand = candidates[i];
    cand_len += static_cast<double>(cand.size());
    // effective reference length: closest to the candidate, ties to shorter
    std::size_t best = references[i].front().size();
    for (const auto& ref : references[i]) {
      const auto d = [&](std::size_t l) {
        return l > cand.size() ? l - cand.size() : cand.size() - l;
      };
      if (d(ref.size()) < d(best) || (d(ref.size()) == d(best) && ref.size() < best))
        best = ref.size();
    }
    ref_len += static_cast<double>(best);
    for (std::size_t k = 1; k <= n; ++k) {
      auto cc = ngram_counts(cand, k);
      std::map<Ngram, std::int64_t> max_ref;
      for (const auto& ref : references[i])
        for (const auto& [g, c] : ngram_counts(ref, k))
          max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : cc) {
        total[k - 1] += static_cast<double>(c);
        auto it = max_ref.find(g);
        if (it != max_ref.end())
          clipped[k - 1] += static_cast<double>(std::min(c, it->second));
      }
    }
  }
  double log_sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (total[k] == 0.0 || clipped[k] == 0.0) return 0.0;  // unsmoothed
    log_sum += std::log(clipped[k] / total[k]);
  }
  const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
  return bp * std::exp(log_sum / static_cast<double>(n));
}

namespace {

std::size_t lcs_length(const Sentence& a, const Sentence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double rouge_l(const std::vector<Sentence>& candidates,
               const std::vector<std::vector<Sentence>>& references) {
  check_corpus(candidates, references);
  constexpr double kBeta = 1.2;
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double best = 0.0;
    for (const auto& ref : references[i]) {
      const double lcs = static_cast<double>(lcs_length(candidates[i], ref));
      if (lcs == 0.0 || candidates[i].empty() || ref.empty()) continue;
      const double rec = lcs / static_cast<double>(ref.size());
      const double prec = lcs / static_cast<double>(candidates[i].size());
      const double f = (1.0 + kBeta * kBeta) * rec * prec / (rec + kBeta * kBeta * prec);
      best = std::max(best, f);
    }
    sum += best;
  }
  return sum / static_cast<double>(candidates.size());
}

double cider(const std::vector<Sentence>& candidates,
             const std::vector<std::vector<Sentence>>& references) {
  check_corpus(candidates, references);
  const std::size_t n_items = candidates.size();
  if (n_items < 2) throw std::invalid_argument("cider: needs >= 2 items for a defined IDF");
  constexpr std::size_t kMaxN = 4;

  // document frequency over reference sets
  std::vector<std::map<Ngram, double>> df(kMaxN);
  for (const auto& refs : references) {
    for (std::size_t k = 0; k < kMaxN; ++k) {
      std::set<Ngram> seen;
      for (const auto& ref : refs)
        for (const auto& [g, c] : ngram_counts(ref, k + 1)) seen.insert(g);
      for (const auto& g : seen) df[k][g] += 1.0;
    }
  }
  auto idf = [&](std::size_t k, const Ngram& g) {
    auto it = df[k].find(g);
    const double d = it == df[k].end() ? 1.0 : std::max(it->second, 1.0);
    return std::log(static_cast<double>(n_items) / d);
  };
  auto tfidf = [&](const Sentence& s, std::size_t k) {
    std::map<Ngram, double> v;
    for (const auto& [g, c] : ngram_counts(s, k + 1))
      v[g] = static_cast<double>(c) * idf(k, g);
    return v;
  };
  auto cosine = [](const std::map<Ngram, double>& a, const std::map<Ngram, double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [g, v] : a) {
      na += v * v;
      auto it = b.find(g);
      if (it != b.end()) dot += v * it->second;
    }
    for (const auto& [g, v] : b) nb += v * v;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };

  double corpus_sum = 0.0;
  for (std::size_t i = 0; i < n_items; ++i) {
    double item_score = 0.0;
    for (std::size_t k = 0; k < kMaxN; ++k) {
      const auto cv = tfidf(candidates[i], k);
      double level = 0.0;
      for (const auto& ref : references[i]) level += cosine(cv, tfidf(ref, k));
      item_score += level / static_cast<double>(references[i].size());
    }
    corpus_sum += 10.0 * item_score / static_cast<double>(kMaxN);
  }
  return corpus_sum / static_cast<double>(n_items);
}

DiversityStats diversity(const std::vector<Sentence>& candidates, const Vocabulary& vocab,
                         const std::vector<Sentence>& training_sentences) {
  DiversityStats d;
  if (candidates.empty()) return d;
  std::set<std::string> used;
  std::set<Sentence> unique;
  std::set<Sentence> train_set(training_sentences.begin(), training_sentences.end());
  double len_sum = 0.0;
  std::size_t reused = 0;
  for (const auto& c : candidates) {
    len_sum += static_cast<double>(c.size());
    for (const auto& w : c)
      if (vocab.contains(w)) used.insert(w);
    unique.insert(c);
    if (train_set.count(c)) ++reused;
  }
  d.vocab_used_pct = vocab.content_size() == 0
                         ? 0.0
                         : 100.0 * static_cast<double>(used.size()) /
                               static_cast<double>(vocab.content_size());
  d.min_freq_of_used = 0;
  for (const auto& w : used) {
    auto it = vocab.counts.find(w);
    if (it == vocab.counts.end()) continue;
    if (d.min_freq_of_used == 0 || it->second < d.min_freq_of_used)
      d.min_freq_of_used = it->second;
  }
  d.mean_length = len_sum / static_cast<double>(candidates.size());
  d.reused_pct = 100.0 * static_cast<double>(reused) / static_cast<double>(candidates.size());
  d.unique_pct = 100.0 * static_cast<double>(unique.size()) / static_cast<double>(candidates.size());
  return d;
}

RetrievalStats retrieval(const CaptionModel& model, const std::vector<RetrievalItem>& items) {
  if (items.empty()) throw std::invalid_argument("retrieval: empty pool");
  std::vector<double> ranks;
  for (const auto& cap_item : items) {
    std::vector<std::pair<double, const std::string*>> scored;
    for (const auto& img_item : items) {
      const double lp = caption_logprob(model, img_item.features, cap_item.caption).logprob;
      scored.emplace_back(lp, &img_item.id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return *a.second < *b.second;
    });
    for (std::size_t r = 0; r < scored.size(); ++r) {
      if (*scored[r].second == cap_item.id) {
        ranks.push_back(static_cast<double>(r + 1));
        break;
      }
    }
  }
  RetrievalStats s;
  const double n = static_cast<double>(ranks.size());
  for (double r : ranks) {
    if (r <= 1) s.recall_at_1 += 1;
    if (r <= 5) s.recall_at_5 += 1;
    if (r <= 10) s.recall_at_10 += 1;
  }
  s.recall_at_1 *= 100.0 / n;
  s.recall_at_5 *= 100.0 / n;
  s.recall_at_10 *= 100.0 / n;
  std::sort(ranks.begin(), ranks.end());
  const std::size_t mid = ranks.size() / 2;
  s.median_rank = ranks.size() % 2 == 1 ? ranks[mid] : 0.5 * (ranks[mid - 1] + ranks[mid]);
  return s;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["probability"] = {{"mean_prob", mean_prob},     {"median_prob", median_prob},
                      {"geomean_prob", geomean_prob}, {"mean_pplx", mean_pplx},
                      {"median_pplx", median_pplx}, {"geomean_pplx", geomean_pplx}};
  j["quality"] = {{"bleu1", bleu1}, {"bleu2", bleu2}, {"bleu3", bleu3},
                  {"bleu4", bleu4}, {"rouge_l", rouge_l}, {"cider", cider}};
  j["diversity"] = {{"vocab_used_pct", diversity.vocab_used_pct},
                    {"min_freq_of_used", diversity.min_freq_of_used},
                    {"mean_length", diversity.mean_length},
                    {"reused_pct", diversity.reused_pct},
                    {"unique_pct", diversity.unique_pct}};
  j["retrieval"] = {{"r_at_1", retrieval.recall_at_1},
                    {"r_at_5", retrieval.recall_at_5},
                    {"r_at_10", retrieval.recall_at_10},
                    {"median_rank", retrieval.median_rank}};
  return j.dump(2);
}

std::string MetricsReport::csv_header() {
  return "mean_prob,median_prob,geomean_prob,mean_pplx,median_pplx,geomean_pplx,"
         "bleu1,bleu2,bleu3,bleu4,rouge_l,cider,"
         "vocab_used_pct,min_freq_of_used,mean_length,reused_pct,unique_pct,"
         "r_at_1,r_at_5,r_at_10,median_rank";
}

std::string MetricsReport::csv_row() const {
  std::ostringstream os;
  os.precision(12);
  os << mean_prob << ',' << median_prob << ',' << geomean_prob << ',' << mean_pplx << ','
     << median_pplx << ',' << geomean_pplx << ',' << bleu1 << ',' << bleu2 << ',' << bleu3 << ','
     << bleu4 << ',' << rouge_l << ',' << cider << ',' << diversity.vocab_used_pct << ','
     << diversity.min_freq_of_used << ',' << diversity.mean_length << ','
     << diversity.reused_pct << ',' << diversity.unique_pct << ',' << retrieval.recall_at_1 << ','
     << retrieval.recall_at_5 << ',' << retrieval.recall_at_10 << ',' << retrieval.median_rank;
  return os.str();
}

}  // namespace caplab
