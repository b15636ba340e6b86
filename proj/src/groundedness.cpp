#include "caplab/groundedness.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace caplab {

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> kStopwords = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any",
      "are", "aren", "as", "at", "be", "because", "been", "before", "being", "below",
      "between", "both", "but", "by", "can", "cannot", "could", "couldn", "did", "didn",
      "do", "does", "doesn", "doing", "don", "down", "during", "each", "either", "few",
      "for", "from", "further", "had", "hadn", "has", "hasn", "have", "haven", "having",
      "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if",
      "in", "into", "is", "isn", "it", "its", "itself", "just", "let", "me", "more",
      "most", "mustn", "my", "myself", "neither", "no", "nor", "not", "now", "of", "off",
      "on", "once", "only", "or", "other", "ought", "our", "ours", "ourselves", "out",
      "over", "own", "same", "shan", "she", "should", "shouldn", "so", "some", "such",
      "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
      "these", "they", "this", "those", "through", "to", "too", "under", "until", "up",
      "upon", "very", "was", "wasn", "we", "were", "weren", "what", "when", "where",
      "which", "while", "who", "whom", "why", "will", "with", "won", "would", "wouldn",
      "you", "your", "yours", "yourself", "yourselves", "s", "t", "d", "ll", "m", "re",
      "ve", "one", "two", "three", "also", "another", "away", "back", "been", "near",
      "next", "around", "along", "across", "behind", "beside", "front", "many", "much",
      "its", "per", "via", "yet", "still", "even", "ever", "however", "therefore"};
  return kStopwords;
}

std::vector<int> with_start(const std::vector<int>& prefix) {
  std::vector<int> tokens;
  tokens.push_back(Vocabulary::kStart);
  tokens.insert(tokens.end(), prefix.begin(), prefix.end());
  return tokens;
}

ForwardTrace trace_for(const CaptionModel& model, const std::vector<double>* image,
                       const std::vector<int>& prefix, std::size_t t) {
  if (t < 1 || t > prefix.size() + 1)
    throw std::out_of_range("analysis step t=" + std::to_string(t) +
                            " out of range for prefix of " + std::to_string(prefix.size()));
  Rng rng(0);
  return forward(model, image, with_start(prefix), false, rng);
}

}  // namespace

bool is_stopword(const std::string& word) { return stopwords().count(word) > 0; }

double sensitivity(const CaptionModel& model, const std::vector<double>& image,
                   const std::vector<int>& prefix, std::size_t t, SensitivityTarget wrt) {
  const bool has_image = model.config.kind != ArchKind::TextOnlyLM;
  if (!has_image && wrt != SensitivityTarget::PrevTokenEmbedding)
    throw ConfigError("image sensitivity is undefined for a text-only language model");
  ForwardTrace trace = trace_for(model, has_image ? &image : nullptr, prefix, t);
  const StepTrace& step = trace.steps[t - 1];
  const auto& dist = step.dist.values();
  const std::size_t argmax =
      static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
  backward(pick(step.dist, argmax));

  const Tensor* target = nullptr;
  switch (wrt) {
    case SensitivityTarget::Image: target = &trace.image_leaf; break;
    case SensitivityTarget::PostImage: target = &trace.post_image; break;
    case SensitivityTarget::PrevTokenEmbedding: target = &step.embedded; break;
  }
  const auto& g = target->grad();
  double sum = 0.0;
  for (double v : g) sum += std::abs(v);
  return sum / static_cast<double>(g.size());
}

double cosine_distance(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine_distance: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine_distance: zero vector");
  return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

double jsd(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("jsd: length mismatch");
  double sp = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw std::invalid_argument("jsd: negative probability");
    sp += p[i];
    sq += q[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw std::invalid_argument("jsd: inputs must each sum to 1");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) d += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) d += 0.5 * q[i] * std::log(q[i] / m);
  }
  return d;
}

FoilPair select_foil(const CaptionedItem& item, const std::vector<const CaptionedItem*>& pool) {
  std::vector<const CaptionedItem*> others;
  for (const auto* p : pool)
    if (p->id != item.id) others.push_back(p);
  if (others.empty()) throw std::invalid_argument("select_foil: pool must contain another item");

  auto content_words = [](const CaptionedItem& it) {
    std::set<std::string> out;
    for (const auto& cap : it.captions)
      for (const auto& w : cap)
        if (!is_stopword(w)) out.insert(w);
    return out;
  };
  const auto own = content_words(item);

  auto pick_furthest = [&](const std::vector<const CaptionedItem*>& cands) {
    const CaptionedItem* best = nullptr;
    double best_dist = -1.0;
    for (const auto* c : cands) {
      const double d = cosine_distance(item.features, c->features);
      if (d > best_dist || (d == best_dist && c->id < best->id)) {
        best = c;
        best_dist = d;
      }
    }
    return std::make_pair(best, best_dist);
  };

  std::vector<const CaptionedItem*> candidates;
  for (const auto* c : others) {
    const auto theirs = content_words(*c);
    bool overlap = false;
    for (const auto& w : own)
      if (theirs.count(w)) { overlap = true; break; }
    if (!overlap) candidates.push_back(c);
  }

  FoilPair fp;
  fp.correct_id = item.id;
  fp.fallback = candidates.empty();
  const auto [best, dist] = pick_furthest(fp.fallback ? others : candidates);
  fp.foil_id = best->id;
  fp.feature_distance = dist;
  return fp;
}

double omission_score(const CaptionModel& model, const std::vector<double>& image,
                      const std::vector<double>& foil, const std::vector<int>& prefix,
                      std::size_t t, OmissionLayer layer, OmissionMetric metric) {
  if (metric == OmissionMetric::Jsd && layer != OmissionLayer::Softmax)
    throw std::invalid_argument("jsd omission scores are only defined on the softmax layer");
  ForwardTrace a = trace_for(model, &image, prefix, t);
  ForwardTrace b = trace_for(model, &foil, prefix, t);
  auto layer_of = [layer](const ForwardTrace& tr, std::size_t step) -> const std::vector<double>& {
    switch (layer) {
      case OmissionLayer::Multimodal: return tr.steps[step].multimodal.values();
      case OmissionLayer::Logits: return tr.steps[step].logits.values();
      default: return tr.steps[step].dist.values();
    }
  };
  const auto& u = layer_of(a, t - 1);
  const auto& v = layer_of(b, t - 1);
  if (u == v) return 0.0;  // identical runs, e.g. foil == correct image
  return metric == OmissionMetric::Cosine ? cosine_distance(u, v) : jsd(u, v);
}

std::string curve_measure_name(CurveMeasure m) {
  switch (m) {
    case CurveMeasure::SensitivityImage: return "sensitivity-image";
    case CurveMeasure::SensitivityPostImage: return "sensitivity-post-image";
    case CurveMeasure::SensitivityPrevToken: return "sensitivity-prev-token";
    case CurveMeasure::OmissionMultimodalCosine: return "omission-multimodal-cosine";
    case CurveMeasure::OmissionLogitsCosine: return "omission-logits-cosine";
    case CurveMeasure::OmissionSoftmaxCosine: return "omission-softmax-cosine";
    case CurveMeasure::OmissionSoftmaxJsd: return "omission-softmax-jsd";
  }
  return "?";
}

InfluenceCurve influence_curve(const CaptionModel& model,
                               const std::vector<const CaptionedItem*>& items,
                               std::size_t caption_length, CurveMeasure measure) {
  InfluenceCurve curve;
  curve.caption_length = caption_length;
  curve.measure = curve_measure_name(measure);
  curve.values.assign(caption_length + 1, 0.0);

  const bool is_omission = measure == CurveMeasure::OmissionMultimodalCosine ||
                           measure == CurveMeasure::OmissionLogitsCosine ||
                           measure == CurveMeasure::OmissionSoftmaxCosine ||
                           measure == CurveMeasure::OmissionSoftmaxJsd;
  for (const auto* item : items) {
    const std::vector<double>* foil_feats = nullptr;
    if (is_omission) {
      const FoilPair fp = select_foil(*item, items);
      for (const auto* p : items)
        if (p->id == fp.foil_id) foil_feats = &p->features;
    }
    for (const auto& cap : item->encoded) {
      if (cap.size() != caption_length) continue;
      for (std::size_t t = 1; t <= caption_length + 1; ++t) {
        double v = 0.0;
        switch (measure) {
          case CurveMeasure::SensitivityImage:
            v = sensitivity(model, item->features, cap, t, SensitivityTarget::Image);
            break;
          case CurveMeasure::SensitivityPostImage:
            v = sensitivity(model, item->features, cap, t, SensitivityTarget::PostImage);
            break;
          case CurveMeasure::SensitivityPrevToken:
            v = sensitivity(model, item->features, cap, t, SensitivityTarget::PrevTokenEmbedding);
            break;
          case CurveMeasure::OmissionMultimodalCosine:
            v = omission_score(model, item->features, *foil_feats, cap, t,
                               OmissionLayer::Multimodal, OmissionMetric::Cosine);
            break;
          case CurveMeasure::OmissionLogitsCosine:
            v = omission_score(model, item->features, *foil_feats, cap, t,
                               OmissionLayer::Logits, OmissionMetric::Cosine);
            break;
          case CurveMeasure::OmissionSoftmaxCosine:
            v = omission_score(model, item->features, *foil_feats, cap, t,
                               OmissionLayer::Softmax, OmissionMetric::Cosine);
            break;
          case CurveMeasure::OmissionSoftmaxJsd:
            v = omission_score(model, item->features, *foil_feats, cap, t,
                               OmissionLayer::Softmax, OmissionMetric::Jsd);
            break;
        }
        curve.values[t - 1] += v;
      }
      ++curve.count;
    }
  }
  if (curve.count == 0)
    throw std::invalid_argument("influence_curve: no captions of length " +
                                std::to_string(caption_length));
  for (double& v : curve.values) v /= static_cast<double>(curve.count);
  return curve;
}

std::pair<double, double> logit_stats(const CaptionModel& model, const std::vector<double>& image,
                                      const std::vector<int>& prefix, std::size_t t) {
  const bool has_image = model.config.kind != ArchKind::TextOnlyLM;
  ForwardTrace trace = trace_for(model, has_image ? &image : nullptr, prefix, t);
  const auto& logits = trace.steps[t - 1].logits.values();
  const auto [mn, mx] = std::minmax_element(logits.begin(), logits.end());
  return {*mn, *mx};
}

}  // namespace caplab
