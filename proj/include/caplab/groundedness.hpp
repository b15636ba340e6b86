#ifndef CAPLAB_GROUNDEDNESS_HPP
#define CAPLAB_GROUNDEDNESS_HPP

#include <string>
#include <vector>

#include "caplab/data.hpp"
#include "caplab/model.hpp"

namespace caplab {

enum class SensitivityTarget { Image, PostImage, PrevTokenEmbedding };
enum class OmissionLayer { Multimodal, Logits, Softmax };
enum class OmissionMetric { Cosine, Jsd };

// Mean absolute partial derivative of the max softmax element at step t
// (1-based; t == len(prefix)+1 probes the end-token prediction) with
// respect to the chosen input vector. Inference mode, no dropout.
double sensitivity(const CaptionModel& model, const std::vector<double>& image,
                   const std::vector<int>& prefix, std::size_t t, SensitivityTarget wrt);

double cosine_distance(const std::vector<double>& u, const std::vector<double>& v);

// Jensen-Shannon divergence, natural log; inputs must each sum to 1.
double jsd(const std::vector<double>& p, const std::vector<double>& q);

struct FoilPair {
  std::string correct_id;
  std::string foil_id;
  double feature_distance = 0.0;
  bool fallback = false;  // no zero-content-word-overlap candidate existed
};

// Foil = pool item sharing no content words with the item's captions
// (stopword-filtered), at maximal feature cosine distance. Falls back to
// the most distant pool item when no candidate qualifies.
FoilPair select_foil(const CaptionedItem& item, const std::vector<const CaptionedItem*>& pool);

bool is_stopword(const std::string& word);

double omission_score(const CaptionModel& model, const std::vector<double>& image,
                      const std::vector<double>& foil, const std::vector<int>& prefix,
                      std::size_t t, OmissionLayer layer, OmissionMetric metric);

struct InfluenceCurve {
  std::size_t caption_length = 0;
  std::vector<double> values;  // positions 1..L+1, last = end token
  std::size_t count = 0;       // contributing captions
  std::string measure;
};

enum class CurveMeasure {
  SensitivityImage,
  SensitivityPostImage,
  SensitivityPrevToken,
  OmissionMultimodalCosine,
  OmissionLogitsCosine,
  OmissionSoftmaxCosine,
  OmissionSoftmaxJsd,
};

std::string curve_measure_name(CurveMeasure m);

// Mean per-position value over all captions of exactly L words; omission
// measures pick each item's foil from the supplied pool.
InfluenceCurve influence_curve(const CaptionModel& model,
                               const std::vector<const CaptionedItem*>& items,
                               std::size_t caption_length, CurveMeasure measure);

std::pair<double, double> logit_stats(const CaptionModel& model, const std::vector<double>& image,
                                      const std::vector<int>& prefix, std::size_t t);

}  // namespace caplab

#endif
