#ifndef CAPLAB_DATA_HPP
#define CAPLAB_DATA_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "caplab/tensor.hpp"

namespace caplab {

struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kStart = 1;
  static constexpr int kEnd = 2;
  static constexpr int kUnknown = 3;

  std::vector<std::string> words;          // index -> word, reserved first
  std::map<std::string, int> index;        // word -> index (non-reserved)
  std::map<std::string, std::int64_t> counts;  // training-set frequency

  std::size_t size() const { return words.size(); }
  std::size_t content_size() const { return words.size() - 4; }
  bool contains(const std::string& w) const { return index.count(w) > 0; }
  int lookup(const std::string& w) const;  // unknown index if absent
  const std::string& word(int ix) const { return words.at(static_cast<std::size_t>(ix)); }
  std::uint64_t hash() const;  // FNV-1a over the word list
};

struct CaptionedItem {
  std::string id;
  std::string split;  // train | val | test
  std::vector<double> features;
  std::vector<std::vector<std::string>> captions;         // tokenised words
  std::vector<std::vector<int>> encoded;                  // per encode(vocab)
};

struct Batch {
  std::vector<std::vector<int>> inputs;   // [B x (L+1)] start ++ tokens ++ pads
  std::vector<std::vector<int>> targets;  // [B x (L+1)] tokens ++ end ++ pads
  std::vector<std::vector<double>> mask;  // 1 where targets is a real token or end
  std::vector<const std::vector<double>*> features;  // [B] borrowed feature rows
};

// lowercase -> digit runs to "NUM" -> strip other non-alphanumeric
// non-space characters -> split on whitespace
std::vector<std::string> preprocess(const std::string& raw);

// Non-reserved words ordered by (-count, word) for deterministic indices.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::int64_t min_freq = 5);

std::vector<int> encode(const std::vector<std::string>& caption, const Vocabulary& vocab);
std::vector<std::string> decode(const std::vector<int>& tokens, const Vocabulary& vocab);

// One row per (image, caption) pair; shuffled, padded per batch.
struct TrainRow {
  const std::vector<double>* features;
  const std::vector<int>* tokens;
};
std::vector<Batch> make_batches(const std::vector<TrainRow>& rows,
                                std::size_t batch_size, Rng& rng);
std::vector<TrainRow> expand_rows(const std::vector<CaptionedItem>& items);

struct Dataset {
  std::size_t feat_dim = 0;
  std::vector<CaptionedItem> items;

  std::vector<const CaptionedItem*> split(const std::string& name) const;
};

// Captions file: JSON lines {"id", "split", "captions": [str,...]}.
// Features file: magic "CAPF", u32 feat_dim, then per record
// u32 id-length, id bytes, feat_dim float32 little-endian.
Dataset load_dataset(const std::string& captions_path, const std::string& features_path);
void write_captions_jsonl(const std::string& path, const std::vector<CaptionedItem>& items);
void write_features_capf(const std::string& path, std::size_t feat_dim,
                         const std::vector<CaptionedItem>& items);

// K items with one-hot feature vectors and deterministic template captions.
std::vector<CaptionedItem> synth_dataset(std::size_t k);

void encode_dataset(Dataset& ds, const Vocabulary& vocab);

}  // namespace caplab

#endif
