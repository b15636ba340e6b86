#include "caplab/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace caplab {

int Vocabulary::lookup(const std::string& w) const {
  auto it = index.find(w);
  return it == index.end() ? kUnknown : it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& w : words) {
    for (char c : w) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> preprocess(const std::string& raw) {
  std::string cleaned;
  cleaned.reserve(raw.size());
  bool in_digits = false;
  for (char ch : raw) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isdigit(c)) {
      if (!in_digits) cleaned += "NUM";
      in_digits = true;
    } else {
      in_digits = false;
      if (std::isalpha(c)) {
        cleaned += static_cast<char>(std::tolower(c));
      } else if (std::isspace(c)) {
        cleaned += ' ';
      }
      // any other character is stripped
    }
  }
  std::vector<std::string> out;
  std::string cur;
  for (char c : cleaned) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                       std::int64_t min_freq) {
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  std::map<std::string, std::int64_t> counts;
  for (const auto& sent : corpus)
    for (const auto& w : sent) ++counts[w];

  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [w, c] : counts)
    if (c >= min_freq) kept.emplace_back(w, c);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.words = {"<pad>", "<start>", "<end>", "<unk>"};
  for (const auto& [w, c] : kept) {
    v.index[w] = static_cast<int>(v.words.size());
    v.words.push_back(w);
    v.counts[w] = c;
  }
  return v;
}

std::vector<int> encode(const std::vector<std::string>& caption, const Vocabulary& vocab) {
  std::vector<int> out;
  out.reserve(caption.size());
  for (const auto& w : caption) out.push_back(vocab.lookup(w));
  return out;
}

std::vector<std::string> decode(const std::vector<int>& tokens, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (int t : tokens) out.push_back(vocab.word(t));
  return out;
}

std::vector<TrainRow> expand_rows(const std::vector<CaptionedItem>& items) {
  std::vector<TrainRow> rows;
  for (const auto& item : items)
    for (const auto& cap : item.encoded) rows.push_back({&item.features, &cap});
  return rows;
}

std::vector<Batch> make_batches(const std::vector<TrainRow>& rows,
                                std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> batches;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - at);
    std::size_t max_len = 0;
    for (std::size_t i = 0; i < n; ++i)
      max_len = std::max(max_len, rows[order[at + i]].tokens->size());
    Batch b;
    for (std::size_t i = 0; i < n; ++i) {
      const TrainRow& row = rows[order[at + i]];
      const auto& toks = *row.tokens;
      std::vector<int> in(max_len + 1, Vocabulary::kPad);
      std::vector<int> tg(max_len + 1, Vocabulary::kPad);
      std::vector<double> mk(max_len + 1, 0.0);
      in[0] = Vocabulary::kStart;
      for (std::size_t t = 0; t < toks.size(); ++t) {
        in[t + 1] = toks[t];
        tg[t] = toks[t];
        mk[t] = 1.0;
      }
      tg[toks.size()] = Vocabulary::kEnd;
      mk[toks.size()] = 1.0;
      b.inputs.push_back(std::move(in));
      b.targets.push_back(std::move(tg));
      b.mask.push_back(std::move(mk));
      b.features.push_back(row.features);
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<const CaptionedItem*> Dataset::split(const std::string& name) const {
  std::vector<const CaptionedItem*> out;
  for (const auto& item : items)
    if (item.split == name) out.push_back(&item);
  return out;
}

Dataset load_dataset(const std::string& captions_path, const std::string& features_path) {
  std::ifstream caps(captions_path);
  if (!caps) throw std::runtime_error("cannot open captions file: " + captions_path);
  Dataset ds;
  std::map<std::string, std::size_t> by_id;
  std::string line;
  while (std::getline(caps, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    CaptionedItem item;
    item.id = j.at("id").get<std::string>();
    item.split = j.at("split").get<std::string>();
    for (const auto& c : j.at("captions")) {
      auto words = preprocess(c.get<std::string>());
      if (!words.empty()) item.captions.push_back(std::move(words));
    }
    if (item.captions.empty())
      throw std::runtime_error("item '" + item.id + "' has no nonempty captions");
    by_id[item.id] = ds.items.size();
    ds.items.push_back(std::move(item));
  }

  std::ifstream feats(features_path, std::ios::binary);
  if (!feats) throw std::runtime_error("cannot open features file: " + features_path);
  char magic[4];
  feats.read(magic, 4);
  if (!feats || std::string(magic, 4) != "CAPF")
    throw std::runtime_error("bad features file magic in " + features_path);
  std::uint32_t feat_dim = 0;
  feats.read(reinterpret_cast<char*>(&feat_dim), 4);
  ds.feat_dim = feat_dim;
  while (true) {
    std::uint32_t id_len = 0;
    feats.read(reinterpret_cast<char*>(&id_len), 4);
    if (!feats) break;
    std::string id(id_len, '\0');
    feats.read(id.data(), id_len);
    std::vector<float> raw(feat_dim);
    feats.read(reinterpret_cast<char*>(raw.data()), feat_dim * sizeof(float));
    if (!feats) throw std::runtime_error("truncated features file: " + features_path);
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw std::runtime_error("features id '" + id + "' not present in captions file");
    auto& dst = ds.items[it->second].features;
    dst.assign(raw.begin(), raw.end());
  }
  for (const auto& item : ds.items)
    if (item.features.empty())
      throw std::runtime_error("no features for item '" + item.id + "'");
  return ds;
}

void write_captions_jsonl(const std::string& path, const std::vector<CaptionedItem>& items) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write captions file: " + path);
  for (const auto& item : items) {
    nlohmann::json j;
    j["id"] = item.id;
    j["split"] = item.split;
    std::vector<std::string> caps;
    for (const auto& c : item.captions) {
      std::string s;
      for (std::size_t i = 0; i < c.size(); ++i) s += (i ? " " : "") + c[i];
      caps.push_back(std::move(s));
    }
    j["captions"] = caps;
    out << j.dump() << "\n";
  }
}

void write_features_capf(const std::string& path, std::size_t feat_dim,
                         const std::vector<CaptionedItem>& items) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write features file: " + path);
  out.write("CAPF", 4);
  const std::uint32_t fd = static_cast<std::uint32_t>(feat_dim);
  out.write(reinterpret_cast<const char*>(&fd), 4);
  for (const auto& item : items) {
    const std::uint32_t id_len = static_cast<std::uint32_t>(item.id.size());
    out.write(reinterpret_cast<const char*>(&id_len), 4);
    out.write(item.id.data(), id_len);
    for (double v : item.features) {
      const float f = static_cast<float>(v);
      out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
  }
}

std::vector<CaptionedItem> synth_dataset(std::size_t k) {
  static const char* kAdjectives[8] = {"red",  "blue",  "green", "small",
                                       "big",  "old",   "tall",  "shiny"};
  static const char* kNouns[8] = {"dog",  "cat",  "bird",  "fish",
                                  "horse", "sheep", "frog", "bear"};
  if (k > 64) throw std::invalid_argument("synth_dataset supports up to 64 items");
  std::vector<CaptionedItem> items;
  for (std::size_t i = 0; i < k; ++i) {
    CaptionedItem item;
    item.id = "synth" + std::to_string(i);
    item.split = "train";
    item.features.assign(k, 0.0);
    item.features[i] = 1.0;
    item.captions.push_back({"the", kAdjectives[i % 8], kNouns[i / 8], "is", "standing", "here"});
    items.push_back(std::move(item));
  }
  return items;
}

void encode_dataset(Dataset& ds, const Vocabulary& vocab) {
  for (auto& item : ds.items) {
    item.encoded.clear();
    for (const auto& cap : item.captions) item.encoded.push_back(encode(cap, vocab));
  }
}

}  // namespace caplab
