#include "caplab/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace caplab {

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  if (!in) throw std::runtime_error("truncated checkpoint file");
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CaptionModel& model,
                     const Vocabulary& vocab,
                     const std::map<std::string, std::string>& flags) {
  const ModelConfig& c = model.config;
  nlohmann::json h;
  h["kind"] = arch_name(c.kind);
  h["cell"] = c.cell == CellKind::Gru ? "gru" : "lstm";
  h["vocab_size"] = c.vocab_size;
  h["feat_dim"] = c.feat_dim;
  h["embed_size"] = c.embed_size;
  h["state_size"] = c.state_size;
  h["post_image_size"] = c.post_image_size;
  h["post_image_act"] = c.post_image_act == Activation::Relu ? "relu" : "identity";
  h["normalize_image"] = c.normalize_image;
  h["image_dropout"] = c.image_dropout;
  h["post_image_dropout"] = c.post_image_dropout;
  h["embed_dropout"] = c.embed_dropout;
  h["rnn_dropout"] = c.rnn_dropout;
  h["lstm_inject"] = c.lstm_inject == LstmInjectTarget::Cell ? "cell" : "hidden";
  h["vocab_hash"] = vocab.hash();
  h["vocab_words"] = std::vector<std::string>(vocab.words.begin() + 4, vocab.words.end());
  nlohmann::json jc = nlohmann::json::object();
  for (const auto& [w, n] : vocab.counts) jc[w] = n;
  h["vocab_counts"] = jc;
  h["flags"] = flags;
  const std::string header = h.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write("CAPP", 4);
  write_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, t] : model.parameters()) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.values().size() * sizeof(double)));
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "CAPP")
    throw std::runtime_error("bad checkpoint magic in " + path);
  const std::uint32_t hlen = read_u32(in);
  std::string header(hlen, '\0');
  in.read(header.data(), hlen);
  if (!in) throw std::runtime_error("truncated checkpoint header in " + path);
  nlohmann::json h = nlohmann::json::parse(header);

  Checkpoint ck;
  ModelConfig c;
  c.kind = arch_from_name(h.at("kind").get<std::string>());
  c.cell = h.at("cell").get<std::string>() == "lstm" ? CellKind::Lstm : CellKind::Gru;
  c.vocab_size = h.at("vocab_size").get<std::size_t>();
  c.feat_dim = h.at("feat_dim").get<std::size_t>();
  c.embed_size = h.at("embed_size").get<std::size_t>();
  c.state_size = h.at("state_size").get<std::size_t>();
  c.post_image_size = h.at("post_image_size").get<std::size_t>();
  c.post_image_act = h.at("post_image_act").get<std::string>() == "relu"
                         ? Activation::Relu : Activation::Identity;
  c.normalize_image = h.at("normalize_image").get<bool>();
  c.image_dropout = h.at("image_dropout").get<double>();
  c.post_image_dropout = h.at("post_image_dropout").get<double>();
  c.embed_dropout = h.at("embed_dropout").get<double>();
  c.rnn_dropout = h.at("rnn_dropout").get<double>();
  c.lstm_inject = h.at("lstm_inject").get<std::string>() == "hidden"
                      ? LstmInjectTarget::Hidden : LstmInjectTarget::Cell;

  ck.vocab.words = {"<pad>", "<start>", "<end>", "<unk>"};
  for (const auto& w : h.at("vocab_words")) {
    ck.vocab.index[w.get<std::string>()] = static_cast<int>(ck.vocab.words.size());
    ck.vocab.words.push_back(w.get<std::string>());
  }
  for (auto it = h.at("vocab_counts").begin(); it != h.at("vocab_counts").end(); ++it)
    ck.vocab.counts[it.key()] = it.value().get<std::int64_t>();
  if (ck.vocab.hash() != h.at("vocab_hash").get<std::uint64_t>())
    throw std::runtime_error("vocabulary hash mismatch in " + path);
  for (auto it = h.at("flags").begin(); it != h.at("flags").end(); ++it)
    ck.flags[it.key()] = it.value().get<std::string>();

  Rng rng(0);
  ck.model = build_model(c, WeightInit::Normal, 1.0, rng);

  std::map<std::string, Tensor> by_name;
  for (auto& [name, t] : ck.model.parameters()) by_name.emplace(name, t);
  while (true) {
    std::uint32_t nlen = 0;
    in.read(reinterpret_cast<char*>(&nlen), 4);
    if (!in) break;
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    const std::uint32_t rank = read_u32(in);
    Shape shape(rank);
    for (auto& d : shape) d = read_u32(in);
    std::vector<double> vals(shape_numel(shape));
    in.read(reinterpret_cast<char*>(vals.data()),
            static_cast<std::streamsize>(vals.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated parameter record '" + name + "' in " + path);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::runtime_error("unexpected parameter '" + name + "' in " + path);
    if (it->second.shape() != shape)
      throw std::runtime_error("parameter '" + name + "' shape mismatch in " + path);
    it->second.values() = std::move(vals);
    by_name.erase(it);
  }
  if (!by_name.empty())
    throw std::runtime_error("checkpoint missing parameter '" + by_name.begin()->first + "' in " + path);
  return ck;
}

}  // namespace caplab
