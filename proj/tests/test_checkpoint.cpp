#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "caplab/checkpoint.hpp"
#include "caplab/data.hpp"
#include "caplab/model.hpp"

using namespace caplab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "caplab_ckpt_test") { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

Vocabulary toy_vocab() {
  return build_vocab({{"dog", "cat", "dog", "runs", "fast"}}, 1);
}

CaptionModel toy_model(ArchKind kind, const Vocabulary& v, std::uint64_t seed) {
  ModelConfig c;
  c.kind = kind;
  c.cell = CellKind::Gru;
  c.vocab_size = v.size();
  c.feat_dim = kind == ArchKind::TextOnlyLM ? 0 : 6;
  c.embed_size = 5;
  c.state_size = 7;
  c.post_image_size = kind == ArchKind::TextOnlyLM ? 0 : 8;
  if (kind == ArchKind::InitInject) c.post_image_size = c.state_size;
  Rng rng(seed);
  return build_model(c, WeightInit::Xavier, 0.2, rng);
}

}  // namespace

TEST_CASE("checkpoint round trip preserves every parameter bit") {
  TempDir dir;
  const Vocabulary v = toy_vocab();
  for (ArchKind kind : {ArchKind::Merge, ArchKind::InitInject, ArchKind::TextOnlyLM}) {
    const CaptionModel m = toy_model(kind, v, 42);
    const std::string path = (dir.path / (arch_name(kind) + ".capp")).string();
    save_checkpoint(path, m, v, {{"note", "round-trip"}});
    const Checkpoint ck = load_checkpoint(path);

    CHECK(ck.model.config.kind == kind);
    CHECK(ck.model.config.vocab_size == m.config.vocab_size);
    CHECK(ck.model.config.state_size == m.config.state_size);
    CHECK(ck.vocab.words == v.words);
    CHECK(ck.vocab.counts == v.counts);
    CHECK(ck.flags.at("note") == "round-trip");

    const auto orig = m.parameters();
    const auto back = ck.model.parameters();
    REQUIRE(orig.size() == back.size());
    for (std::size_t i = 0; i < orig.size(); ++i) {
      CHECK(orig[i].first == back[i].first);
      CHECK(orig[i].second.values() == back[i].second.values());  // float64, exact
    }
  }
}

TEST_CASE("saving twice yields byte-identical files") {
  TempDir dir;
  const Vocabulary v = toy_vocab();
  const CaptionModel m = toy_model(ArchKind::Merge, v, 7);
  const std::string p1 = (dir.path / "a.capp").string();
  const std::string p2 = (dir.path / "b.capp").string();
  save_checkpoint(p1, m, v, {{"k", "v"}});
  save_checkpoint(p2, m, v, {{"k", "v"}});
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);
  CHECK(b1.substr(0, 4) == "CAPP");
}

TEST_CASE("corrupt files are rejected") {
  TempDir dir;
  const std::string bad = (dir.path / "bad.capp").string();
  {
    std::ofstream out(bad, std::ios::binary);
    out << "NOPE this is not a checkpoint";
  }
  CHECK_THROWS(load_checkpoint(bad));
  CHECK_THROWS(load_checkpoint((dir.path / "absent.capp").string()));

  // truncated: header promises records that never arrive
  const Vocabulary v = toy_vocab();
  const CaptionModel m = toy_model(ArchKind::Merge, v, 9);
  const std::string good = (dir.path / "good.capp").string();
  save_checkpoint(good, m, v);
  std::ifstream in(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const std::string trunc = (dir.path / "trunc.capp").string();
  {
    std::ofstream out(trunc, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS(load_checkpoint(trunc));
}

TEST_CASE("reloaded model computes identical forward passes") {
  TempDir dir;
  const Vocabulary v = toy_vocab();
  const CaptionModel m = toy_model(ArchKind::Merge, v, 3);
  const std::string path = (dir.path / "fwd.capp").string();
  save_checkpoint(path, m, v);
  const Checkpoint ck = load_checkpoint(path);

  const std::vector<double> img{0.1, -0.5, 0.9, 0.2, -0.3, 0.7};
  Rng r1(0), r2(0);
  ForwardTrace a = forward(m, &img, {1, 4, 5}, false, r1);
  ForwardTrace b = forward(ck.model, &img, {1, 4, 5}, false, r2);
  for (std::size_t t = 0; t < a.steps.size(); ++t)
    CHECK(a.steps[t].dist.values() == b.steps[t].dist.values());
}
