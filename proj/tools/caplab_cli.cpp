// caplab command-line interface.
//
// Every subcommand reads an optional JSON config file (--config); flags given
// on the command line override config values. All outputs embed a fingerprint
// of the resolved configuration so artifacts can be traced to their run.
// Exit codes: 0 success, 1 runtime failure, 2 config/validation error.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "caplab/checkpoint.hpp"
#include "caplab/data.hpp"
#include "caplab/decoder.hpp"
#include "caplab/groundedness.hpp"
#include "caplab/metrics.hpp"
#include "caplab/model.hpp"
#include "caplab/trainer.hpp"
#include "caplab/transfer.hpp"
#include "caplab/tuner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace caplab;

namespace {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + ": no path given");
  if (!fs::exists(path)) throw ConfigError(what + ": file not found: " + path);
}

json load_json_file(const std::string& path, const std::string& what) {
  require_file(path, what);
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(what + ": invalid JSON in " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (const fs::path dir = fs::path(path).parent_path(); !dir.empty())
    fs::create_directories(dir);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
}

std::string fingerprint(const json& resolved) {
  const std::string s = resolved.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << h;
  return os.str();
}

// Config-file fallback for options not given on the command line.
struct ConfigBinder {
  std::string config_path;
  std::vector<std::function<void(const json&)>> appliers;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file; flags override its values");
  }
  template <typename T>
  void bind(CLI::Option* opt, T& target, const std::string& key) {
    appliers.push_back([opt, &target, key](const json& cfg) {
      if (opt->count() == 0 && cfg.contains(key)) target = cfg.at(key).get<T>();
    });
  }
  // Applies config values, returns the resolved config used for fingerprints.
  json resolve() const {
    json cfg = json::object();
    if (!config_path.empty()) cfg = load_json_file(config_path, "config");
    for (const auto& f : appliers) f(cfg);
    return cfg;
  }
};

struct HyperparamSource {
  std::string path;       // --hyperparams flag
  json inline_obj;        // "hyperparams" object in the config file

  HyperparamSpec resolve() const {
    if (!path.empty()) {
      require_file(path, "hyperparams");
      std::ifstream in(path);
      std::stringstream ss;
      ss << in.rdbuf();
      return hyperparams_from_json(ss.str());
    }
    if (!inline_obj.is_null()) return hyperparams_from_json(inline_obj.dump());
    return HyperparamSpec{};
  }
};

Dataset load_and_encode(const std::string& captions, const std::string& features,
                        const Vocabulary& vocab) {
  require_file(captions, "captions");
  require_file(features, "features");
  Dataset ds = load_dataset(captions, features);
  encode_dataset(ds, vocab);
  return ds;
}

std::vector<std::vector<std::string>> split_corpus(const Dataset& ds, const std::string& split) {
  std::vector<std::vector<std::string>> corpus;
  for (const CaptionedItem* it : ds.split(split))
    for (const auto& c : it->captions) corpus.push_back(c);
  return corpus;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

CellKind cell_from_name(const std::string& s) {
  if (s == "gru") return CellKind::Gru;
  if (s == "lstm") return CellKind::Lstm;
  throw ConfigError("unknown RNN cell: " + s + " (expected gru or lstm)");
}

json history_to_json(const std::vector<EpochStats>& history, const std::string& fp) {
  // wall_seconds is deliberately excluded: history files must be
  // byte-identical across reruns with the same seed.
  json epochs = json::array();
  for (std::size_t e = 0; e < history.size(); ++e)
    epochs.push_back({{"epoch", e + 1},
                      {"loss", history[e].loss},
                      {"val_geomean_pplx", history[e].val_geomean_pplx}});
  return json{{"fingerprint", fp}, {"epochs", epochs}};
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  ConfigBinder cfg;
  std::string captions, features, arch = "merge", cell = "gru", lstm_inject = "cell";
  std::string out_dir = ".", init_checkpoint;
  HyperparamSource hp;
  std::int64_t seed = -1;
  std::size_t max_epochs = 100;
  std::int64_t min_freq = 5;
  bool no_early_stopping = false;
  bool freeze_prefix = false;
};

int run_train(TrainArgs& a) {
  const json resolved = a.cfg.resolve();
  if (resolved.contains("hyperparams") && resolved.at("hyperparams").is_object() &&
      a.hp.path.empty())
    a.hp.inline_obj = resolved.at("hyperparams");
  else if (resolved.contains("hyperparams") && resolved.at("hyperparams").is_string() &&
           a.hp.path.empty())
    a.hp.path = resolved.at("hyperparams").get<std::string>();
  if (a.seed < 0) throw ConfigError("train: --seed is mandatory");

  const ArchKind kind = arch_from_name(a.arch);
  const HyperparamSpec spec = a.hp.resolve();
  spec.validate(kind);

  require_file(a.captions, "captions");
  require_file(a.features, "features");
  Dataset ds = load_dataset(a.captions, a.features);

  json fp_src = resolved;
  fp_src["command"] = "train";
  fp_src["arch"] = a.arch;
  fp_src["cell"] = a.cell;
  fp_src["seed"] = a.seed;
  fp_src["max_epochs"] = a.max_epochs;
  fp_src["min_freq"] = a.min_freq;
  fp_src["early_stopping"] = !a.no_early_stopping;
  fp_src["hyperparams"] = json::parse(hyperparams_to_json(spec));
  const std::string fp = fingerprint(fp_src);

  Vocabulary vocab;
  CaptionModel model;
  std::map<std::string, std::string> flags{{"fingerprint", fp}, {"arch", a.arch}};
  TrainOptions opt;
  opt.max_epochs = a.max_epochs;
  opt.early_stopping = !a.no_early_stopping;
  opt.seed = static_cast<std::uint64_t>(a.seed);

  if (!a.init_checkpoint.empty()) {
    Checkpoint ck = load_checkpoint(a.init_checkpoint);
    model = std::move(ck.model);
    vocab = std::move(ck.vocab);
    const auto mode = ck.flags.find("transfer_mode");
    if (a.freeze_prefix || (mode != ck.flags.end() && mode->second == "frozen")) {
      opt.freeze = prefix_encoding_names(model);
      flags["transfer_mode"] = "frozen";
    } else if (mode != ck.flags.end()) {
      flags["transfer_mode"] = mode->second;
    }
  } else {
    vocab = build_vocab(split_corpus(ds, "train"), a.min_freq);
    ModelConfig mc = spec.model_config(kind, vocab.size(), ds.feat_dim);
    mc.cell = cell_from_name(a.cell);
    mc.lstm_inject = a.lstm_inject == "hidden" ? LstmInjectTarget::Hidden
                                               : LstmInjectTarget::Cell;
    Rng rng(static_cast<std::uint64_t>(a.seed));
    model = build_model(mc, spec.init_method, spec.max_init_weight, rng);
  }
  encode_dataset(ds, vocab);

  const auto train_items = ds.split("train");
  auto val_items = ds.split("val");
  if (train_items.empty()) throw ConfigError("train: dataset has no train split");
  if (val_items.empty()) val_items = train_items;  // tiny synthetic runs

  const std::vector<EpochStats> history = train(model, train_items, val_items, spec, opt);

  fs::create_directories(a.out_dir);
  save_checkpoint((fs::path(a.out_dir) / "model.capp").string(), model, vocab, flags);
  write_text((fs::path(a.out_dir) / "history.json").string(),
             history_to_json(history, fp).dump(2) + "\n");
  double total_wall = 0.0;
  for (const auto& e : history) total_wall += e.wall_seconds;
  std::cerr << "trained " << history.size() << " epoch(s) in " << total_wall
            << "s; final loss "
            << (history.empty() ? 0.0 : history.back().loss) << "\n";
  return 0;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  ConfigBinder cfg;
  std::string checkpoint, captions, features, split = "test", out = "captions_out.json";
  std::size_t beam_width = 3, min_len = 5, max_len = 20;
};

int run_generate(GenerateArgs& a) {
  const json resolved = a.cfg.resolve();
  require_file(a.checkpoint, "checkpoint");
  Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset ds = load_and_encode(a.captions, a.features, ck.vocab);

  json fp_src = resolved;
  fp_src["command"] = "generate";
  fp_src["split"] = a.split;
  fp_src["beam_width"] = a.beam_width;
  const std::string fp = fingerprint(fp_src);

  json items = json::array();
  for (const CaptionedItem* it : ds.split(a.split)) {
    const std::vector<double>* feats =
        ck.model.config.kind == ArchKind::TextOnlyLM ? nullptr : &it->features;
    const Hypothesis hyp = beam_search(ck.model, feats, a.beam_width, a.min_len, a.max_len);
    items.push_back({{"id", it->id},
                     {"caption", join_words(decode(hyp.tokens, ck.vocab))},
                     {"logprob", hyp.logprob}});
  }
  write_text(a.out, json{{"fingerprint", fp}, {"items", items}}.dump(2) + "\n");
  std::cerr << "generated " << items.size() << " caption(s) -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  ConfigBinder cfg;
  std::string checkpoint, captions, features, split = "test", out_dir = ".";
  std::size_t beam_width = 3, min_len = 5, max_len = 20;
};

int run_evaluate(EvaluateArgs& a) {
  const json resolved = a.cfg.resolve();
  require_file(a.checkpoint, "checkpoint");
  Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset ds = load_and_encode(a.captions, a.features, ck.vocab);
  const auto items = ds.split(a.split);
  if (items.empty()) throw ConfigError("evaluate: split '" + a.split + "' is empty");

  json fp_src = resolved;
  fp_src["command"] = "evaluate";
  fp_src["split"] = a.split;
  fp_src["beam_width"] = a.beam_width;
  const std::string fp = fingerprint(fp_src);

  MetricsReport report;
  std::vector<Sentence> candidates;
  std::vector<std::vector<Sentence>> references;
  std::vector<RetrievalItem> retrieval_items;
  std::vector<double> probs, pplxs;
  for (const CaptionedItem* it : items) {
    const std::vector<double>* feats =
        ck.model.config.kind == ArchKind::TextOnlyLM ? nullptr : &it->features;
    const Hypothesis hyp = beam_search(ck.model, feats, a.beam_width, a.min_len, a.max_len);
    candidates.push_back(decode(hyp.tokens, ck.vocab));
    references.push_back(it->captions);
    for (const auto& enc : it->encoded) {
      const CaptionScore s = caption_logprob(ck.model, feats, enc);
      probs.push_back(std::exp(s.logprob));
      pplxs.push_back(s.perplexity);
    }
    if (!it->encoded.empty())
      retrieval_items.push_back({it->id, &it->features, it->encoded.front()});
  }

  const auto agg = [](std::vector<double> v, double& mean, double& median, double& geomean) {
    std::sort(v.begin(), v.end());
    double s = 0.0, ls = 0.0;
    for (double x : v) {
      s += x;
      ls += std::log(x);
    }
    const std::size_t n = v.size();
    mean = s / static_cast<double>(n);
    median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    geomean = std::exp(ls / static_cast<double>(n));
  };
  agg(probs, report.mean_prob, report.median_prob, report.geomean_prob);
  agg(pplxs, report.mean_pplx, report.median_pplx, report.geomean_pplx);
  report.bleu1 = bleu_n(candidates, references, 1);
  report.bleu2 = bleu_n(candidates, references, 2);
  report.bleu3 = bleu_n(candidates, references, 3);
  report.bleu4 = bleu_n(candidates, references, 4);
  report.rouge_l = rouge_l(candidates, references);
  report.cider = cider(candidates, references);
  report.diversity = diversity(candidates, ck.vocab, split_corpus(ds, "train"));
  if (ck.model.config.kind != ArchKind::TextOnlyLM)
    report.retrieval = retrieval(ck.model, retrieval_items);

  json out = json::parse(report.to_json());
  out["fingerprint"] = fp;
  fs::create_directories(a.out_dir);
  write_text((fs::path(a.out_dir) / "metrics.json").string(), out.dump(2) + "\n");
  write_text((fs::path(a.out_dir) / "metrics.csv").string(),
             MetricsReport::csv_header() + "\n" + report.csv_row() + "\n");
  std::cerr << "evaluated " << items.size() << " item(s); BLEU-4 " << report.bleu4
            << ", geomean pplx " << report.geomean_pplx << "\n";
  return 0;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  ConfigBinder cfg;
  std::string checkpoint, captions, features, split = "test", out_dir = ".";
  std::string measure = "omission-softmax-jsd";
  std::size_t length = 6;
};

CurveMeasure measure_from_name(const std::string& s) {
  for (const CurveMeasure m :
       {CurveMeasure::SensitivityImage, CurveMeasure::SensitivityPostImage,
        CurveMeasure::SensitivityPrevToken, CurveMeasure::OmissionMultimodalCosine,
        CurveMeasure::OmissionLogitsCosine, CurveMeasure::OmissionSoftmaxCosine,
        CurveMeasure::OmissionSoftmaxJsd})
    if (curve_measure_name(m) == s) return m;
  throw ConfigError("unknown analysis measure: " + s);
}

int run_analyze(AnalyzeArgs& a) {
  const json resolved = a.cfg.resolve();
  require_file(a.checkpoint, "checkpoint");
  Checkpoint ck = load_checkpoint(a.checkpoint);
  const Dataset ds = load_and_encode(a.captions, a.features, ck.vocab);
  const auto items = ds.split(a.split);
  const CurveMeasure measure = measure_from_name(a.measure);

  json fp_src = resolved;
  fp_src["command"] = "analyze";
  fp_src["split"] = a.split;
  fp_src["measure"] = a.measure;
  fp_src["length"] = a.length;
  const std::string fp = fingerprint(fp_src);

  bool have_length = false;
  for (const CaptionedItem* it : items)
    for (const auto& cap : it->encoded)
      if (cap.size() == a.length) have_length = true;
  if (!have_length)
    throw ConfigError("analyze: split '" + a.split + "' has no captions of length " +
                      std::to_string(a.length));
  const InfluenceCurve curve = influence_curve(ck.model, items, a.length, measure);

  std::ostringstream csv;
  csv << "position,mean_value,n\n";
  csv.precision(17);
  for (std::size_t i = 0; i < curve.values.size(); ++i)
    csv << (i + 1) << ',' << curve.values[i] << ',' << curve.count << '\n';

  const std::string stem = "curve_" + a.measure + "_L" + std::to_string(a.length);
  fs::create_directories(a.out_dir);
  write_text((fs::path(a.out_dir) / (stem + ".csv")).string(), csv.str());
  write_text((fs::path(a.out_dir) / (stem + ".json")).string(),
             json{{"fingerprint", fp},
                  {"measure", curve.measure},
                  {"caption_length", curve.caption_length},
                  {"count", curve.count},
                  {"values", curve.values}}
                     .dump(2) +
                 "\n");
  std::cerr << "curve over " << curve.count << " caption(s) -> " << stem << ".csv\n";
  return 0;
}

// ---------------------------------------------------------------- transfer

struct TransferArgs {
  ConfigBinder cfg;
  std::string lm_checkpoint, captions, features, mode = "frozen", out = "transferred.capp";
  HyperparamSource hp;
  std::int64_t seed = 0;
  std::int64_t min_freq = 5;
};

int run_transfer(TransferArgs& a) {
  const json resolved = a.cfg.resolve();
  if (resolved.contains("hyperparams") && a.hp.path.empty())
    a.hp.inline_obj = resolved.at("hyperparams");
  if (a.mode != "frozen" && a.mode != "finetuned")
    throw ConfigError("transfer: mode must be frozen or finetuned, got " + a.mode);
  require_file(a.lm_checkpoint, "lm checkpoint");
  Checkpoint lm = load_checkpoint(a.lm_checkpoint);

  require_file(a.captions, "captions");
  require_file(a.features, "features");
  const Dataset ds = load_dataset(a.captions, a.features);
  const Vocabulary caption_vocab = build_vocab(split_corpus(ds, "train"), a.min_freq);
  const Vocabulary target_vocab = intersect_vocab(lm.vocab, caption_vocab);

  const HyperparamSpec spec = a.hp.resolve();
  Rng rng(static_cast<std::uint64_t>(a.seed));
  const CaptionModel model =
      transfer(lm.model, lm.vocab, target_vocab, spec, ds.feat_dim, rng);

  json fp_src = resolved;
  fp_src["command"] = "transfer";
  fp_src["mode"] = a.mode;
  fp_src["seed"] = a.seed;
  const std::string fp = fingerprint(fp_src);
  save_checkpoint(a.out, model, target_vocab,
                  {{"fingerprint", fp}, {"transfer_mode", a.mode}, {"arch", "merge"}});
  std::cerr << "transferred LM (" << lm.vocab.size() << " words) into merge model ("
            << target_vocab.size() << " words) -> " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- tune

struct TuneArgs {
  ConfigBinder cfg;
  std::string captions, features, arch = "merge", out_dir = ".";
  std::size_t budget = 10, repeats = 1, epochs = 3;
  std::int64_t seed = -1;
  std::int64_t min_freq = 5;
};

int run_tune(TuneArgs& a) {
  const json resolved = a.cfg.resolve();
  if (a.seed < 0) throw ConfigError("tune: --seed is mandatory");
  const ArchKind kind = arch_from_name(a.arch);
  require_file(a.captions, "captions");
  require_file(a.features, "features");
  Dataset ds = load_dataset(a.captions, a.features);
  const Vocabulary vocab = build_vocab(split_corpus(ds, "train"), a.min_freq);
  encode_dataset(ds, vocab);
  const auto train_items = ds.split("train");
  auto val_items = ds.split("val");
  if (train_items.empty()) throw ConfigError("tune: dataset has no train split");
  if (val_items.empty()) val_items = train_items;

  json fp_src = resolved;
  fp_src["command"] = "tune";
  fp_src["arch"] = a.arch;
  fp_src["budget"] = a.budget;
  fp_src["repeats"] = a.repeats;
  fp_src["epochs"] = a.epochs;
  fp_src["seed"] = a.seed;
  const std::string fp = fingerprint(fp_src);

  const EvalFn eval = [&](const HyperparamSpec& spec, std::uint64_t seed) {
    ModelConfig mc = spec.model_config(kind, vocab.size(), ds.feat_dim);
    Rng rng(seed);
    CaptionModel model = build_model(mc, spec.init_method, spec.max_init_weight, rng);
    TrainOptions opt;
    opt.max_epochs = a.epochs;
    opt.early_stopping = false;
    opt.seed = seed;
    const auto history = train(model, train_items, val_items, spec, opt);
    return -history.back().val_geomean_pplx;  // higher is better
  };
  Rng rng(static_cast<std::uint64_t>(a.seed));
  const std::vector<SearchResult> results = random_search(kind, a.budget, eval, a.repeats, rng);

  std::ostringstream csv;
  csv.precision(17);
  csv << "rank,init_method,max_init_weight,embed_size,rnn_size,post_image_size,"
         "post_image_act,optimizer,learning_rate,normalize_image,weight_decay,"
         "image_dropout,post_image_dropout,embed_dropout,rnn_dropout,max_grad_norm,"
         "minibatch_size,beam_width,repeat_scores,mean_score,failed\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const SearchResult& r = results[i];
    const json h = json::parse(hyperparams_to_json(r.spec));
    csv << (i + 1) << ',' << h.at("init_method").get<std::string>() << ','
        << r.spec.max_init_weight << ',' << r.spec.embed_size << ',' << r.spec.rnn_size
        << ',' << r.spec.post_image_size << ','
        << h.at("post_image_act").get<std::string>() << ','
        << h.at("optimizer").get<std::string>() << ',' << r.spec.learning_rate << ','
        << (r.spec.normalize_image ? 1 : 0) << ',' << r.spec.weight_decay << ','
        << r.spec.image_dropout << ',' << r.spec.post_image_dropout << ','
        << r.spec.embed_dropout << ',' << r.spec.rnn_dropout << ','
        << r.spec.max_grad_norm << ',' << r.spec.minibatch_size << ','
        << r.spec.beam_width << ',';
    for (std::size_t k = 0; k < r.repeat_scores.size(); ++k)
      csv << (k ? ";" : "") << r.repeat_scores[k];
    csv << ',' << r.mean_score << ',' << (r.failed ? 1 : 0) << '\n';
  }
  fs::create_directories(a.out_dir);
  write_text((fs::path(a.out_dir) / "search.csv").string(), csv.str());
  json best = json::parse(hyperparams_to_json(results.front().spec));
  best["fingerprint"] = fp;
  write_text((fs::path(a.out_dir) / "best.json").string(), best.dump(2) + "\n");
  std::cerr << "searched " << results.size() << " spec(s); best mean score "
            << results.front().mean_score << "\n";
  return 0;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  ConfigBinder cfg;
  std::size_t k = 16;
  std::string out_dir = ".";
};

int run_synth(SynthArgs& a) {
  const json resolved = a.cfg.resolve();
  const std::vector<CaptionedItem> items = synth_dataset(a.k);
  json fp_src = resolved;
  fp_src["command"] = "synth";
  fp_src["k"] = a.k;
  const std::string fp = fingerprint(fp_src);

  fs::create_directories(a.out_dir);
  write_captions_jsonl((fs::path(a.out_dir) / "captions.jsonl").string(), items);
  write_features_capf((fs::path(a.out_dir) / "features.capf").string(), a.k, items);
  write_text((fs::path(a.out_dir) / "synth_meta.json").string(),
             json{{"fingerprint", fp}, {"k", a.k}, {"feat_dim", a.k}}.dump(2) + "\n");
  std::cerr << "wrote " << items.size() << " synthetic item(s) to " << a.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* cap = std::getenv("CAPLAB_MAX_THREADS")) {
    const int n = std::atoi(cap);
    if (n > 0) omp_set_num_threads(n);
  }

  CLI::App app{"caplab: a laboratory for image-conditioned neural language models"};
  app.require_subcommand(1);
  int rc = 0;
  const auto run = [&rc](std::function<int()> f) { return [&rc, f] { rc = f(); }; };

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a caption model");
  tr.cfg.attach(train_cmd);
  tr.cfg.bind(train_cmd->add_option("--captions", tr.captions), tr.captions, "captions");
  tr.cfg.bind(train_cmd->add_option("--features", tr.features), tr.features, "features");
  tr.cfg.bind(train_cmd->add_option("--arch", tr.arch,
                                    "init-inject|pre-inject|par-inject|merge|lm"),
              tr.arch, "arch");
  tr.cfg.bind(train_cmd->add_option("--cell", tr.cell, "gru|lstm"), tr.cell, "cell");
  tr.cfg.bind(train_cmd->add_option("--lstm-inject", tr.lstm_inject, "hidden|cell"),
              tr.lstm_inject, "lstm_inject");
  tr.cfg.bind(train_cmd->add_option("--out-dir", tr.out_dir), tr.out_dir, "out_dir");
  tr.cfg.bind(train_cmd->add_option("--init-checkpoint", tr.init_checkpoint,
                                    "start from an existing checkpoint"),
              tr.init_checkpoint, "init_checkpoint");
  train_cmd->add_option("--hyperparams", tr.hp.path, "hyperparameter spec JSON file");
  tr.cfg.bind(train_cmd->add_option("--seed", tr.seed), tr.seed, "seed");
  tr.cfg.bind(train_cmd->add_option("--max-epochs", tr.max_epochs), tr.max_epochs,
              "max_epochs");
  tr.cfg.bind(train_cmd->add_option("--min-freq", tr.min_freq, "vocabulary frequency floor"),
              tr.min_freq, "min_freq");
  tr.cfg.bind(train_cmd->add_flag("--no-early-stopping", tr.no_early_stopping),
              tr.no_early_stopping, "no_early_stopping");
  tr.cfg.bind(train_cmd->add_flag("--freeze-prefix", tr.freeze_prefix,
                                  "freeze the prefix-encoding parameters"),
              tr.freeze_prefix, "freeze_prefix");
  train_cmd->callback(run([&tr] { return run_train(tr); }));

  GenerateArgs ge;
  CLI::App* gen_cmd = app.add_subcommand("generate", "Generate captions with beam search");
  ge.cfg.attach(gen_cmd);
  ge.cfg.bind(gen_cmd->add_option("--checkpoint", ge.checkpoint), ge.checkpoint, "checkpoint");
  ge.cfg.bind(gen_cmd->add_option("--captions", ge.captions), ge.captions, "captions");
  ge.cfg.bind(gen_cmd->add_option("--features", ge.features), ge.features, "features");
  ge.cfg.bind(gen_cmd->add_option("--split", ge.split), ge.split, "split");
  ge.cfg.bind(gen_cmd->add_option("--beam-width", ge.beam_width), ge.beam_width, "beam_width");
  ge.cfg.bind(gen_cmd->add_option("--min-len", ge.min_len), ge.min_len, "min_len");
  ge.cfg.bind(gen_cmd->add_option("--max-len", ge.max_len), ge.max_len, "max_len");
  ge.cfg.bind(gen_cmd->add_option("--out", ge.out), ge.out, "out");
  gen_cmd->callback(run([&ge] { return run_generate(ge); }));

  EvaluateArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score a model on a dataset split");
  ev.cfg.attach(eval_cmd);
  ev.cfg.bind(eval_cmd->add_option("--checkpoint", ev.checkpoint), ev.checkpoint, "checkpoint");
  ev.cfg.bind(eval_cmd->add_option("--captions", ev.captions), ev.captions, "captions");
  ev.cfg.bind(eval_cmd->add_option("--features", ev.features), ev.features, "features");
  ev.cfg.bind(eval_cmd->add_option("--split", ev.split), ev.split, "split");
  ev.cfg.bind(eval_cmd->add_option("--beam-width", ev.beam_width), ev.beam_width, "beam_width");
  ev.cfg.bind(eval_cmd->add_option("--min-len", ev.min_len), ev.min_len, "min_len");
  ev.cfg.bind(eval_cmd->add_option("--max-len", ev.max_len), ev.max_len, "max_len");
  ev.cfg.bind(eval_cmd->add_option("--out-dir", ev.out_dir), ev.out_dir, "out_dir");
  eval_cmd->callback(run([&ev] { return run_evaluate(ev); }));

  AnalyzeArgs an;
  CLI::App* ana_cmd = app.add_subcommand("analyze", "Groundedness influence curves");
  an.cfg.attach(ana_cmd);
  an.cfg.bind(ana_cmd->add_option("--checkpoint", an.checkpoint), an.checkpoint, "checkpoint");
  an.cfg.bind(ana_cmd->add_option("--captions", an.captions), an.captions, "captions");
  an.cfg.bind(ana_cmd->add_option("--features", an.features), an.features, "features");
  an.cfg.bind(ana_cmd->add_option("--split", an.split), an.split, "split");
  an.cfg.bind(ana_cmd->add_option("--measure", an.measure,
                                  "sensitivity-image|sensitivity-post-image|"
                                  "sensitivity-prev-token|omission-multimodal-cosine|"
                                  "omission-logits-cosine|omission-softmax-cosine|"
                                  "omission-softmax-jsd"),
              an.measure, "measure");
  an.cfg.bind(ana_cmd->add_option("--length", an.length, "caption length to aggregate"),
              an.length, "length");
  an.cfg.bind(ana_cmd->add_option("--out-dir", an.out_dir), an.out_dir, "out_dir");
  ana_cmd->callback(run([&an] { return run_analyze(an); }));

  TransferArgs tf;
  CLI::App* tf_cmd = app.add_subcommand("transfer", "Transfer an LM into a merge captioner");
  tf.cfg.attach(tf_cmd);
  tf.cfg.bind(tf_cmd->add_option("--lm-checkpoint", tf.lm_checkpoint), tf.lm_checkpoint,
              "lm_checkpoint");
  tf.cfg.bind(tf_cmd->add_option("--captions", tf.captions), tf.captions, "captions");
  tf.cfg.bind(tf_cmd->add_option("--features", tf.features), tf.features, "features");
  tf.cfg.bind(tf_cmd->add_option("--mode", tf.mode, "frozen|finetuned"), tf.mode, "mode");
  tf_cmd->add_option("--hyperparams", tf.hp.path, "hyperparameter spec JSON file");
  tf.cfg.bind(tf_cmd->add_option("--seed", tf.seed), tf.seed, "seed");
  tf.cfg.bind(tf_cmd->add_option("--min-freq", tf.min_freq), tf.min_freq, "min_freq");
  tf.cfg.bind(tf_cmd->add_option("--out", tf.out), tf.out, "out");
  tf_cmd->callback(run([&tf] { return run_transfer(tf); }));

  TuneArgs tu;
  CLI::App* tune_cmd = app.add_subcommand("tune", "Random hyperparameter search");
  tu.cfg.attach(tune_cmd);
  tu.cfg.bind(tune_cmd->add_option("--captions", tu.captions), tu.captions, "captions");
  tu.cfg.bind(tune_cmd->add_option("--features", tu.features), tu.features, "features");
  tu.cfg.bind(tune_cmd->add_option("--arch", tu.arch), tu.arch, "arch");
  tu.cfg.bind(tune_cmd->add_option("--budget", tu.budget), tu.budget, "budget");
  tu.cfg.bind(tune_cmd->add_option("--repeats", tu.repeats), tu.repeats, "repeats");
  tu.cfg.bind(tune_cmd->add_option("--epochs", tu.epochs, "training epochs per evaluation"),
              tu.epochs, "epochs");
  tu.cfg.bind(tune_cmd->add_option("--seed", tu.seed), tu.seed, "seed");
  tu.cfg.bind(tune_cmd->add_option("--min-freq", tu.min_freq), tu.min_freq, "min_freq");
  tu.cfg.bind(tune_cmd->add_option("--out-dir", tu.out_dir), tu.out_dir, "out_dir");
  tune_cmd->callback(run([&tu] { return run_tune(tu); }));

  SynthArgs sy;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write a synthetic one-hot dataset");
  sy.cfg.attach(synth_cmd);
  sy.cfg.bind(synth_cmd->add_option("--k", sy.k, "number of items (and feature dim)"), sy.k,
              "k");
  sy.cfg.bind(synth_cmd->add_option("--out-dir", sy.out_dir), sy.out_dir, "out_dir");
  synth_cmd->callback(run([&sy] { return run_synth(sy); }));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
