#include "cnmt/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "cnmt/decoder.hpp"
#include "cnmt/eval.hpp"
#include "cnmt/params.hpp"
#include "cnmt/rng.hpp"
#include "cnmt/synthetic.hpp"
#include "cnmt/topics.hpp"
#include "cnmt/trainer.hpp"

namespace cnmt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const std::vector<std::string>& pipeline_commands() {
  static const std::vector<std::string> commands = {"gen-synthetic",  "train-lda",
                                                    "train-baseline", "train-cache",
                                                    "translate",      "evaluate"};
  return commands;
}

Layout::Layout(const Config& c) : work(c.text("paths.work_dir")) {
  data = work / "data";
  lda = work / "lda";
  eval = work / "eval";
  auto pick = [&](const char* key, const char* fallback) {
    const std::string& v = c.text(key);
    return v.empty() ? data / fallback : fs::path(v);
  };
  train = pick("corpus.train", "train.txt");
  dev = pick("corpus.dev", "dev.txt");
  test = pick("corpus.test", "test.txt");
  test_sites = pick("corpus.test_sites", "test_sites.tsv");
}

namespace {

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void require(const fs::path& p, const std::string& what, const std::string& producer) {
  if (!fs::exists(p))
    throw PipelineError("missing " + what + " '" + p.string() + "'; " + producer);
}

void require_corpus(const fs::path& p, const char* key) {
  require(p, std::string("corpus (") + key + ")",
          std::string("run gen-synthetic or set ") + key);
}

// "dir/file", stable across work directories.
std::string short_name(const fs::path& p) {
  return (p.parent_path().filename() / p.filename()).generic_string();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

// config.ini plus manifest.json in `dir`.
void record_run(const fs::path& dir, const std::string& command, const Config& c,
                const std::map<std::string, std::uint64_t>& seeds,
                const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  write_text(dir / "config.ini", c.render());
  json m;
  m["command"] = command;
  m["seeds"] = json::object();
  for (const auto& [k, v] : seeds) m["seeds"][k] = v;
  m["inputs"] = json::object();
  for (const auto& p : inputs) m["inputs"][short_name(p)] = file_digest(p.string());
  m["outputs"] = json::object();
  for (const auto& p : outputs) m["outputs"][short_name(p)] = file_digest(p.string());
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

std::uint64_t seed_of(const Config& c, const char* key) {
  return static_cast<std::uint64_t>(c.integer(key));
}

// An explicit corpus.stop_words file must exist; otherwise data/stop_words.txt
// is used when present, else the built-in list.
std::optional<fs::path> stop_word_file(const Config& c) {
  const std::string& path = c.text("corpus.stop_words");
  if (!path.empty()) {
    require(path, "stop-word file (corpus.stop_words)", "create it or clear the key");
    return fs::path(path);
  }
  const fs::path fallback = Layout(c).data / "stop_words.txt";
  if (fs::exists(fallback)) return fallback;
  return std::nullopt;
}

StopWordList stop_words(const Config& c) {
  const auto path = stop_word_file(c);
  return path ? StopWordList::load(path->string()) : StopWordList::english_default();
}

std::vector<fs::path> stop_word_inputs(const Config& c) {
  const auto path = stop_word_file(c);
  return path ? std::vector<fs::path>{*path} : std::vector<fs::path>{};
}

ModelConfig model_config(const Config& c, std::size_t source_vocab, std::size_t target_vocab) {
  ModelConfig m;
  m.source_vocab = source_vocab;
  m.target_vocab = target_vocab;
  m.emb = c.size("model.emb");
  m.hidden = c.size("model.hidden");
  m.attention = c.size("model.attention");
  m.readout = c.size("model.readout");
  m.cache_hidden1 = c.size("model.cache_hidden1");
  m.cache_hidden2 = c.size("model.cache_hidden2");
  m.gate_hidden1 = c.size("model.gate_hidden1");
  m.gate_hidden2 = c.size("model.gate_hidden2");
  m.init_scale = c.real("model.init_scale");
  m.scorer_init_scale = c.real("model.scorer_init_scale");
  return m;
}

TrainOptions train_options(const Config& c) {
  TrainOptions o;
  o.batch_size = c.size("corpus.batch_size");
  o.max_len = c.size("corpus.max_len");
  o.dropout = c.real("train.dropout");
  o.clip_norm = c.real("train.clip_norm");
  o.rho = c.real("train.rho");
  o.eps = c.real("train.eps");
  o.seed = seed_of(c, "train.seed");
  o.workers = c.size("train.workers");
  return o;
}

struct TopicFiles {
  TopicModel source, target;
  TopicProjection projection;
  std::vector<fs::path> paths;
};

std::vector<fs::path> topic_paths(const Layout& l) {
  return {l.lda / "source.lda", l.lda / "target.lda", l.lda / "projection.txt"};
}

bool have_topics(const Layout& l) {
  for (const auto& p : topic_paths(l))
    if (!fs::exists(p)) return false;
  return true;
}

TopicFiles load_topics(const Layout& l) {
  TopicFiles t;
  t.paths = topic_paths(l);
  for (const auto& p : t.paths) require(p, "topic artifact", "run train-lda first");
  t.source = load_topic_model(t.paths[0].string());
  t.target = load_topic_model(t.paths[1].string());
  t.projection = load_projection(t.paths[2].string());
  return t;
}

// Topic ids per training document from the fitted source topics, projected.
std::vector<std::vector<int>> training_topic_ids(const TopicFiles& t, const Vocabulary& tv,
                                                 std::size_t capacity, std::size_t documents) {
  if (t.source.doc_topic.size() != documents)
    throw PipelineError("topic models were fitted on " + std::to_string(t.source.doc_topic.size()) +
                        " documents but the training corpus has " + std::to_string(documents) +
                        "; rerun train-lda");
  std::vector<std::vector<int>> ids(documents);
  for (std::size_t d = 0; d < documents; ++d) {
    const int zs = dominant_topic(t.source.doc_distribution(d));
    ids[d] = topic_word_ids(t.target, t.projection.project(zs), tv, capacity);
  }
  return ids;
}

TopicResources topic_resources(const TopicFiles& t, const StopWordList& stop, const Config& c) {
  TopicResources r;
  r.source = &t.source;
  r.target = &t.target;
  r.projection = &t.projection;
  r.stop_words = &stop;
  r.infer_sweeps = c.size("lda.infer_sweeps");
  r.seed = seed_of(c, "decode.seed");
  return r;
}

std::uint64_t document_seed(const Config& c, std::size_t d) {
  return derive_seed(seed_of(c, "decode.seed"), d);
}

// Held-out caches: the topic part as at test time (inferred, projected), the
// dynamic part from the reference translations of preceding sentences.
SentenceCaches heldout_caches(const Corpus& corpus, const EncodedCorpus& data,
                              const TopicFiles& t, const StopWordList& stop,
                              const Vocabulary& tv, const ExclusionMask& mask, const Config& c) {
  const TopicResources r = topic_resources(t, stop, c);
  const std::size_t tcap = c.size("cache.topic_capacity");
  std::vector<std::vector<int>> ids(corpus.documents.size());
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    Tokens text;
    for (const auto& s : corpus.documents[d].sentences)
      text.insert(text.end(), s.source.begin(), s.source.end());
    ids[d] = document_topic_ids(text, r, tv, tcap, document_seed(c, d));
  }
  return training_caches(data, c.size("cache.dynamic_capacity"), tcap, mask, ids);
}

GateSetting model_gate(const ModelBundle& b) {
  const auto it = b.metadata.find("gate");
  return it == b.metadata.end() ? GateSetting::learned() : GateSetting::parse(it->second);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

fs::path model_path(const Layout& l, const std::string& system) {
  const fs::path p = l.model_dir(system) / "model.ckpt";
  require(p, "model checkpoint", system == "baseline" ? "run train-baseline first"
                                                      : "run train-cache with cache.name = " +
                                                            system + " first");
  return p;
}

// ---------------------------------------------------------------- commands

void gen_synthetic(const Config& c, std::ostream& log) {
  const Layout l(c);
  fs::create_directories(l.data);
  const std::uint64_t seed = seed_of(c, "synthetic.seed");
  TranslationCorpusOptions o;
  o.train_documents = c.size("synthetic.train_documents");
  o.dev_documents = c.size("synthetic.dev_documents");
  o.test_documents = c.size("synthetic.test_documents");
  o.topics = c.size("synthetic.topics");
  o.topic_words = c.size("synthetic.topic_words");
  o.common_words = c.size("synthetic.common_words");
  o.rare_words = c.size("synthetic.rare_words");
  o.seed = seed;
  const TranslationCorpus tc = synthetic_translation(o);
  const fs::path train = l.data / "train.txt", dev = l.data / "dev.txt", test = l.data / "test.txt";
  save_corpus(train.string(), tc.train);
  save_corpus(dev.string(), tc.dev);
  save_corpus(test.string(), tc.test);
  const fs::path dev_sites = l.data / "dev_sites.tsv", test_sites = l.data / "test_sites.tsv";
  save_sites(dev_sites.string(), tc.dev_sites);
  save_sites(test_sites.string(), tc.test_sites);

  PlantedTopicOptions p;
  p.documents = c.size("synthetic.planted_documents");
  p.vocab = c.size("synthetic.planted_vocab");
  p.topics = c.size("synthetic.topics");
  p.doc_length = c.size("synthetic.planted_length");
  p.seed = derive_seed(seed, 1);
  const PlantedTopicCorpus planted = planted_topics(p);
  const fs::path planted_path = l.data / "planted.txt", labels = l.data / "planted_topics.tsv";
  save_corpus(planted_path.string(), planted.as_corpus());
  {
    std::ostringstream out;
    out << "doc\ttopic\ttarget_topic\n";
    for (std::size_t d = 0; d < planted.topic.size(); ++d)
      out << d << '\t' << planted.topic[d] << '\t'
          << planted.permutation[static_cast<std::size_t>(planted.topic[d])] << '\n';
    write_text(labels, out.str());
  }
  // Both sides' function words, so topic models see content words only.
  const fs::path stop = l.data / "stop_words.txt";
  {
    std::ostringstream out;
    for (const auto& w : synthetic_stop_words()) out << w << '\n';
    out << "la\nde\n";
    write_text(stop, out.str());
  }
  record_run(l.data, "gen-synthetic", c, {{"synthetic.seed", seed}}, {},
             {train, dev, test, dev_sites, test_sites, planted_path, labels, stop});
  log << "gen-synthetic: " << tc.train.documents.size() << " training, "
      << tc.dev.documents.size() << " held-out, " << tc.test.documents.size()
      << " test documents in " << l.data.string() << '\n';
}

void train_lda(const Config& c, std::ostream& log) {
  const Layout l(c);
  require_corpus(l.train, "corpus.train");
  const Clock clock;
  const Corpus corpus = load_corpus(l.train.string());
  const StopWordList stop = stop_words(c);
  LdaOptions o;
  o.topics = c.size("lda.topics");
  o.alpha = c.real("lda.alpha");
  o.beta = c.real("lda.beta");
  o.sweeps = c.size("lda.sweeps");
  o.restarts = c.size("lda.restarts");
  o.seed = seed_of(c, "lda.seed");
  const TopicModel source = fit_lda(document_tokens(corpus, Side::Source, &stop), o);
  o.seed = derive_seed(o.seed, 1);
  const TopicModel target = fit_lda(document_tokens(corpus, Side::Target, &stop), o);
  // Projection from the fitted dominant topics of each aligned document pair.
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d)
    pairs.push_back({dominant_topic(source.doc_distribution(d)),
                     dominant_topic(target.doc_distribution(d))});
  const TopicProjection projection = estimate_projection(pairs, o.topics, o.topics);

  fs::create_directories(l.lda);
  const auto out = topic_paths(l);
  save_topic_model(out[0].string(), source);
  save_topic_model(out[1].string(), target);
  save_projection(out[2].string(), projection);
  std::vector<fs::path> inputs = {l.train};
  for (const auto& p : stop_word_inputs(c)) inputs.push_back(p);
  record_run(l.lda, "train-lda", c,
             {{"lda.seed", seed_of(c, "lda.seed")}, {"lda.target_seed", o.seed}}, inputs, out);
  for (std::size_t k = 0; k < o.topics; ++k) {
    log << "train-lda: source topic " << k << " -> target topic "
        << projection.project(static_cast<int>(k)) << (projection.empty[k] ? " (fallback)" : "")
        << ':';
    for (const auto& w : top_words(target, static_cast<std::size_t>(projection.project(static_cast<int>(k))), 5))
      log << ' ' << w;
    log << '\n';
  }
  log << "train-lda: done in " << clock.seconds() << " s\n";
}

void log_epoch(std::ostream& log, const char* what, const EpochStats& s, std::size_t total,
               std::ostringstream& tsv) {
  log << what << ": epoch " << s.epoch << "/" << total << " loss/token " << s.loss_per_token
      << " (" << s.sentences << " sentences, " << s.seconds << " s)\n";
  tsv << s.epoch << '\t' << s.loss_per_token << '\t' << s.tokens << '\t' << s.sentences << '\t'
      << s.skipped << '\n';
}

void train_baseline(const Config& c, std::ostream& log) {
  const Layout l(c);
  require_corpus(l.train, "corpus.train");
  const Corpus corpus = load_corpus(l.train.string());
  const std::size_t cap = c.size("corpus.vocab_cap");
  const Vocabulary sv = build_vocab(corpus, Side::Source, cap);
  const Vocabulary tv = build_vocab(corpus, Side::Target, cap);
  const EncodedCorpus data = encode_corpus(corpus, sv, tv);
  ModelBundle bundle{Model(model_config(c, sv.size(), tv.size()), seed_of(c, "train.seed"), false),
                     sv, tv, {}};
  Trainer trainer(bundle.model, train_options(c));
  const std::size_t pretrain = c.size("train.pretrain_epochs");
  const std::size_t total = pretrain + c.size("train.cache_epochs");
  const fs::path dir = l.model_dir("baseline");
  fs::create_directories(dir);
  const fs::path pre = dir / "pretrain.ckpt", final_path = dir / "model.ckpt";
  auto save = [&](const fs::path& p, std::size_t epochs) {
    bundle.metadata["role"] = "baseline";
    bundle.metadata["epochs"] = std::to_string(epochs);
    save_model(p.string(), bundle);
  };
  log << "train-baseline: " << corpus.sentence_count() << " sentences, vocabularies "
      << sv.size() << "/" << tv.size() << ", " << total << " epochs\n";
  std::ostringstream tsv;
  tsv << "epoch\tloss_per_token\ttokens\tsentences\tskipped\n";
  if (pretrain == 0) save(pre, 0);
  for (std::size_t e = 1; e <= total; ++e) {
    log_epoch(log, "train-baseline", trainer.epoch(corpus, data, nullptr), total, tsv);
    if (e == pretrain) save(pre, e);
  }
  save(final_path, total);
  write_text(dir / "log.tsv", tsv.str());
  record_run(dir, "train-baseline", c, {{"train.seed", seed_of(c, "train.seed")}}, {l.train},
             {pre, final_path, dir / "log.tsv"});
}

void train_cache(const Config& c, std::ostream& log) {
  const Layout l(c);
  const fs::path pre = l.model_dir("baseline") / "pretrain.ckpt";
  require(pre, "pretrained baseline checkpoint", "run train-baseline first");
  const TopicFiles topics = load_topics(l);
  require_corpus(l.train, "corpus.train");
  const std::string name = c.text("cache.name");
  if (name.empty() || name == "baseline" || name == "data" || name == "lda" || name == "eval")
    throw ValidationError("cache.name: '" + name + "' is reserved");

  ModelBundle bundle = load_model(pre.string());
  const Corpus corpus = load_corpus(l.train.string());
  const EncodedCorpus data = encode_corpus(corpus, bundle.source_vocab, bundle.target_vocab);
  const std::uint64_t scorer_seed = derive_seed(seed_of(c, "train.seed"), 1);
  bundle.model.add_scorer(scorer_seed);
  const StopWordList stop = stop_words(c);
  const ExclusionMask mask = make_exclusion_mask(stop, bundle.target_vocab);
  const std::size_t tcap = c.size("cache.topic_capacity");
  const SentenceCaches caches =
      training_caches(data, c.size("cache.dynamic_capacity"), tcap, mask,
                      training_topic_ids(topics, bundle.target_vocab, tcap, data.size()));

  TrainOptions o = train_options(c);
  o.gate = GateSetting::parse(c.text("cache.gate"));
  o.seed = derive_seed(o.seed, 2);
  Trainer trainer(bundle.model, o);
  const std::size_t epochs = c.size("train.cache_epochs");
  log << "train-cache: " << name << " with gate " << o.gate.str() << ", " << epochs
      << " epochs from " << pre.string() << '\n';
  std::ostringstream tsv;
  tsv << "epoch\tloss_per_token\ttokens\tsentences\tskipped\n";
  for (std::size_t e = 0; e < epochs; ++e)
    log_epoch(log, "train-cache", trainer.epoch(corpus, data, &caches), epochs, tsv);

  const fs::path dir = l.model_dir(name);
  fs::create_directories(dir);
  bundle.metadata["role"] = "cache";
  bundle.metadata["gate"] = o.gate.str();
  bundle.metadata["epochs"] = std::to_string(epochs);
  save_model((dir / "model.ckpt").string(), bundle);
  write_text(dir / "log.tsv", tsv.str());
  std::vector<fs::path> inputs = {pre, l.train};
  inputs.insert(inputs.end(), topics.paths.begin(), topics.paths.end());
  for (const auto& p : stop_word_inputs(c)) inputs.push_back(p);
  record_run(dir, "train-cache", c,
             {{"train.seed", seed_of(c, "train.seed")}, {"scorer_init", scorer_seed},
              {"shuffle", o.seed}},
             inputs, {dir / "model.ckpt", dir / "log.tsv"});
}

void translate(const Config& c, std::ostream& log) {
  const Layout l(c);
  const std::string system = c.text("decode.system");
  const fs::path ckpt = model_path(l, system);
  require_corpus(l.test, "corpus.test");
  const Clock clock;
  const ModelBundle bundle = load_model(ckpt.string());
  const Corpus corpus = load_corpus(l.test.string());
  const StopWordList stop = stop_words(c);
  const ExclusionMask mask = make_exclusion_mask(stop, bundle.target_vocab);

  DocumentDecodeSettings settings;
  settings.decode.beam = c.size("decode.beam");
  settings.decode.length_factor = c.size("decode.length_factor");
  settings.decode.length_extra = c.size("decode.length_extra");
  settings.decode.use_cache = c.flag("decode.use_cache") && bundle.model.has_scorer();
  settings.decode.gate = c.text("decode.gate") == "model" ? model_gate(bundle)
                                                          : GateSetting::parse(c.text("decode.gate"));
  settings.dynamic_capacity = c.size("cache.dynamic_capacity");
  settings.topic_capacity = c.size("cache.topic_capacity");

  // Topic caches are recorded for every system so overlap statistics can be
  // compared; only cache decoding requires them.
  std::vector<fs::path> inputs = {ckpt, l.test};
  std::optional<TopicFiles> topics;
  if (settings.decode.use_cache || have_topics(l)) {
    topics = load_topics(l);
    inputs.insert(inputs.end(), topics->paths.begin(), topics->paths.end());
  }
  const std::optional<TopicResources> resources =
      topics ? std::optional<TopicResources>(topic_resources(*topics, stop, c)) : std::nullopt;

  std::vector<DocumentOutput> out(corpus.documents.size());
  parallel_for(out.size(), c.size("decode.workers"), [&](std::size_t d) {
    out[d] = translate_document(bundle.model, bundle.source_vocab, bundle.target_vocab,
                                corpus.documents[d], resources ? &*resources : nullptr, mask,
                                settings, document_seed(c, d));
  });

  const fs::path dir = l.translate_dir(system);
  fs::create_directories(dir);
  const fs::path tr = dir / "translations.txt", diag = dir / "diagnostics.txt";
  {
    std::ostringstream s;
    write_translations(s, out);
    write_text(tr, s.str());
  }
  {
    std::ostringstream s;
    write_diagnostics(s, out, bundle.target_vocab);
    write_text(diag, s.str());
  }
  for (const auto& p : stop_word_inputs(c)) inputs.push_back(p);
  record_run(dir, "translate", c, {{"decode.seed", seed_of(c, "decode.seed")}}, inputs,
             {tr, diag});
  log << "translate: " << system << " (" << (settings.decode.use_cache ? "cache" : "no cache")
      << ", gate " << settings.decode.gate.str() << ") " << corpus.sentence_count()
      << " sentences in " << clock.seconds() << " s\n";
}

std::vector<Tokens> flatten(const std::vector<std::vector<Tokens>>& docs) {
  std::vector<Tokens> out;
  for (const auto& d : docs) out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::vector<std::vector<Tokens>> target_side(const Corpus& corpus) {
  std::vector<std::vector<Tokens>> out;
  for (const auto& d : corpus.documents) {
    out.emplace_back();
    for (const auto& s : d.sentences) out.back().push_back(s.target);
  }
  return out;
}

void evaluate(const Config& c, std::ostream& log) {
  const Layout l(c);
  const std::vector<std::string> systems = split_list(c.text("eval.systems"));
  if (systems.empty()) throw ValidationError("eval.systems: no system named");
  std::vector<fs::path> ckpts;
  for (const auto& s : systems) ckpts.push_back(model_path(l, s));
  require_corpus(l.train, "corpus.train");
  require_corpus(l.dev, "corpus.dev");
  require_corpus(l.test, "corpus.test");
  const Clock clock;
  const Corpus train = load_corpus(l.train.string());
  const Corpus dev = load_corpus(l.dev.string());
  const Corpus test = load_corpus(l.test.string());
  const StopWordList stop = stop_words(c);
  std::vector<fs::path> inputs = ckpts;
  for (const auto& p : {l.train, l.dev, l.test}) inputs.push_back(p);
  for (const auto& p : stop_word_inputs(c)) inputs.push_back(p);

  std::vector<ModelBundle> bundles;
  bool any_cache = false;
  for (const auto& p : ckpts) {
    bundles.push_back(load_model(p.string()));
    any_cache = any_cache || bundles.back().model.has_scorer();
  }
  std::optional<TopicFiles> topics;
  if (any_cache) {
    topics = load_topics(l);
    inputs.insert(inputs.end(), topics->paths.begin(), topics->paths.end());
  }
  std::vector<RecurrenceSite> sites;
  if (fs::exists(l.test_sites)) {
    sites = load_sites(l.test_sites.string());
    inputs.push_back(l.test_sites);
  } else if (!c.text("corpus.test_sites").empty()) {
    require(l.test_sites, "recurrence sites (corpus.test_sites)", "run gen-synthetic");
  }

  // Coherence embeddings from the target side of the training corpus.
  EmbeddingOptions eo;
  eo.dim = c.size("eval.embedding_dim");
  eo.epochs = c.size("eval.embedding_epochs");
  eo.window = c.size("eval.embedding_window");
  eo.negatives = c.size("eval.embedding_negatives");
  eo.seed = seed_of(c, "eval.seed");
  const EmbeddingTable table = train_embeddings(flatten(target_side(train)), eo);
  const auto references = target_side(test);
  std::vector<std::string> test_ids;
  for (const auto& d : test.documents) test_ids.push_back(d.id);
  const CoherenceReport ref_coherence = coherence(references, test_ids, table);

  json summary;
  std::ostringstream report;
  report << "system\tmetric\tvalue\n";
  auto row = [&](const std::string& system, const std::string& metric, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    report << system << '\t' << metric << '\t' << buf << '\n';
  };
  row("reference", "coherence", ref_coherence.mean);
  summary["reference"]["coherence"] = ref_coherence.mean;
  summary["reference"]["coherence_pairs"] = ref_coherence.pairs;
  summary["embeddings"] = "skip-gram with negative sampling on the training target side, dim " +
                          std::to_string(eo.dim);

  std::vector<std::vector<double>> site_probs(systems.size());
  std::ostringstream site_tsv;
  for (std::size_t i = 0; i < systems.size(); ++i) {
    const std::string& name = systems[i];
    const ModelBundle& b = bundles[i];
    const GateSetting gate = model_gate(b);
    const bool cache = b.model.has_scorer();
    const ExclusionMask mask = make_exclusion_mask(stop, b.target_vocab);
    json& js = summary["systems"][name];
    js["cache"] = cache;
    js["gate"] = cache ? gate.str() : "none";

    const EncodedCorpus dev_data = encode_corpus(dev, b.source_vocab, b.target_vocab);
    const SentenceCaches dev_caches =
        cache ? heldout_caches(dev, dev_data, *topics, stop, b.target_vocab, mask, c)
              : SentenceCaches{};
    const NllTotal nll =
        corpus_nll(b.model, dev_data, cache ? &dev_caches : nullptr, gate, c.size("eval.workers"));
    row(name, "dev_nll_per_token", nll.per_token());
    js["dev_nll_per_token"] = nll.per_token();
    js["dev_tokens"] = nll.tokens;

    if (!sites.empty()) {
      const EncodedCorpus test_data = encode_corpus(test, b.source_vocab, b.target_vocab);
      const SentenceCaches test_caches =
          cache ? heldout_caches(test, test_data, *topics, stop, b.target_vocab, mask, c)
                : SentenceCaches{};
      double mean = 0.0;
      for (const auto& s : sites) {
        if (s.doc >= test_data.size() || s.sentence >= test_data[s.doc].size() ||
            s.position >= test_data[s.doc][s.sentence].target.size())
          throw PipelineError("recurrence site outside the test corpus: document " +
                              std::to_string(s.doc) + " sentence " + std::to_string(s.sentence));
        const EncodedPair& pair = test_data[s.doc][s.sentence];
        const auto probs = reference_probabilities(
            b.model, pair, cache ? &test_caches[s.doc][s.sentence] : nullptr, gate);
        site_probs[i].push_back(probs[s.position]);
        mean += probs[s.position];
      }
      mean /= static_cast<double>(sites.size());
      row(name, "recurrence_mean_probability", mean);
      js["recurrence_mean_probability"] = mean;
    }

    const fs::path tr = l.translate_dir(name) / "translations.txt";
    const fs::path diag = l.translate_dir(name) / "diagnostics.txt";
    if (!fs::exists(tr)) {
      log << "evaluate: no translations for " << name << "; skipping BLEU and coherence\n";
      continue;
    }
    inputs.push_back(tr);
    std::ifstream tin(tr);
    std::vector<std::string> ids;
    const auto hyp = read_translations(tin, &ids);
    if (ids != test_ids)
      throw PipelineError(tr.string() + " does not match the documents of " + l.test.string() +
                          "; rerun translate");
    const BleuStats bs = bleu_stats(flatten(hyp), flatten(references));
    row(name, "bleu", bs.score);
    js["bleu"] = bs.score;
    js["brevity_penalty"] = bs.brevity_penalty;
    const CoherenceReport coh = coherence(hyp, ids, table);
    row(name, "coherence", coh.mean);
    js["coherence"] = coh.mean;
    if (fs::exists(diag)) {
      inputs.push_back(diag);
      std::ifstream din(diag);
      const OverlapStats o = cache_overlap_stats(hyp, read_cache_dumps(din), stop);
      // Distinct-word (type) counts with stop words and UNK removed.
      row(name, "overlap_types_sentence_topic", o.sentence_topic);
      row(name, "overlap_types_sentence_all", o.sentence_union);
      row(name, "overlap_types_document_topic", o.document_topic);
      row(name, "overlap_types_document_all", o.document_union);
      row(name, "overlap_types_first_sentence_topic", o.first_sentence_topic);
      js["overlap_types"] = {{"sentence_topic", o.sentence_topic},
                             {"sentence_all", o.sentence_union},
                             {"document_topic", o.document_topic},
                             {"document_all", o.document_union},
                             {"first_sentence_topic", o.first_sentence_topic}};
    }
  }

  if (!sites.empty()) {
    site_tsv << "doc\tsentence\tposition\tword";
    for (const auto& s : systems) site_tsv << '\t' << s;
    site_tsv << '\n';
    for (std::size_t k = 0; k < sites.size(); ++k) {
      site_tsv << sites[k].doc << '\t' << sites[k].sentence << '\t' << sites[k].position << '\t'
               << sites[k].word;
      for (std::size_t i = 0; i < systems.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", site_probs[i][k]);
        site_tsv << '\t' << buf;
      }
      site_tsv << '\n';
    }
    // Share of sites where each system beats the first listed one.
    summary["recurrence"]["sites"] = sites.size();
    summary["recurrence"]["compared_to"] = systems[0];
    for (std::size_t i = 1; i < systems.size(); ++i) {
      std::size_t wins = 0;
      for (std::size_t k = 0; k < sites.size(); ++k) wins += site_probs[i][k] > site_probs[0][k];
      const double rate = static_cast<double>(wins) / static_cast<double>(sites.size());
      summary["recurrence"]["win_rate"][systems[i]] = rate;
      row(systems[i], "recurrence_win_rate_vs_" + systems[0], rate);
    }
  }

  fs::create_directories(l.eval);
  std::vector<fs::path> outputs = {l.eval / "report.tsv", l.eval / "summary.json"};
  write_text(outputs[0], report.str());
  write_text(outputs[1], summary.dump(2) + "\n");
  if (!sites.empty()) {
    outputs.push_back(l.eval / "recurrence.tsv");
    write_text(outputs.back(), site_tsv.str());
  }
  record_run(l.eval, "evaluate", c, {{"eval.seed", eo.seed}, {"decode.seed", seed_of(c, "decode.seed")}},
             inputs, outputs);
  log << report.str() << "evaluate: done in " << clock.seconds() << " s\n";
}

}  // namespace

void run_command(const std::string& command, const Config& config, std::ostream& log) {
  if (command == "gen-synthetic") return gen_synthetic(config, log);
  if (command == "train-lda") return train_lda(config, log);
  if (command == "train-baseline") return train_baseline(config, log);
  if (command == "train-cache") return train_cache(config, log);
  if (command == "translate") return translate(config, log);
  if (command == "evaluate") return evaluate(config, log);
  throw ValidationError("unknown command '" + command + "'");
}

}  // namespace cnmt
