#include "cnmt/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <numeric>
#include <stdexcept>

#include "cnmt/rng.hpp"

namespace cnmt {

namespace {

std::string name(const char* prefix, std::size_t a, std::size_t b) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%zu_%03zu", prefix, a, b);
  return buf;
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

// ---------------------------------------------------------------- planted topics

Corpus PlantedTopicCorpus::as_corpus() const {
  Corpus c;
  for (std::size_t d = 0; d < source_docs.size(); ++d) {
    Document doc;
    doc.id = "planted" + std::to_string(d);
    doc.sentences.push_back({source_docs[d], target_docs[d]});
    c.documents.push_back(std::move(doc));
  }
  return c;
}

PlantedTopicCorpus planted_topics(const PlantedTopicOptions& o) {
  if (o.topics < 2 || o.vocab < o.topics || o.documents == 0 || o.doc_length == 0)
    throw std::invalid_argument("planted topics: need >= 2 topics, a vocabulary per topic, and "
                                "non-empty documents");
  Rng rng(o.seed);
  const std::size_t per = o.vocab / o.topics;
  PlantedTopicCorpus c;
  c.permutation.resize(o.topics);
  std::iota(c.permutation.begin(), c.permutation.end(), 0);
  // Any permutation works, identity included.
  shuffle(c.permutation, rng);
  for (std::size_t d = 0; d < o.documents; ++d) {
    const std::size_t k = d % o.topics;
    const std::size_t kt = static_cast<std::size_t>(c.permutation[k]);
    Tokens src, tgt;
    for (std::size_t i = 0; i < o.doc_length; ++i) {
      const bool noisy = o.noise > 0.0 && rng.uniform() < o.noise;
      const std::size_t ks = noisy ? rng.below(o.topics) : k;
      src.push_back(name("w", ks, rng.below(per)));
      const bool noisy_t = o.noise > 0.0 && rng.uniform() < o.noise;
      const std::size_t kk = noisy_t ? rng.below(o.topics) : kt;
      tgt.push_back(name("v", kk, rng.below(per)));
    }
    c.source_docs.push_back(std::move(src));
    c.target_docs.push_back(std::move(tgt));
    c.topic.push_back(static_cast<int>(k));
  }
  return c;
}

// ---------------------------------------------------------------- translation corpus

std::string translate_token(const std::string& s) {
  if (s == "la") return "the";
  if (s == "de") return "of";
  if (s == ".") return ".";
  if (s.size() > 2 && s[0] == 'x' && s[1] == '_') return "y_" + s.substr(2);
  return s;
}

std::vector<std::string> synthetic_stop_words() { return {"the", "of", "."}; }

namespace {

struct Lexicon {
  std::vector<std::vector<std::string>> topic;  // source tokens per topic
  std::vector<std::string> common;
  std::vector<std::string> rare;
  std::vector<std::string> stop = {"la", "de"};
};

Lexicon make_lexicon(const TranslationCorpusOptions& o) {
  Lexicon lex;
  lex.topic.resize(o.topics);
  for (std::size_t k = 0; k < o.topics; ++k)
    for (std::size_t i = 0; i < o.topic_words; ++i) lex.topic[k].push_back(name("x_t", k, i));
  for (std::size_t i = 0; i < o.common_words; ++i) lex.common.push_back(name("x_c", 0, i));
  for (std::size_t i = 0; i < o.rare_words; ++i) lex.rare.push_back(name("x_r", 0, i));
  return lex;
}

// Sentences of one document; the rare word's recurrence is reported through the
// out-parameters.
Document make_document(const std::string& id, std::size_t k, const std::string& rare,
                       const Lexicon& lex, const TranslationCorpusOptions& o, Rng& rng,
                       std::size_t* recur_sentence, std::size_t* recur_position) {
  const std::size_t n = o.min_sentences + rng.below(o.max_sentences - o.min_sentences + 1);
  const std::size_t recur = 1 + rng.below(n - 1);
  Document doc;
  doc.id = id;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t len = o.min_length + rng.below(o.max_length - o.min_length + 1);
    Tokens src;
    for (std::size_t i = 0; i < len; ++i) {
      const double u = rng.uniform();
      if (u < o.topic_share)
        src.push_back(lex.topic[k][rng.below(lex.topic[k].size())]);
      else if (u < o.topic_share + o.stop_share)
        src.push_back(lex.stop[rng.below(lex.stop.size())]);
      else
        src.push_back(lex.common[rng.below(lex.common.size())]);
    }
    if (s == 0 || s == recur) {
      const std::size_t pos = rng.below(len);
      src[pos] = rare;
      if (s == recur) {
        *recur_sentence = s;
        *recur_position = pos;
      }
    }
    src.push_back(".");
    Tokens tgt;
    for (const auto& w : src) tgt.push_back(translate_token(w));
    doc.sentences.push_back({std::move(src), std::move(tgt)});
  }
  return doc;
}

}  // namespace

TranslationCorpus synthetic_translation(const TranslationCorpusOptions& o) {
  if (o.topics == 0 || o.topic_words == 0 || o.common_words == 0 || o.rare_words == 0)
    throw std::invalid_argument("synthetic corpus: every word class needs at least one word");
  if (o.min_sentences < 2 || o.max_sentences < o.min_sentences)
    throw std::invalid_argument("synthetic corpus: documents need at least two sentences");
  if (o.min_length == 0 || o.max_length < o.min_length)
    throw std::invalid_argument("synthetic corpus: bad sentence length range");
  if (o.topic_share < 0 || o.stop_share < 0 || o.topic_share + o.stop_share > 1)
    throw std::invalid_argument("synthetic corpus: word-class shares must sum to at most 1");
  const Lexicon lex = make_lexicon(o);
  Rng rng(o.seed);
  TranslationCorpus c;
  auto build = [&](Corpus& out, std::vector<RecurrenceSite>* sites, std::vector<int>* topics,
                   std::size_t count, const char* prefix, const std::vector<std::string>& pool) {
    for (std::size_t d = 0; d < count; ++d) {
      const std::size_t k = rng.below(o.topics);
      const std::string& rare = pool[rng.below(pool.size())];
      std::size_t rs = 0, rp = 0;
      out.documents.push_back(
          make_document(prefix + std::to_string(d), k, rare, lex, o, rng, &rs, &rp));
      if (sites) sites->push_back({d, rs, rp, translate_token(rare)});
      if (topics) topics->push_back(static_cast<int>(k));
    }
  };
  build(c.train, nullptr, &c.train_topics, o.train_documents, "train", lex.rare);
  // Held-out documents only use rare words seen in training, so they stay in
  // the vocabulary.
  std::vector<std::string> seen;
  for (const auto& doc : c.train.documents)
    for (const auto& w : doc.sentences[0].source)
      if (w.rfind("x_r", 0) == 0) seen.push_back(w);
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  if (seen.empty()) seen = lex.rare;
  build(c.dev, &c.dev_sites, nullptr, o.dev_documents, "dev", seen);
  build(c.test, &c.test_sites, nullptr, o.test_documents, "test", seen);
  return c;
}

void save_sites(const std::string& path, const std::vector<RecurrenceSite>& sites) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "doc\tsentence\tposition\tword\n";
  for (const auto& s : sites)
    out << s.doc << '\t' << s.sentence << '\t' << s.position << '\t' << s.word << '\n';
}

std::vector<RecurrenceSite> load_sites(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::vector<RecurrenceSite> sites;
  std::string line;
  std::getline(in, line);  // header
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    std::istringstream f(line);
    RecurrenceSite s;
    if (!(f >> s.doc >> s.sentence >> s.position >> s.word))
      throw std::runtime_error(path + ":" + std::to_string(n) + ": malformed site");
    sites.push_back(s);
  }
  return sites;
}

}  // namespace cnmt
