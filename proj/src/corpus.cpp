#include "cnmt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cnmt/params.hpp"
#include "cnmt/rng.hpp"

namespace cnmt {

namespace {

Tokens split(const std::string& text) {
  Tokens out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t Corpus::sentence_count() const {
  std::size_t n = 0;
  for (const Document& d : documents) n += d.sentences.size();
  return n;
}

// ---------------------------------------------------------------- file format

Corpus parse_corpus(std::istream& in, const std::string& origin) {
  Corpus corpus;
  std::vector<Tokens> src, tgt;
  std::string doc_id;
  bool open = false;
  std::size_t line_no = 0;

  auto close = [&] {
    if (!open) return;
    if (src.size() != tgt.size())
      throw CorpusError(origin + ": document '" + doc_id + "' has " + std::to_string(src.size()) +
                        " source and " + std::to_string(tgt.size()) + " target sentences");
    if (src.empty()) throw CorpusError(origin + ": document '" + doc_id + "' has no sentences");
    Document doc{doc_id, {}};
    for (std::size_t i = 0; i < src.size(); ++i)
      doc.sentences.push_back({std::move(src[i]), std::move(tgt[i])});
    corpus.documents.push_back(std::move(doc));
    src.clear();
    tgt.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text.rfind("#doc", 0) == 0) {
      close();
      doc_id = trim(text.substr(4));
      if (doc_id.empty())
        throw CorpusError(origin + ":" + std::to_string(line_no) + ": document without an id");
      open = true;
      continue;
    }
    if (!open)
      throw CorpusError(origin + ":" + std::to_string(line_no) + ": text before the first #doc");
    const bool is_src = text.rfind("S:", 0) == 0;
    const bool is_tgt = text.rfind("T:", 0) == 0;
    if (!is_src && !is_tgt)
      throw CorpusError(origin + ":" + std::to_string(line_no) + ": document '" + doc_id +
                        "' has a line that is neither S: nor T:");
    Tokens toks = split(text.substr(2));
    if (toks.empty())
      throw CorpusError(origin + ":" + std::to_string(line_no) + ": document '" + doc_id +
                        "' has an empty sentence");
    (is_src ? src : tgt).push_back(std::move(toks));
    if (tgt.size() > src.size())
      throw CorpusError(origin + ":" + std::to_string(line_no) + ": document '" + doc_id +
                        "' has a target line without a source line");
  }
  close();
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus '" + path + "'");
  return parse_corpus(in, path);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  auto join = [](const Tokens& t) {
    std::string s;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i) s += ' ';
      s += t[i];
    }
    return s;
  };
  for (const Document& d : corpus.documents) {
    out << "#doc " << d.id << '\n';
    for (const SentencePair& p : d.sentences) {
      out << "S: " << join(p.source) << '\n';
      out << "T: " << join(p.target) << '\n';
    }
  }
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CorpusError("cannot write corpus '" + path + "'");
  write_corpus(out, corpus);
}

// ---------------------------------------------------------------- vocabulary

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& ranked) {
  tokens_ = {kPadToken, kUnkToken, kEosToken};
  for (const std::string& t : ranked)
    if (!ids_.count(t) && t != kPadToken && t != kUnkToken && t != kEosToken) tokens_.push_back(t);
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                            std::to_string(tokens_.size()));
  return tokens_[id];
}

std::vector<int> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 1);
  for (const std::string& t : tokens) ids.push_back(id(t));
  ids.push_back(kEos);
  return ids;
}

Tokens Vocabulary::decode(const std::vector<int>& ids) const {
  Tokens out;
  for (int id : ids) {
    if (id == kEos) break;
    out.push_back(token(id));
  }
  return out;
}

std::string Vocabulary::serialize() const {
  std::string s;
  for (std::size_t i = kReserved; i < tokens_.size(); ++i) {
    s += tokens_[i];
    s += '\n';
  }
  return s;
}

Vocabulary Vocabulary::deserialize(const std::string& text) {
  std::vector<std::string> ranked;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ranked.push_back(line);
  return Vocabulary(ranked);
}

std::string Vocabulary::digest() const { return fnv1a_hex(serialize()); }

Vocabulary build_vocab(const Corpus& corpus, Side side, std::size_t cap) {
  if (cap < Vocabulary::kReserved)
    throw std::invalid_argument("vocabulary cap " + std::to_string(cap) +
                                " is below the reserved-token count");
  std::map<std::string, std::size_t> freq;
  for (const Document& d : corpus.documents)
    for (const SentencePair& p : d.sentences)
      for (const std::string& t : side == Side::Source ? p.source : p.target) ++freq[t];
  freq.erase(Vocabulary::kPadToken);
  freq.erase(Vocabulary::kUnkToken);
  freq.erase(Vocabulary::kEosToken);
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  // freq is lexicographically ordered already; a stable sort keeps that as the tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), cap - Vocabulary::kReserved);
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocabulary(tokens);
}

// ---------------------------------------------------------------- stop words

const std::vector<std::string>& StopWordList::punctuation() {
  static const std::vector<std::string> p = {".", ",", ";", ":", "!", "?", "\"", "'", "(", ")",
                                             "[", "]", "-", "--", "...", "`", "``", "''", "/"};
  return p;
}

StopWordList::StopWordList() {
  words_.insert(Vocabulary::kUnkToken);
  for (const std::string& p : punctuation()) words_.insert(p);
}

StopWordList StopWordList::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stop-word list '" + path + "'");
  StopWordList list;
  std::string line;
  while (std::getline(in, line)) {
    const std::string w = trim(line);
    if (!w.empty()) list.add(w);
  }
  return list;
}

StopWordList StopWordList::english_default() {
  StopWordList list;
  for (const char* w :
       {"a", "an", "the", "of", "to", "in", "on", "at", "for", "with", "by", "from", "and", "or",
        "but", "is", "are", "was", "were", "be", "been", "it", "its", "this", "that", "these",
        "those", "as", "has", "have", "had", "will", "would", "he", "she", "they", "we", "i",
        "you", "his", "her", "their", "our", "not", "there", "which", "who", "also", "said"})
    list.add(w);
  return list;
}

std::vector<bool> StopWordList::mask(const Vocabulary& vocab) const {
  std::vector<bool> m(vocab.size(), false);
  for (std::size_t i = 0; i < vocab.size(); ++i)
    m[i] = Vocabulary::reserved(static_cast<int>(i)) || contains(vocab.token(static_cast<int>(i)));
  return m;
}

// ---------------------------------------------------------------- batching

std::vector<SentenceRef> document_order(const Corpus& corpus) {
  std::vector<SentenceRef> refs;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d)
    for (std::size_t s = 0; s < corpus.documents[d].sentences.size(); ++s) refs.push_back({d, s});
  return refs;
}

BatchPlan make_batches(const Corpus& corpus, std::size_t batch_size, std::size_t max_len,
                       bool shuffle, std::uint64_t seed) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  BatchPlan plan;
  std::vector<SentenceRef> kept;
  for (const SentenceRef& r : document_order(corpus)) {
    const SentencePair& p = corpus.documents[r.doc].sentences[r.index];
    if (p.source.size() > max_len || p.target.size() > max_len) {
      ++plan.skipped_too_long;
      continue;
    }
    kept.push_back(r);
  }
  if (shuffle) {
    Rng rng(seed);
    for (std::size_t i = kept.size(); i > 1; --i) std::swap(kept[i - 1], kept[rng.below(i)]);
  }
  for (std::size_t i = 0; i < kept.size(); i += batch_size)
    plan.batches.emplace_back(kept.begin() + static_cast<std::ptrdiff_t>(i),
                              kept.begin() + static_cast<std::ptrdiff_t>(std::min(kept.size(), i + batch_size)));
  return plan;
}

EncodedCorpus encode_corpus(const Corpus& corpus, const Vocabulary& src, const Vocabulary& tgt) {
  EncodedCorpus out;
  out.reserve(corpus.documents.size());
  for (const Document& d : corpus.documents) {
    auto& doc = out.emplace_back();
    for (const SentencePair& p : d.sentences) doc.push_back({src.encode(p.source), tgt.encode(p.target)});
  }
  return out;
}

std::vector<Tokens> document_tokens(const Corpus& corpus, Side side, const StopWordList* drop) {
  std::vector<Tokens> docs;
  for (const Document& d : corpus.documents) {
    Tokens& out = docs.emplace_back();
    for (const SentencePair& p : d.sentences)
      for (const std::string& t : side == Side::Source ? p.source : p.target)
        if (!drop || !drop->contains(t)) out.push_back(t);
  }
  return docs;
}

}  // namespace cnmt
