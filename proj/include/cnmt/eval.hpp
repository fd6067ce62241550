#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cnmt/corpus.hpp"

namespace cnmt {

// ---------------------------------------------------------------- BLEU

struct BleuStats {
  std::vector<std::size_t> matches;  // clipped n-gram matches, n = 1..max_n
  std::vector<std::size_t> totals;   // hypothesis n-grams
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
  double brevity_penalty = 0.0;
  double score = 0.0;
};

/// Corpus BLEU against a single reference per sentence, strict geometric mean
/// (any zero precision gives 0).
BleuStats bleu_stats(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references,
                     std::size_t max_n = 4);
double bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references,
            std::size_t max_n = 4);

// ---------------------------------------------------------------- coherence

struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> vectors;

  const std::vector<double>* find(const std::string& w) const;
};

/// Mean of the vectors of covered words; the zero vector when none is covered.
std::vector<double> sentence_vector(const Tokens& sentence, const EmbeddingTable& table);

/// Cosine similarity; 0 when either vector is zero.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct CoherenceReport {
  std::vector<std::string> documents;                // ids of scored documents
  std::vector<std::vector<double>> similarities;     // adjacent-pair cosines per document
  std::vector<std::string> skipped;                  // fewer than two usable sentences
  double mean = 0.0;                                 // over all scored pairs
  std::size_t pairs = 0;
};

/// Adjacent-sentence cosine of mean word vectors. Pairs where either side
/// has no covered word are skipped.
std::vector<double> document_coherence(const std::vector<Tokens>& sentences,
                                       const EmbeddingTable& table);
CoherenceReport coherence(const std::vector<std::vector<Tokens>>& documents,
                          const std::vector<std::string>& ids, const EmbeddingTable& table);

struct EmbeddingOptions {
  std::size_t dim = 32;
  std::size_t epochs = 5;
  std::size_t window = 2;
  std::size_t negatives = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

/// Skip-gram with negative sampling over the given sentences; covers every
/// word that occurs in them.
EmbeddingTable train_embeddings(const std::vector<Tokens>& sentences, const EmbeddingOptions& options);

void save_embeddings(const std::string& path, const EmbeddingTable& table);
EmbeddingTable load_embeddings(const std::string& path);

// ---------------------------------------------------------------- cache overlap

/// Cache contents recorded while decoding one document.
struct CacheDump {
  std::string id;
  std::vector<std::string> topic;
  std::vector<std::vector<std::string>> dynamic_before;  // per sentence
};

std::vector<CacheDump> read_cache_dumps(std::istream& in);

/// Distinct-word (type) overlap between translations and caches, with stop
/// words and UNK removed. Per-sentence counts use the caches in effect when
/// the sentence was decoded; a document's count is the sum over its sentences.
struct OverlapStats {
  std::size_t documents = 0;
  std::size_t sentences = 0;
  double sentence_topic = 0.0;  // mean per sentence, topic cache only
  double sentence_union = 0.0;  // mean per sentence, topic and dynamic caches
  double document_topic = 0.0;
  double document_union = 0.0;
  double first_sentence_topic = 0.0;  // mean over first sentences, topic cache only
};

OverlapStats cache_overlap_stats(const std::vector<std::vector<Tokens>>& translations,
                                 const std::vector<CacheDump>& caches,
                                 const StopWordList& stop_words);

}  // namespace cnmt
