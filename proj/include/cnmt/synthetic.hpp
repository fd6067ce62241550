#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cnmt/corpus.hpp"

namespace cnmt {

/// Bilingual documents whose words come from one planted topic per document.
/// Source topic k uses words w<k>_<i>; its target documents use the word set
/// of target topic permutation[k].
struct PlantedTopicOptions {
  std::size_t documents = 400;
  std::size_t vocab = 400;  // per side, split evenly across topics
  std::size_t topics = 4;
  std::size_t doc_length = 40;
  double noise = 0.0;  // probability of a word drawn from the whole vocabulary
  std::uint64_t seed = 1;
};

struct PlantedTopicCorpus {
  std::vector<Tokens> source_docs;
  std::vector<Tokens> target_docs;
  std::vector<int> topic;        // planted source topic per document
  std::vector<int> permutation;  // source topic -> target topic
  Corpus as_corpus() const;      // one sentence pair per document
};

PlantedTopicCorpus planted_topics(const PlantedTopicOptions& options);

/// Document translation corpus with a deterministic monotone token mapping,
/// per-document topics, and a rare word that appears in the first sentence and
/// recurs later in the same document.
struct TranslationCorpusOptions {
  std::size_t train_documents = 2000;
  std::size_t dev_documents = 100;
  std::size_t test_documents = 50;
  std::size_t topics = 4;
  std::size_t topic_words = 30;
  std::size_t common_words = 40;
  std::size_t rare_words = 300;
  std::size_t min_sentences = 3;
  std::size_t max_sentences = 5;
  std::size_t min_length = 4;  // tokens before the final period
  std::size_t max_length = 9;
  double topic_share = 0.5;
  double stop_share = 0.2;
  std::uint64_t seed = 1;
};

/// Where a rare word recurs: target position in a sentence of a document.
struct RecurrenceSite {
  std::size_t doc = 0;
  std::size_t sentence = 0;
  std::size_t position = 0;
  std::string word;  // target token
};

/// Tab-separated with a header line: doc, sentence, position, word.
void save_sites(const std::string& path, const std::vector<RecurrenceSite>& sites);
std::vector<RecurrenceSite> load_sites(const std::string& path);

struct TranslationCorpus {
  Corpus train, dev, test;
  std::vector<RecurrenceSite> dev_sites, test_sites;
  std::vector<int> train_topics;  // planted topic per training document
};

TranslationCorpus synthetic_translation(const TranslationCorpusOptions& options);

/// Target side of the deterministic mapping.
std::string translate_token(const std::string& source_token);

/// Target stop words of the synthetic language.
std::vector<std::string> synthetic_stop_words();

}  // namespace cnmt
