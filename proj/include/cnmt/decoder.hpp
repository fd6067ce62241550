#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cnmt/cache.hpp"
#include "cnmt/corpus.hpp"
#include "cnmt/nmt.hpp"
#include "cnmt/scorer.hpp"
#include "cnmt/topics.hpp"

namespace cnmt {

struct DecodeOptions {
  std::size_t beam = 4;
  // Hypotheses stop at length_factor * |source| + length_extra tokens.
  std::size_t length_factor = 3;
  std::size_t length_extra = 5;
  bool use_cache = true;  // false decodes with p_nmt alone
  GateSetting gate;
};

/// What happened at one emitted position.
struct StepTrace {
  int word = 0;
  double alpha = 1.0;       // gate value; 1 when the cache was empty or unused
  bool hit = false;         // emitted word was a cache member
  double cache_share = 0.0; // (1 - alpha) p_cache(word) / p(word)
  std::size_t cache_size = 0;
};

struct Hypothesis {
  std::vector<int> words;  // excludes the end-of-sentence id
  double score = 0.0;      // cumulative log-probability
  Tensor state;
  DynamicCache cache;      // sentence-start dynamic cache plus this path's own words
  std::vector<StepTrace> trace;
  bool finished = false;
};

/// Beam search over the mixed distribution. `cache` is the sentence-start
/// state; each hypothesis extends a private copy of its dynamic part. With a
/// null cache (or use_cache off) decoding uses p_nmt only.
Hypothesis beam_search(const Model& model, std::span<const int> source, const CacheState* cache,
                       const DecodeOptions& options);

/// Inserts the hypothesis words into the dynamic cache left to right.
void commit_hypothesis(CacheState& cache, const Hypothesis& hypothesis);

/// Topic models and projection used to fill the topic cache.
struct TopicResources {
  const TopicModel* source = nullptr;
  const TopicModel* target = nullptr;
  const TopicProjection* projection = nullptr;
  const StopWordList* stop_words = nullptr;  // dropped from source text before inference
  std::size_t infer_sweeps = 50;
  std::uint64_t seed = 1;
};

struct SentenceOutput {
  Tokens tokens;
  double score = 0.0;
  std::vector<int> dynamic_before;  // dynamic cache at sentence start
  std::vector<StepTrace> trace;
};

struct DocumentOutput {
  std::string id;
  int source_topic = -1;
  int target_topic = -1;
  bool projection_fallback = false;
  std::vector<int> topic_cache;
  std::vector<SentenceOutput> sentences;
};

struct DocumentDecodeSettings {
  DecodeOptions decode;
  std::size_t dynamic_capacity = 20;
  std::size_t topic_capacity = 50;
};

/// The first `capacity` words of a target topic that are in the vocabulary.
std::vector<int> topic_word_ids(const TopicModel& target, int topic, const Vocabulary& target_vocab,
                                std::size_t capacity);

/// Topical target ids for a source document: infer the source topic,
/// project it, and take the target topic's top words found in the vocabulary.
std::vector<int> document_topic_ids(const Tokens& source_text, const TopicResources& topics,
                                    const Vocabulary& target_vocab, std::size_t capacity,
                                    std::uint64_t seed, int* source_topic = nullptr,
                                    int* target_topic = nullptr, bool* fallback = nullptr);

/// Decodes a document sentence by sentence with fresh caches: the topic cache
/// is filled once, the dynamic cache grows with each committed best
/// hypothesis. `topics` may be null (dynamic cache only).
DocumentOutput translate_document(const Model& model, const Vocabulary& source_vocab,
                                  const Vocabulary& target_vocab, const Document& doc,
                                  const TopicResources* topics, const ExclusionMask& mask,
                                  const DocumentDecodeSettings& settings, std::uint64_t doc_seed);

/// Translations in corpus format: `#doc <id>` followed by one line per sentence.
void write_translations(std::ostream& out, const std::vector<DocumentOutput>& docs);
std::vector<std::vector<Tokens>> read_translations(std::istream& in,
                                                   std::vector<std::string>* ids = nullptr);

/// Per-document cache contents and per-step gate/cache statistics.
void write_diagnostics(std::ostream& out, const std::vector<DocumentOutput>& docs,
                       const Vocabulary& target_vocab);

}  // namespace cnmt
