#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cnmt/corpus.hpp"

namespace cnmt {

struct LdaOptions {
  std::size_t topics = 8;
  double alpha = 0.5;
  double beta = 0.1;
  std::size_t sweeps = 200;
  // Independent chains; the one with the highest log p(w, z) is kept. Chain 0
  // uses `seed`, chain r derive_seed(seed, r).
  std::size_t restarts = 1;
  std::uint64_t seed = 1;
};

/// Collapsed-Gibbs LDA state. Word ids index `words`, which is sorted, so a
/// lower id is also the lexicographically smaller token.
struct TopicModel {
  std::size_t topics = 0;
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<std::string> words;
  std::vector<std::vector<std::int64_t>> word_topic;  // [word][topic]
  std::vector<std::int64_t> topic_total;              // [topic]
  std::vector<std::vector<std::int64_t>> doc_topic;   // [doc][topic]

  std::size_t vocab_size() const { return words.size(); }
  int word_id(const std::string& w) const;  // -1 when absent
  // p(w | topic), smoothed by beta.
  std::vector<double> phi(std::size_t topic) const;
  // p(topic | training document d), smoothed by alpha.
  std::vector<double> doc_distribution(std::size_t d) const;
  std::string vocab_digest() const;

  std::unordered_map<std::string, int> index;
};

/// Runs `sweeps` Gibbs sweeps from a seeded random initial assignment, once
/// per restart.
TopicModel fit_lda(const std::vector<Tokens>& docs, const LdaOptions& options);

/// Collapsed joint log-likelihood log p(w, z) of the current assignment.
double log_likelihood(const TopicModel& model);

/// Fold-in inference with the topic-word counts held fixed. Words unknown to
/// the model are ignored; if none remain the result is uniform and
/// `*fallback` (when given) is set.
std::vector<double> infer_topics(const TopicModel& model, const Tokens& doc, std::size_t sweeps,
                                 std::uint64_t seed, bool* fallback = nullptr);

/// Argmax with ties going to the lowest topic id.
int dominant_topic(std::span<const double> dist);

/// Most probable words of a topic, ties in lexicographic order. Returns the
/// whole vocabulary ordering when n exceeds it.
std::vector<std::string> top_words(const TopicModel& model, std::size_t topic, std::size_t n);

/// p(target topic | source topic) from co-occurring dominant topics of
/// aligned document pairs.
struct TopicProjection {
  std::size_t source_topics = 0;
  std::size_t target_topics = 0;
  std::vector<std::vector<std::int64_t>> counts;  // [source][target]
  std::vector<std::vector<double>> prob;          // rows normalized; zero when empty
  std::vector<bool> empty;                        // source topic never dominant
  int fallback = 0;  // most frequent dominant target topic over all pairs

  // Highest-probability target topic; the fallback for empty rows.
  int project(int source_topic) const;
};

TopicProjection projection_from_counts(std::vector<std::vector<std::int64_t>> counts);

TopicProjection estimate_projection(const std::vector<std::pair<int, int>>& dominant_pairs,
                                    std::size_t source_topics, std::size_t target_topics);

/// Infers both sides of each pair and accumulates (z_s, z_t) events.
TopicProjection estimate_projection(const TopicModel& source, const TopicModel& target,
                                    const std::vector<std::pair<Tokens, Tokens>>& aligned_docs,
                                    std::size_t infer_sweeps, std::uint64_t seed);

void save_topic_model(const std::string& path, const TopicModel& model);
TopicModel load_topic_model(const std::string& path);
void save_projection(const std::string& path, const TopicProjection& projection);
TopicProjection load_projection(const std::string& path);

}  // namespace cnmt
