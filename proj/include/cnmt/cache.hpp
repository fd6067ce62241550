#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "cnmt/corpus.hpp"

namespace cnmt {

/// Ids that may never enter the dynamic cache: stop words, UNK, reserved
/// tokens. Indexed by target-vocabulary id; ids outside it are OOV.
using ExclusionMask = std::shared_ptr<const std::vector<bool>>;

ExclusionMask make_exclusion_mask(const StopWordList& stop_words, const Vocabulary& target_vocab);

/// FIFO of distinct target ids, oldest first. Re-inserting a present id is a
/// no-op and does not refresh its position.
class DynamicCache {
 public:
  DynamicCache(std::size_t capacity, ExclusionMask excluded);
  // Capacity 0: admits nothing.
  DynamicCache() : DynamicCache(0, std::make_shared<const std::vector<bool>>()) {}

  // True when the id was admitted.
  bool insert(int id);
  bool contains(int id) const;
  void clear() { entries_.clear(); }

  const std::vector<int>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool admissible(int id) const;

 private:
  std::size_t capacity_;
  ExclusionMask excluded_;
  std::vector<int> entries_;
};

/// Static per-document set of topical target words, in rank order.
class TopicCache {
 public:
  explicit TopicCache(std::size_t capacity) : capacity_(capacity) {}

  // Words ranked by descending topical probability. Words outside the target
  // vocabulary are discarded; the first `capacity` survivors are kept.
  void fill(const std::vector<std::string>& ranked_words, const Vocabulary& target_vocab);
  void fill_ids(const std::vector<int>& ranked_ids, std::size_t vocab_size);
  bool contains(int id) const;
  void clear() { entries_.clear(); }

  const std::vector<int>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::vector<int> entries_;
};

struct CacheState {
  DynamicCache dynamic;
  TopicCache topic;

  CacheState(std::size_t dynamic_capacity, std::size_t topic_capacity, ExclusionMask excluded)
      : dynamic(dynamic_capacity, std::move(excluded)), topic(topic_capacity) {}

  /// Union of both caches without repeats: dynamic entries oldest first, then
  /// topic-only entries in rank order.
  std::vector<int> members() const;
  bool contains(int id) const { return dynamic.contains(id) || topic.contains(id); }
  bool empty() const { return dynamic.size() == 0 && topic.size() == 0; }
  void clear_dynamic() { dynamic.clear(); }
  void clear_all() {
    dynamic.clear();
    topic.clear();
  }
};

}  // namespace cnmt
