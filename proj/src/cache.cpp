#include "cnmt/cache.hpp"

#include <algorithm>
#include <stdexcept>

namespace cnmt {

ExclusionMask make_exclusion_mask(const StopWordList& stop_words, const Vocabulary& target_vocab) {
  return std::make_shared<const std::vector<bool>>(stop_words.mask(target_vocab));
}

DynamicCache::DynamicCache(std::size_t capacity, ExclusionMask excluded)
    : capacity_(capacity), excluded_(std::move(excluded)) {
  if (!excluded_) throw std::invalid_argument("dynamic cache needs an exclusion mask");
  entries_.reserve(capacity_);
}

bool DynamicCache::admissible(int id) const {
  return id >= 0 && static_cast<std::size_t>(id) < excluded_->size() && !(*excluded_)[id];
}

bool DynamicCache::contains(int id) const {
  return std::find(entries_.begin(), entries_.end(), id) != entries_.end();
}

bool DynamicCache::insert(int id) {
  if (capacity_ == 0 || !admissible(id) || contains(id)) return false;
  if (entries_.size() == capacity_) entries_.erase(entries_.begin());
  entries_.push_back(id);
  return true;
}

void TopicCache::fill(const std::vector<std::string>& ranked_words, const Vocabulary& target_vocab) {
  std::vector<int> ids;
  for (const std::string& w : ranked_words)
    ids.push_back(target_vocab.contains(w) ? target_vocab.id(w) : -1);
  fill_ids(ids, target_vocab.size());
}

void TopicCache::fill_ids(const std::vector<int>& ranked_ids, std::size_t vocab_size) {
  entries_.clear();
  for (int id : ranked_ids) {
    if (entries_.size() == capacity_) break;
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size || Vocabulary::reserved(id)) continue;
    if (!contains(id)) entries_.push_back(id);
  }
}

bool TopicCache::contains(int id) const {
  return std::find(entries_.begin(), entries_.end(), id) != entries_.end();
}

std::vector<int> CacheState::members() const {
  std::vector<int> out = dynamic.entries();
  for (int id : topic.entries())
    if (!dynamic.contains(id)) out.push_back(id);
  return out;
}

}  // namespace cnmt
