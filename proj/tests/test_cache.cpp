#include <doctest.h>

#include <algorithm>

#include "cnmt/cache.hpp"
#include "cnmt/rng.hpp"
#include "reference.hpp"

using namespace cnmt;

namespace {

// Vocabulary of 10 ids: 0..2 reserved, 3 a stop word.
ExclusionMask small_mask() {
  std::vector<bool> m(10, false);
  m[0] = m[1] = m[2] = m[3] = true;
  return std::make_shared<const std::vector<bool>>(m);
}

constexpr int a = 4, b = 5, c = 6, d = 7;

}  // namespace

TEST_CASE("dynamic cache insertion examples") {
  DynamicCache one(3, small_mask());
  CHECK(one.insert(a));
  CHECK(one.entries() == std::vector<int>{a});

  DynamicCache two(2, small_mask());
  two.insert(a);
  two.insert(b);
  two.insert(c);
  CHECK(two.entries() == std::vector<int>{b, c});

  DynamicCache dup(3, small_mask());
  dup.insert(a);
  CHECK_FALSE(dup.insert(a));
  CHECK(dup.entries() == std::vector<int>{a});
}

TEST_CASE("duplicates do not refresh recency") {
  DynamicCache cache(2, small_mask());
  cache.insert(a);
  cache.insert(b);
  cache.insert(a);
  cache.insert(c);
  CHECK(cache.entries() == std::vector<int>{b, c});
}

TEST_CASE("stop words, UNK, reserved and out-of-vocabulary ids are ignored") {
  DynamicCache cache(5, small_mask());
  for (int id : {0, 1, 2, 3, 10, -1, 99}) CHECK_FALSE(cache.insert(id));
  CHECK(cache.size() == 0);
  CHECK_FALSE(cache.admissible(Vocabulary::kUnk));
  CHECK(cache.admissible(a));
}

TEST_CASE("zero capacity holds nothing") {
  DynamicCache cache(0, small_mask());
  CHECK_FALSE(cache.insert(a));
  CHECK(cache.size() == 0);
}

TEST_CASE("topic cache fill examples") {
  const Vocabulary v({"cat", "dog", "fish", "bird"});
  TopicCache small(50);
  small.fill({"cat", "dog", "fish"}, v);
  CHECK(small.size() == 3);
  for (const char* w : {"cat", "dog", "fish"}) CHECK(small.contains(v.id(w)));

  TopicCache oov(50);
  oov.fill({"cat", "zebra", "dog"}, v);
  CHECK(oov.entries() == std::vector<int>{v.id("cat"), v.id("dog")});

  TopicCache cap(2);
  cap.fill({"zebra", "bird", "fish", "cat"}, v);
  CHECK(cap.entries() == std::vector<int>{v.id("bird"), v.id("fish")});
}

TEST_CASE("topic cache drops reserved and repeated ids") {
  TopicCache t(5);
  t.fill_ids({Vocabulary::kUnk, a, a, 42, b}, 10);
  CHECK(t.entries() == std::vector<int>{a, b});
}

TEST_CASE("members is the union without repeats") {
  CacheState s(5, 5, small_mask());
  CHECK(s.members().empty());
  CHECK(s.empty());
  s.dynamic.insert(a);
  s.topic.fill_ids({a, b}, 10);
  std::vector<int> m = s.members();
  std::sort(m.begin(), m.end());
  CHECK(m == std::vector<int>{a, b});
  for (int id = 0; id < 10; ++id)
    CHECK(s.contains(id) == (std::find(m.begin(), m.end(), id) != m.end()));
}

TEST_CASE("clearing caches") {
  CacheState s(5, 5, small_mask());
  s.dynamic.insert(a);
  s.topic.fill_ids({b, c}, 10);
  s.clear_dynamic();
  CHECK(s.dynamic.size() == 0);
  CHECK(s.topic.entries() == std::vector<int>{b, c});
  s.clear_dynamic();
  CHECK(s.topic.size() == 2);

  s.dynamic.insert(d);
  s.clear_all();
  CHECK(s.members().empty());
  s.clear_all();
  CHECK(s.members().empty());
}

TEST_CASE("a null mask is rejected") { CHECK_THROWS(DynamicCache(3, nullptr)); }

TEST_CASE("random insertion sequences agree with the list model") {
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t vocab = 3 + rng.below(30);
    std::vector<bool> excluded(vocab);
    for (std::size_t i = 0; i < vocab; ++i) excluded[i] = i < 3 || rng.uniform() < 0.2;
    const std::size_t capacity = rng.below(8);
    DynamicCache cache(capacity, std::make_shared<const std::vector<bool>>(excluded));
    reference::ListCache model{capacity, excluded, {}, {}};
    std::vector<int> ranked;
    for (std::size_t k = 0; k < 4; ++k) ranked.push_back(static_cast<int>(rng.below(vocab + 3)));
    CacheState state(capacity, 3, std::make_shared<const std::vector<bool>>(excluded));
    state.topic.fill_ids(ranked, vocab);
    for (int t : state.topic.entries()) model.topic.push_back(t);

    const std::size_t steps = rng.below(60);
    for (std::size_t i = 0; i < steps; ++i) {
      const int id = static_cast<int>(rng.below(vocab + 4)) - 2;  // includes -2..-1 and OOV
      cache.insert(id);
      state.dynamic.insert(id);
      model.insert(id);
      REQUIRE(cache.entries() == model.dynamic);
    }
    CHECK(state.members() == model.members());
    CHECK(cache.size() <= capacity);
    for (int e : cache.entries()) {
      CHECK_FALSE(excluded[e]);
      CHECK(std::count(cache.entries().begin(), cache.entries().end(), e) == 1);
    }
  }
}
