#pragma once

// Small models and corpora shared by several test files.

#include <memory>
#include <string>
#include <vector>

#include "cnmt/cache.hpp"
#include "cnmt/corpus.hpp"
#include "cnmt/nmt.hpp"
#include "cnmt/rng.hpp"

namespace fixtures {

inline cnmt::ModelConfig micro_config() {
  cnmt::ModelConfig c;
  c.source_vocab = 7;
  c.target_vocab = 9;
  c.emb = 3;
  c.hidden = 4;
  c.attention = 5;
  c.readout = 4;
  c.cache_hidden1 = 5;
  c.cache_hidden2 = 3;
  c.gate_hidden1 = 4;
  c.gate_hidden2 = 3;
  return c;
}

// Every weight random, including the zero-initialized output layers, so no
// gradient is trivially zero.
inline cnmt::Model random_model(std::uint64_t seed, bool scorer, double scale = 0.5) {
  cnmt::Model m(micro_config(), seed, scorer);
  cnmt::Rng rng(cnmt::derive_seed(seed, 99));
  for (std::size_t i = 0; i < m.params().size(); ++i)
    for (double& v : m.params()[i].values) v = rng.uniform(-scale, scale);
  return m;
}

inline cnmt::ExclusionMask mask_for(std::size_t vocab, std::vector<int> stop = {}) {
  auto m = std::make_shared<std::vector<bool>>(vocab, false);
  for (std::size_t i = 0; i < cnmt::Vocabulary::kReserved && i < vocab; ++i) (*m)[i] = true;
  for (int s : stop) (*m)[s] = true;
  return m;
}

// Documents whose target side repeats the source: words "a".."j", sentences
// of 1 to 5 words.
inline cnmt::Corpus copy_corpus(std::size_t documents, std::size_t sentences, std::uint64_t seed) {
  cnmt::Rng rng(seed);
  cnmt::Corpus c;
  for (std::size_t d = 0; d < documents; ++d) {
    cnmt::Document doc;
    doc.id = "copy" + std::to_string(d);
    for (std::size_t s = 0; s < sentences; ++s) {
      cnmt::Tokens t;
      for (std::size_t i = 0, n = 1 + rng.below(5); i < n; ++i)
        t.push_back(std::string(1, static_cast<char>('a' + rng.below(10))));
      doc.sentences.push_back({t, t});
    }
    c.documents.push_back(std::move(doc));
  }
  return c;
}

}  // namespace fixtures
