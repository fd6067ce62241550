#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <stdexcept>

#include "cnmt/trainer.hpp"
#include "fixtures.hpp"

using namespace cnmt;

namespace {

struct CopySetup {
  Corpus corpus;
  Vocabulary sv, tv;
  EncodedCorpus data;
  ModelConfig config;
};

CopySetup copy_setup(std::size_t documents) {
  CopySetup s;
  s.corpus = fixtures::copy_corpus(documents, 4, 3);
  s.sv = build_vocab(s.corpus, Side::Source, 100);
  s.tv = build_vocab(s.corpus, Side::Target, 100);
  s.data = encode_corpus(s.corpus, s.sv, s.tv);
  s.config.source_vocab = s.sv.size();
  s.config.target_vocab = s.tv.size();
  s.config.emb = 8;
  s.config.hidden = 16;
  s.config.attention = 16;
  s.config.readout = 8;
  s.config.cache_hidden1 = 8;
  s.config.cache_hidden2 = 4;
  s.config.gate_hidden1 = 6;
  s.config.gate_hidden2 = 4;
  return s;
}

bool same_params(const Model& a, const Model& b) {
  for (std::size_t i = 0; i < a.params().size(); ++i)
    if (a.params()[i].values != b.params()[i].values) return false;
  return true;
}

}  // namespace

TEST_CASE("copy-task likelihood improves every epoch") {
  const CopySetup s = copy_setup(60);
  Model model(s.config, 1, false);
  TrainOptions o;
  o.dropout = 0.0;
  Trainer trainer(model, o);
  double last = corpus_nll(model, s.data, nullptr, {}).per_token();
  for (int e = 0; e < 5; ++e) {
    const EpochStats st = trainer.epoch(s.corpus, s.data, nullptr);
    CHECK(st.sentences == 240);
    CHECK(st.epoch == static_cast<std::size_t>(e + 1));
    const double now = corpus_nll(model, s.data, nullptr, {}).per_token();
    CHECK(now < last);
    last = now;
  }
  CHECK(trainer.epochs_done() == 5);
}

TEST_CASE("training results do not depend on the worker count") {
  const CopySetup s = copy_setup(20);
  const auto caches =
      training_caches(s.data, 5, 3, fixtures::mask_for(s.config.target_vocab),
                      std::vector<std::vector<int>>(s.data.size(), std::vector<int>{3, 4, 5}));
  for (bool with_cache : {false, true}) {
    Model one(s.config, 7, with_cache), many(s.config, 7, with_cache);
    TrainOptions o;
    o.dropout = 0.3;
    o.batch_size = 8;
    Trainer t1(one, o);
    o.workers = 3;
    Trainer t3(many, o);
    for (int e = 0; e < 2; ++e) {
      const auto a = t1.epoch(s.corpus, s.data, with_cache ? &caches : nullptr);
      const auto b = t3.epoch(s.corpus, s.data, with_cache ? &caches : nullptr);
      CHECK(a.loss_per_token == b.loss_per_token);
    }
    CHECK(same_params(one, many));
    CHECK(corpus_nll(one, s.data, with_cache ? &caches : nullptr, {}, 1).loss ==
          corpus_nll(one, s.data, with_cache ? &caches : nullptr, {}, 4).loss);
  }
}

TEST_CASE("training caches hold the preceding references") {
  const CopySetup s = copy_setup(3);
  const auto mask = fixtures::mask_for(s.config.target_vocab);
  std::vector<std::vector<int>> topics = {{3}, {4, 5}, {}};
  const SentenceCaches c = training_caches(s.data, 100, 10, mask, topics);
  REQUIRE(c.size() == 3);
  for (std::size_t d = 0; d < 3; ++d) {
    REQUIRE(c[d].size() == s.data[d].size());
    CHECK(c[d][0].dynamic.size() == 0);
    std::vector<int> expect;
    for (std::size_t i = 0; i < s.data[d].size(); ++i) {
      CHECK(c[d][i].dynamic.entries() == expect);
      CHECK(c[d][i].topic.entries() == topics[d]);
      for (int y : s.data[d][i].target)
        if (!(*mask)[y] && std::find(expect.begin(), expect.end(), y) == expect.end())
          expect.push_back(y);
    }
  }
  CHECK_THROWS(training_caches(s.data, 5, 5, mask, {{}}));
}

TEST_CASE("parallel_for visits every index once and reports errors") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("model bundles round trip") {
  const CopySetup s = copy_setup(4);
  ModelBundle b{Model(s.config, 3, true), s.sv, s.tv, {{"gate", "fixed:0.3"}}};
  save_model("test_trainer_model.ckpt", b);
  const ModelBundle back = load_model("test_trainer_model.ckpt");
  std::remove("test_trainer_model.ckpt");
  CHECK(same_params(back.model, b.model));
  CHECK(back.model.has_scorer());
  CHECK(back.source_vocab.digest() == s.sv.digest());
  CHECK(back.target_vocab.digest() == s.tv.digest());
  CHECK(back.metadata.at("gate") == "fixed:0.3");
  CHECK_THROWS(load_model("does_not_exist.ckpt"));
}
