#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cnmt/corpus.hpp"

using namespace cnmt;

namespace {

Corpus parse(const std::string& text) {
  std::istringstream in(text);
  return parse_corpus(in);
}

Corpus corpus_of(const std::vector<std::size_t>& sizes) {
  Corpus c;
  for (std::size_t d = 0; d < sizes.size(); ++d) {
    Document doc;
    doc.id = "d" + std::to_string(d);
    for (std::size_t i = 0; i < sizes[d]; ++i)
      doc.sentences.push_back({{"s" + std::to_string(i)}, {"t" + std::to_string(i)}});
    c.documents.push_back(doc);
  }
  return c;
}

}  // namespace

TEST_CASE("two documents keep their order and sizes") {
  std::string text = "#doc first\n";
  for (int i = 0; i < 3; ++i) text += "S: a b\nT: x y\n";
  text += "\n#doc second\n";
  for (int i = 0; i < 5; ++i) text += "S: c\nT: z\n";
  const Corpus c = parse(text);
  REQUIRE(c.documents.size() == 2);
  CHECK(c.documents[0].id == "first");
  CHECK(c.documents[1].id == "second");
  CHECK(c.documents[0].sentences.size() == 3);
  CHECK(c.documents[1].sentences.size() == 5);
  CHECK(c.sentence_count() == 8);
  CHECK(c.documents[0].sentences[0].target == Tokens{"x", "y"});
}

TEST_CASE("empty input gives an empty corpus") {
  CHECK(parse("").documents.empty());
  CHECK(parse("\n\n").documents.empty());
}

TEST_CASE("a document missing a target line is rejected by id") {
  const std::string text = "#doc ok\nS: a\nT: b\n#doc broken7\nS: a\nT: b\nS: c\n";
  try {
    parse(text);
    FAIL("expected a corpus error");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("broken7") != std::string::npos);
  }
}

TEST_CASE("malformed lines are rejected") {
  CHECK_THROWS_AS(parse("S: a\nT: b\n"), CorpusError);        // before any #doc
  CHECK_THROWS_AS(parse("#doc x\nT: b\nS: a\n"), CorpusError);  // target first
  CHECK_THROWS_AS(parse("#doc x\nS:\nT: b\n"), CorpusError);    // empty side
  CHECK_THROWS_AS(parse("#doc x\n"), CorpusError);              // no sentences
}

TEST_CASE("corpus text round trip") {
  const Corpus c = corpus_of({2, 1});
  std::ostringstream out;
  write_corpus(out, c);
  const Corpus back = parse(out.str());
  REQUIRE(back.documents.size() == 2);
  for (std::size_t d = 0; d < 2; ++d) {
    CHECK(back.documents[d].id == c.documents[d].id);
    REQUIRE(back.documents[d].sentences.size() == c.documents[d].sentences.size());
    for (std::size_t i = 0; i < c.documents[d].sentences.size(); ++i) {
      CHECK(back.documents[d].sentences[i].source == c.documents[d].sentences[i].source);
      CHECK(back.documents[d].sentences[i].target == c.documents[d].sentences[i].target);
    }
  }
}

TEST_CASE("vocabulary keeps the most frequent tokens") {
  const Corpus c = parse("#doc v\nS: a a a b b c\nT: a a a b b c\n");
  const Vocabulary v = build_vocab(c, Side::Target, Vocabulary::kReserved + 2);
  CHECK(v.size() == 5);
  CHECK(v.id("a") == 3);
  CHECK(v.id("b") == 4);
  CHECK_FALSE(v.contains("c"));
  CHECK(v.id("c") == Vocabulary::kUnk);
  CHECK(v.token(Vocabulary::kUnk) == Vocabulary::kUnkToken);
}

TEST_CASE("a generous cap leaves only unseen tokens as UNK") {
  const Corpus c = parse("#doc v\nS: p q\nT: a b c a\n");
  const Vocabulary v = build_vocab(c, Side::Target, 100);
  CHECK(v.size() == Vocabulary::kReserved + 3);
  for (const char* w : {"a", "b", "c"}) CHECK(v.id(w) != Vocabulary::kUnk);
  CHECK(v.id("d") == Vocabulary::kUnk);
  // Side selection: source tokens are not in the target vocabulary.
  CHECK_FALSE(v.contains("p"));
}

TEST_CASE("frequency ties are broken lexicographically") {
  const Corpus c = parse("#doc v\nS: x\nT: b a b a\n");
  const Vocabulary v = build_vocab(c, Side::Target, 10);
  CHECK(v.id("a") < v.id("b"));
}

TEST_CASE("encode then decode is the identity for in-vocabulary text") {
  const Corpus c = parse("#doc v\nS: x\nT: the cat sat on the mat\n");
  const Vocabulary v = build_vocab(c, Side::Target, 100);
  const Tokens t = {"on", "the", "mat", "cat"};
  const std::vector<int> ids = v.encode(t);
  CHECK(ids.back() == Vocabulary::kEos);
  CHECK(ids.size() == t.size() + 1);
  CHECK(v.decode(ids) == t);
  CHECK(v.decode({v.id("cat"), Vocabulary::kEos, v.id("mat")}) == Tokens{"cat"});
}

TEST_CASE("vocabulary serialization round trip") {
  const Corpus c = parse("#doc v\nS: x\nT: a b b c c c\n");
  const Vocabulary v = build_vocab(c, Side::Target, 100);
  const Vocabulary back = Vocabulary::deserialize(v.serialize());
  CHECK(back.size() == v.size());
  for (int i = 0; i < static_cast<int>(v.size()); ++i) CHECK(back.token(i) == v.token(i));
  CHECK(back.digest() == v.digest());
}

TEST_CASE("stop words always include UNK and punctuation") {
  const std::string path = "test_corpus_stop.txt";
  {
    std::ofstream f(path);
    f << "the\n\nof\n";
  }
  const StopWordList s = StopWordList::load(path);
  std::remove(path.c_str());
  CHECK(s.contains("the"));
  CHECK(s.contains("of"));
  CHECK(s.contains(Vocabulary::kUnkToken));
  for (const auto& p : StopWordList::punctuation()) CHECK(s.contains(p));
  CHECK_FALSE(s.contains("cat"));
  CHECK_FALSE(s.contains(""));

  const StopWordList e = StopWordList::english_default();
  CHECK(e.contains(Vocabulary::kUnkToken));
  CHECK(e.contains("."));
  CHECK(e.contains("the"));
}

TEST_CASE("stop-word mask excludes reserved ids") {
  const Corpus c = parse("#doc v\nS: x\nT: the cat .\n");
  const Vocabulary v = build_vocab(c, Side::Target, 100);
  StopWordList s;
  s.add("the");
  const std::vector<bool> m = s.mask(v);
  REQUIRE(m.size() == v.size());
  for (int i = 0; i < static_cast<int>(Vocabulary::kReserved); ++i) CHECK(m[i]);
  CHECK(m[v.id("the")]);
  CHECK(m[v.id(".")]);
  CHECK_FALSE(m[v.id("cat")]);
}

TEST_CASE("ten sentences in batches of four") {
  const BatchPlan plan = make_batches(corpus_of({10}), 4, 20);
  REQUIRE(plan.batches.size() == 3);
  CHECK(plan.batches[0].size() == 4);
  CHECK(plan.batches[1].size() == 4);
  CHECK(plan.batches[2].size() == 2);
  CHECK(plan.skipped_too_long == 0);
}

TEST_CASE("over-long sentences are skipped and counted") {
  Corpus c = corpus_of({3});
  for (auto& s : c.documents[0].sentences) s.target = Tokens(5, "w");
  const BatchPlan plan = make_batches(c, 4, 4);
  CHECK(plan.batches.empty());
  CHECK(plan.skipped_too_long == 3);

  c.documents[0].sentences[1].target = {"short"};
  const BatchPlan one = make_batches(c, 4, 4);
  REQUIRE(one.batches.size() == 1);
  CHECK(one.batches[0] == std::vector<SentenceRef>{{0, 1}});
  CHECK(one.skipped_too_long == 2);
}

TEST_CASE("batched sentences map back to document and index") {
  const Corpus c = corpus_of({3, 1, 4});
  for (bool shuffle : {false, true}) {
    const BatchPlan plan = make_batches(c, 3, 20, shuffle, 11);
    std::vector<SentenceRef> seen;
    for (const auto& b : plan.batches)
      for (const auto& r : b) {
        const auto& pair = c.documents.at(r.doc).sentences.at(r.index);
        CHECK(pair.source[0] == "s" + std::to_string(r.index));
        seen.push_back(r);
      }
    CHECK(seen.size() == 8);
    std::set<std::pair<std::size_t, std::size_t>> unique;
    for (const auto& r : seen) unique.insert({r.doc, r.index});
    CHECK(unique.size() == 8);
    // Without shuffling the partition is the document order itself.
    if (!shuffle) CHECK(seen == document_order(c));
  }
}

TEST_CASE("shuffled batches depend only on the seed") {
  const Corpus c = corpus_of({6, 6});
  const auto a = make_batches(c, 5, 20, true, 3).batches;
  const auto b = make_batches(c, 5, 20, true, 3).batches;
  const auto d = make_batches(c, 5, 20, true, 4).batches;
  CHECK(a == b);
  CHECK(a != d);
}

TEST_CASE("document tokens concatenate sentences and drop stop words") {
  const Corpus c = parse("#doc v\nS: a b\nT: the x\nS: c\nT: y .\n");
  const auto src = document_tokens(c, Side::Source);
  REQUIRE(src.size() == 1);
  CHECK(src[0] == Tokens{"a", "b", "c"});
  StopWordList s;
  s.add("the");
  CHECK(document_tokens(c, Side::Target, &s)[0] == Tokens{"x", "y"});
}

TEST_CASE("encoded corpus mirrors the document structure") {
  const Corpus c = parse("#doc v\nS: a b\nT: x\nS: c\nT: y z\n");
  const Vocabulary vs = build_vocab(c, Side::Source, 100);
  const Vocabulary vt = build_vocab(c, Side::Target, 100);
  const EncodedCorpus e = encode_corpus(c, vs, vt);
  REQUIRE(e.size() == 1);
  REQUIRE(e[0].size() == 2);
  CHECK(e[0][0].source == vs.encode({"a", "b"}));
  CHECK(e[0][1].target == vt.encode({"y", "z"}));
}
