#include "cnmt/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "cnmt/rng.hpp"

namespace cnmt {

namespace {

std::vector<int> combined_members(const DynamicCache& dynamic, const TopicCache& topic) {
  std::vector<int> m = dynamic.entries();
  for (int id : topic.entries())
    if (!dynamic.contains(id)) m.push_back(id);
  return m;
}

struct Candidate {
  double score;
  std::size_t hyp;
  int word;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.hyp != b.hyp) return a.hyp < b.hyp;
  return a.word < b.word;
}

// One expansion of a live hypothesis: log-probabilities over the vocabulary
// plus what is needed to trace the chosen word.
struct Expansion {
  std::vector<double> logp;
  std::vector<double> p;
  Tensor state;
  std::vector<int> members;
  std::vector<double> p_cache;
  double alpha = 1.0;
};

}  // namespace

Hypothesis beam_search(const Model& model, std::span<const int> source, const CacheState* cache,
                       const DecodeOptions& options) {
  if (options.beam == 0) throw std::invalid_argument("beam width must be at least 1");
  const bool use_cache = options.use_cache && cache != nullptr;
  if (use_cache && !model.has_scorer())
    throw std::logic_error("cache decoding needs a model with scorer parameters");

  const EncoderAnnotations enc = encode(model, source);
  Tensor keys;
  {
    Tape tape(false);
    Binder p(tape, model.params(), nullptr);
    keys = model.attention_keys(p, tape.view(enc.annotations)).value();
  }
  const std::size_t V = model.config().target_vocab;
  const std::size_t max_len = options.length_factor * source.size() + options.length_extra;

  DynamicCache start_dynamic = cache ? cache->dynamic : DynamicCache();
  std::vector<Hypothesis> live(1);
  live[0].state = enc.initial_state;
  live[0].cache = start_dynamic;
  std::vector<Hypothesis> finished;

  auto expand = [&](const Hypothesis& h) {
    Tape tape(false);
    Binder p(tape, model.params(), nullptr);
    Encoded e;
    e.annotations = tape.view(enc.annotations);
    e.attention_keys = tape.view(keys);
    const int prev = h.words.empty() ? kStartWord : h.words.back();
    DecoderOutput out = model.step(p, e, tape.view(h.state), prev);
    Expansion x;
    x.state = out.state.value();
    const double* pn = out.p_nmt.data();
    x.p.assign(pn, pn + V);
    if (use_cache) x.members = combined_members(h.cache, cache->topic);
    if (!x.members.empty()) {
      CacheScores s = model.score_cache(p, out, x.members);
      x.p_cache.assign(s.p_cache.data(), s.p_cache.data() + x.members.size());
      x.alpha = options.gate.fixed ? options.gate.value : model.gate(p, out).item();
      x.p = mix(x.p, x.members, x.p_cache, x.alpha);
    }
    x.logp.resize(V);
    for (std::size_t y = 0; y < V; ++y) x.logp[y] = std::log(x.p[y]);
    return x;
  };

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Expansion> ex;
    ex.reserve(live.size());
    std::vector<Candidate> pool;
    pool.reserve(live.size() * V);
    for (std::size_t h = 0; h < live.size(); ++h) {
      ex.push_back(expand(live[h]));
      for (std::size_t y = 0; y < V; ++y)
        pool.push_back({live[h].score + ex.back().logp[y], h, static_cast<int>(y)});
    }
    const std::size_t keep = std::min(options.beam, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + keep, pool.end(), better);

    std::vector<Hypothesis> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = pool[k];
      const Expansion& x = ex[c.hyp];
      Hypothesis n;
      n.score = c.score;
      n.words = live[c.hyp].words;
      n.trace = live[c.hyp].trace;
      StepTrace st;
      st.word = c.word;
      st.alpha = x.alpha;
      st.cache_size = x.members.size();
      const auto hit = std::find(x.members.begin(), x.members.end(), c.word);
      st.hit = hit != x.members.end();
      if (st.hit && x.p[c.word] > 0.0)
        st.cache_share = (1.0 - x.alpha) * x.p_cache[hit - x.members.begin()] / x.p[c.word];
      n.trace.push_back(st);
      if (c.word == Vocabulary::kEos) {
        n.finished = true;
        n.cache = live[c.hyp].cache;
        finished.push_back(std::move(n));
        continue;
      }
      n.words.push_back(c.word);
      n.state = x.state;
      n.cache = live[c.hyp].cache;
      n.cache.insert(c.word);
      next.push_back(std::move(n));
    }
    live = std::move(next);
    if (!finished.empty() && !live.empty()) {
      double best_finished = finished[0].score;
      for (const auto& f : finished) best_finished = std::max(best_finished, f.score);
      // Scores only decrease as hypotheses grow.
      if (best_finished >= live.front().score) break;
    }
  }

  const std::vector<Hypothesis>& pick = finished.empty() ? live : finished;
  if (pick.empty()) throw std::logic_error("beam search produced no hypothesis");
  std::size_t best = 0;
  for (std::size_t i = 1; i < pick.size(); ++i)
    if (pick[i].score > pick[best].score) best = i;
  return pick[best];
}

void commit_hypothesis(CacheState& cache, const Hypothesis& hypothesis) {
  for (int w : hypothesis.words) cache.dynamic.insert(w);
}

std::vector<int> topic_word_ids(const TopicModel& target, int topic, const Vocabulary& target_vocab,
                                std::size_t capacity) {
  // Over-fetch so that capacity survivors remain after dropping OOV words.
  std::vector<int> ids;
  for (const auto& w : top_words(target, static_cast<std::size_t>(topic), target.vocab_size())) {
    if (ids.size() == capacity) break;
    if (!target_vocab.contains(w)) continue;
    const int id = target_vocab.id(w);
    if (!Vocabulary::reserved(id)) ids.push_back(id);
  }
  return ids;
}

std::vector<int> document_topic_ids(const Tokens& source_text, const TopicResources& topics,
                                    const Vocabulary& target_vocab, std::size_t capacity,
                                    std::uint64_t seed, int* source_topic, int* target_topic,
                                    bool* fallback) {
  if (!topics.source || !topics.target || !topics.projection)
    throw std::invalid_argument("topic cache needs source and target topic models and a projection");
  Tokens text;
  for (const auto& w : source_text)
    if (!topics.stop_words || !topics.stop_words->contains(w)) text.push_back(w);
  const std::vector<double> dist = infer_topics(*topics.source, text, topics.infer_sweeps, seed);
  const int zs = dominant_topic(dist);
  const int zt = topics.projection->project(zs);
  if (source_topic) *source_topic = zs;
  if (target_topic) *target_topic = zt;
  if (fallback) *fallback = topics.projection->empty[zs];
  return topic_word_ids(*topics.target, zt, target_vocab, capacity);
}

DocumentOutput translate_document(const Model& model, const Vocabulary& source_vocab,
                                  const Vocabulary& target_vocab, const Document& doc,
                                  const TopicResources* topics, const ExclusionMask& mask,
                                  const DocumentDecodeSettings& settings, std::uint64_t doc_seed) {
  DocumentOutput out;
  out.id = doc.id;
  CacheState cache(settings.dynamic_capacity, settings.topic_capacity, mask);
  cache.clear_all();
  const bool use_cache = settings.decode.use_cache;
  // The topic cache is filled even when unused so diagnostics can report it.
  if (topics) {
    Tokens text;
    for (const auto& s : doc.sentences) text.insert(text.end(), s.source.begin(), s.source.end());
    out.topic_cache = document_topic_ids(text, *topics, target_vocab, settings.topic_capacity,
                                         doc_seed, &out.source_topic, &out.target_topic,
                                         &out.projection_fallback);
    cache.topic.fill_ids(out.topic_cache, target_vocab.size());
    out.topic_cache = cache.topic.entries();
  }
  for (const auto& pair : doc.sentences) {
    const std::vector<int> src = source_vocab.encode(pair.source);
    SentenceOutput s;
    s.dynamic_before = cache.dynamic.entries();
    const Hypothesis best = beam_search(model, src, use_cache ? &cache : nullptr, settings.decode);
    s.tokens = target_vocab.decode(best.words);
    s.score = best.score;
    s.trace = best.trace;
    commit_hypothesis(cache, best);
    out.sentences.push_back(std::move(s));
  }
  return out;
}

void write_translations(std::ostream& out, const std::vector<DocumentOutput>& docs) {
  for (const auto& d : docs) {
    out << "#doc " << d.id << '\n';
    for (const auto& s : d.sentences) {
      for (std::size_t i = 0; i < s.tokens.size(); ++i) out << (i ? " " : "") << s.tokens[i];
      out << '\n';
    }
  }
}

std::vector<std::vector<Tokens>> read_translations(std::istream& in, std::vector<std::string>* ids) {
  std::vector<std::vector<Tokens>> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("#doc", 0) == 0) {
      docs.emplace_back();
      if (ids) {
        std::string id = line.size() > 5 ? line.substr(5) : "";
        ids->push_back(id);
      }
      continue;
    }
    if (docs.empty())
      throw std::runtime_error("translations: line " + std::to_string(line_no) +
                               " precedes the first #doc header");
    std::istringstream words(line);
    Tokens t;
    for (std::string w; words >> w;) t.push_back(w);
    docs.back().push_back(std::move(t));
  }
  return docs;
}

void write_diagnostics(std::ostream& out, const std::vector<DocumentOutput>& docs,
                       const Vocabulary& target_vocab) {
  auto words = [&](const std::vector<int>& ids) {
    std::string s;
    for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? " " : "") + target_vocab.token(ids[i]);
    return s;
  };
  char buf[160];
  for (const auto& d : docs) {
    out << "#doc " << d.id << '\n';
    out << "source_topic\t" << d.source_topic << '\n';
    out << "target_topic\t" << d.target_topic << (d.projection_fallback ? "\tfallback" : "")
        << '\n';
    out << "topic_cache\t" << words(d.topic_cache) << '\n';
    for (std::size_t i = 0; i < d.sentences.size(); ++i) {
      const SentenceOutput& s = d.sentences[i];
      out << "sentence\t" << i << '\n';
      out << "dynamic\t" << words(s.dynamic_before) << '\n';
      for (std::size_t t = 0; t < s.trace.size(); ++t) {
        const StepTrace& st = s.trace[t];
        std::snprintf(buf, sizeof buf, "step\t%zu\t%s\t%.6f\t%d\t%.6f\t%zu\n", t,
                      target_vocab.token(st.word).c_str(), st.alpha, st.hit ? 1 : 0,
                      st.cache_share, st.cache_size);
        out << buf;
      }
    }
  }
}

}  // namespace cnmt
