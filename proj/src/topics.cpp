#include "cnmt/topics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cnmt/params.hpp"
#include "cnmt/rng.hpp"

namespace cnmt {

namespace {

std::size_t sample_index(const std::vector<double>& weights, double total, Rng& rng) {
  const double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    acc += weights[k];
    if (u < acc) return k;
  }
  return weights.size() - 1;
}

void build_index(TopicModel& m) {
  m.index.clear();
  for (std::size_t i = 0; i < m.words.size(); ++i) m.index.emplace(m.words[i], static_cast<int>(i));
}

}  // namespace

int TopicModel::word_id(const std::string& w) const {
  auto it = index.find(w);
  return it == index.end() ? -1 : it->second;
}

std::vector<double> TopicModel::phi(std::size_t topic) const {
  const std::size_t v = vocab_size();
  std::vector<double> p(v);
  const double denom = static_cast<double>(topic_total[topic]) + static_cast<double>(v) * beta;
  for (std::size_t w = 0; w < v; ++w) p[w] = (static_cast<double>(word_topic[w][topic]) + beta) / denom;
  return p;
}

std::vector<double> TopicModel::doc_distribution(std::size_t d) const {
  const auto& counts = doc_topic.at(d);
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
  std::vector<double> p(topics);
  for (std::size_t k = 0; k < topics; ++k)
    p[k] = (static_cast<double>(counts[k]) + alpha) / (n + static_cast<double>(topics) * alpha);
  return p;
}

std::string TopicModel::vocab_digest() const {
  std::string all;
  for (const std::string& w : words) {
    all += w;
    all += '\n';
  }
  return fnv1a_hex(all);
}

namespace {

TopicModel fit_chain(const std::vector<Tokens>& docs, const LdaOptions& opt, std::uint64_t seed) {
  if (opt.topics < 2) throw std::invalid_argument("LDA needs at least 2 topics");
  if (!(opt.alpha > 0.0) || !(opt.beta > 0.0))
    throw std::invalid_argument("LDA hyperparameters alpha and beta must be positive");
  std::size_t total_tokens = 0;
  for (const Tokens& d : docs) total_tokens += d.size();
  if (docs.empty() || total_tokens == 0) throw std::invalid_argument("LDA corpus is empty");

  TopicModel m;
  m.topics = opt.topics;
  m.alpha = opt.alpha;
  m.beta = opt.beta;
  std::set<std::string> vocab;
  for (const Tokens& d : docs) vocab.insert(d.begin(), d.end());
  m.words.assign(vocab.begin(), vocab.end());
  build_index(m);

  const std::size_t K = opt.topics, V = m.words.size();
  m.word_topic.assign(V, std::vector<std::int64_t>(K, 0));
  m.topic_total.assign(K, 0);
  m.doc_topic.assign(docs.size(), std::vector<std::int64_t>(K, 0));

  std::vector<std::vector<int>> word_ids(docs.size()), z(docs.size());
  Rng rng(seed);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const std::string& w : docs[d]) {
      const int wid = m.word_id(w);
      const int k = static_cast<int>(rng.below(K));
      word_ids[d].push_back(wid);
      z[d].push_back(k);
      ++m.word_topic[wid][k];
      ++m.topic_total[k];
      ++m.doc_topic[d][k];
    }
  }

  const double vbeta = static_cast<double>(V) * opt.beta;
  std::vector<double> weights(K);
  for (std::size_t sweep = 0; sweep < opt.sweeps; ++sweep) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      auto& dt = m.doc_topic[d];
      for (std::size_t i = 0; i < word_ids[d].size(); ++i) {
        const int w = word_ids[d][i];
        const int old = z[d][i];
        --m.word_topic[w][old];
        --m.topic_total[old];
        --dt[old];
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          weights[k] = (static_cast<double>(dt[k]) + opt.alpha) *
                       (static_cast<double>(m.word_topic[w][k]) + opt.beta) /
                       (static_cast<double>(m.topic_total[k]) + vbeta);
          total += weights[k];
        }
        const int k = static_cast<int>(sample_index(weights, total, rng));
        z[d][i] = k;
        ++m.word_topic[w][k];
        ++m.topic_total[k];
        ++dt[k];
      }
    }
  }
  return m;
}

}  // namespace

double log_likelihood(const TopicModel& m) {
  const double K = static_cast<double>(m.topics), V = static_cast<double>(m.vocab_size());
  double ll = 0.0;
  for (std::size_t k = 0; k < m.topics; ++k) {
    ll += std::lgamma(V * m.beta) - std::lgamma(static_cast<double>(m.topic_total[k]) + V * m.beta);
    for (const auto& row : m.word_topic)
      ll += std::lgamma(static_cast<double>(row[k]) + m.beta) - std::lgamma(m.beta);
  }
  for (const auto& counts : m.doc_topic) {
    double n = 0.0;
    for (std::int64_t c : counts) {
      n += static_cast<double>(c);
      ll += std::lgamma(static_cast<double>(c) + m.alpha) - std::lgamma(m.alpha);
    }
    ll += std::lgamma(K * m.alpha) - std::lgamma(n + K * m.alpha);
  }
  return ll;
}

TopicModel fit_lda(const std::vector<Tokens>& docs, const LdaOptions& opt) {
  if (opt.restarts == 0) throw std::invalid_argument("LDA needs at least one restart");
  TopicModel best = fit_chain(docs, opt, opt.seed);
  double best_ll = log_likelihood(best);
  for (std::size_t r = 1; r < opt.restarts; ++r) {
    TopicModel m = fit_chain(docs, opt, derive_seed(opt.seed, r));
    const double ll = log_likelihood(m);
    if (ll > best_ll) best = std::move(m), best_ll = ll;
  }
  return best;
}

std::vector<double> infer_topics(const TopicModel& model, const Tokens& doc, std::size_t sweeps,
                                 std::uint64_t seed, bool* fallback) {
  const std::size_t K = model.topics;
  std::vector<int> ids;
  for (const std::string& w : doc) {
    const int id = model.word_id(w);
    if (id >= 0) ids.push_back(id);
  }
  if (fallback) *fallback = ids.empty();
  if (ids.empty()) {
    std::cerr << "warning: document has no words known to the topic model; using a uniform "
                 "topic distribution\n";
    return std::vector<double>(K, 1.0 / static_cast<double>(K));
  }
  std::vector<std::vector<double>> phi(K);
  for (std::size_t k = 0; k < K; ++k) phi[k] = model.phi(k);

  Rng rng(seed);
  std::vector<int> z(ids.size());
  std::vector<std::int64_t> counts(K, 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    z[i] = static_cast<int>(rng.below(K));
    ++counts[z[i]];
  }
  std::vector<double> weights(K);
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      --counts[z[i]];
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        weights[k] = (static_cast<double>(counts[k]) + model.alpha) * phi[k][ids[i]];
        total += weights[k];
      }
      z[i] = static_cast<int>(sample_index(weights, total, rng));
      ++counts[z[i]];
    }
  }
  std::vector<double> p(K);
  const double denom = static_cast<double>(ids.size()) + static_cast<double>(K) * model.alpha;
  for (std::size_t k = 0; k < K; ++k) p[k] = (static_cast<double>(counts[k]) + model.alpha) / denom;
  return p;
}

int dominant_topic(std::span<const double> dist) {
  if (dist.empty()) throw std::invalid_argument("dominant_topic of an empty distribution");
  int best = 0;
  for (std::size_t k = 1; k < dist.size(); ++k)
    if (dist[k] > dist[best]) best = static_cast<int>(k);
  return best;
}

std::vector<std::string> top_words(const TopicModel& model, std::size_t topic, std::size_t n) {
  if (topic >= model.topics)
    throw std::out_of_range("topic " + std::to_string(topic) + " outside model of " +
                            std::to_string(model.topics) + " topics");
  const std::vector<double> p = model.phi(topic);
  std::vector<int> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
  order.resize(std::min(n, order.size()));
  std::vector<std::string> out;
  for (int id : order) out.push_back(model.words[id]);
  return out;
}

// ---------------------------------------------------------------- projection

int TopicProjection::project(int source_topic) const {
  if (source_topic < 0 || static_cast<std::size_t>(source_topic) >= source_topics)
    throw std::out_of_range("source topic " + std::to_string(source_topic) + " out of range");
  if (empty[source_topic]) return fallback;
  return dominant_topic(prob[source_topic]);
}

TopicProjection projection_from_counts(std::vector<std::vector<std::int64_t>> counts) {
  TopicProjection p;
  p.source_topics = counts.size();
  p.target_topics = counts.empty() ? 0 : counts[0].size();
  std::vector<double> column(p.target_topics, 0.0);
  std::int64_t grand = 0;
  for (std::size_t s = 0; s < p.source_topics; ++s) {
    const std::int64_t total = std::accumulate(counts[s].begin(), counts[s].end(), std::int64_t{0});
    grand += total;
    p.empty.push_back(total == 0);
    std::vector<double> row(p.target_topics, 0.0);
    for (std::size_t t = 0; t < p.target_topics; ++t) {
      column[t] += static_cast<double>(counts[s][t]);
      if (total > 0) row[t] = static_cast<double>(counts[s][t]) / static_cast<double>(total);
    }
    p.prob.push_back(std::move(row));
  }
  if (grand == 0) throw std::invalid_argument("topic projection needs at least one aligned document pair");
  p.fallback = dominant_topic(column);
  p.counts = std::move(counts);
  return p;
}

TopicProjection estimate_projection(const std::vector<std::pair<int, int>>& dominant_pairs,
                                    std::size_t source_topics, std::size_t target_topics) {
  if (dominant_pairs.empty())
    throw std::invalid_argument("topic projection needs at least one aligned document pair");
  std::vector<std::vector<std::int64_t>> counts(source_topics,
                                                std::vector<std::int64_t>(target_topics, 0));
  for (auto [zs, zt] : dominant_pairs) ++counts.at(zs).at(zt);
  return projection_from_counts(std::move(counts));
}

TopicProjection estimate_projection(const TopicModel& source, const TopicModel& target,
                                    const std::vector<std::pair<Tokens, Tokens>>& aligned_docs,
                                    std::size_t infer_sweeps, std::uint64_t seed) {
  std::vector<std::pair<int, int>> events;
  for (std::size_t i = 0; i < aligned_docs.size(); ++i) {
    const auto ps = infer_topics(source, aligned_docs[i].first, infer_sweeps, derive_seed(seed, 2 * i));
    const auto pt = infer_topics(target, aligned_docs[i].second, infer_sweeps, derive_seed(seed, 2 * i + 1));
    events.emplace_back(dominant_topic(ps), dominant_topic(pt));
  }
  return estimate_projection(events, source.topics, target.topics);
}

// ---------------------------------------------------------------- files

void save_topic_model(const std::string& path, const TopicModel& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write topic model '" + path + "'");
  out.precision(17);
  out << "cnmt-lda 1\n";
  out << "topics " << m.topics << " alpha " << m.alpha << " beta " << m.beta << '\n';
  out << "vocab_digest " << m.vocab_digest() << '\n';
  out << "words " << m.words.size() << '\n';
  for (const std::string& w : m.words) out << w << '\n';
  for (const auto& row : m.word_topic) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << row[k];
    out << '\n';
  }
  out << "docs " << m.doc_topic.size() << '\n';
  for (const auto& row : m.doc_topic) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << row[k];
    out << '\n';
  }
}

TopicModel load_topic_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topic model '" + path + "'");
  auto fail = [&](const std::string& why) -> std::runtime_error {
    return std::runtime_error("topic model '" + path + "': " + why);
  };
  std::string tag, key, digest;
  int version = 0;
  in >> tag >> version;
  if (tag != "cnmt-lda" || version != 1) throw fail("unsupported format");
  TopicModel m;
  std::string k1, k2, k3;
  in >> k1 >> m.topics >> k2 >> m.alpha >> k3 >> m.beta;
  in >> key >> digest;
  std::size_t v = 0;
  in >> key >> v;
  if (!in || key != "words") throw fail("malformed header");
  m.words.resize(v);
  for (auto& w : m.words) in >> w;
  build_index(m);
  if (m.vocab_digest() != digest) throw fail("vocabulary digest mismatch");
  m.word_topic.assign(v, std::vector<std::int64_t>(m.topics, 0));
  m.topic_total.assign(m.topics, 0);
  for (auto& row : m.word_topic)
    for (std::size_t k = 0; k < m.topics; ++k) {
      in >> row[k];
      m.topic_total[k] += row[k];
    }
  std::size_t d = 0;
  in >> key >> d;
  if (!in || key != "docs") throw fail("malformed document table");
  m.doc_topic.assign(d, std::vector<std::int64_t>(m.topics, 0));
  for (auto& row : m.doc_topic)
    for (auto& c : row) in >> c;
  if (!in) throw fail("truncated");
  return m;
}

void save_projection(const std::string& path, const TopicProjection& p) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write projection '" + path + "'");
  out << "cnmt-projection 1\n" << p.source_topics << ' ' << p.target_topics << '\n';
  for (const auto& row : p.counts) {
    for (std::size_t t = 0; t < row.size(); ++t) out << (t ? " " : "") << row[t];
    out << '\n';
  }
}

TopicProjection load_projection(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open projection '" + path + "'");
  std::string tag;
  int version = 0;
  std::size_t ks = 0, kt = 0;
  in >> tag >> version >> ks >> kt;
  if (tag != "cnmt-projection" || version != 1)
    throw std::runtime_error("projection '" + path + "': unsupported format");
  std::vector<std::vector<std::int64_t>> counts(ks, std::vector<std::int64_t>(kt, 0));
  for (auto& row : counts)
    for (auto& c : row) in >> c;
  if (!in) throw std::runtime_error("projection '" + path + "': truncated");
  return projection_from_counts(std::move(counts));
}

}  // namespace cnmt
