#include "cnmt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "cnmt/rng.hpp"

namespace cnmt {

// ---------------------------------------------------------------- BLEU

namespace {

using Ngrams = std::map<std::vector<std::string>, std::size_t>;

Ngrams ngrams(const Tokens& s, std::size_t n) {
  Ngrams out;
  if (s.size() < n) return out;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++out[std::vector<std::string>(s.begin() + i, s.begin() + i + n)];
  return out;
}

}  // namespace

BleuStats bleu_stats(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references,
                     std::size_t max_n) {
  if (hypotheses.empty()) throw std::invalid_argument("bleu: empty hypothesis set");
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("bleu: " + std::to_string(hypotheses.size()) +
                                " hypotheses but " + std::to_string(references.size()) +
                                " references");
  if (max_n == 0) throw std::invalid_argument("bleu: max_n must be positive");
  BleuStats s;
  s.matches.assign(max_n, 0);
  s.totals.assign(max_n, 0);
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    const Tokens& h = hypotheses[k];
    const Tokens& r = references[k];
    s.hypothesis_length += h.size();
    s.reference_length += r.size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      const Ngrams hn = ngrams(h, n), rn = ngrams(r, n);
      for (const auto& [gram, count] : hn) {
        s.totals[n - 1] += count;
        const auto it = rn.find(gram);
        if (it != rn.end()) s.matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  const double c = static_cast<double>(s.hypothesis_length);
  const double r = static_cast<double>(s.reference_length);
  s.brevity_penalty = c == 0.0 ? 0.0 : (c > r ? 1.0 : std::exp(1.0 - r / c));
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (s.matches[n] == 0) return s;  // score stays 0
    log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
  }
  s.score = s.brevity_penalty * std::exp(log_sum / static_cast<double>(max_n));
  return s;
}

double bleu(const std::vector<Tokens>& hypotheses, const std::vector<Tokens>& references,
            std::size_t max_n) {
  return bleu_stats(hypotheses, references, max_n).score;
}

// ---------------------------------------------------------------- coherence

const std::vector<double>* EmbeddingTable::find(const std::string& w) const {
  const auto it = vectors.find(w);
  return it == vectors.end() ? nullptr : &it->second;
}

std::vector<double> sentence_vector(const Tokens& sentence, const EmbeddingTable& table) {
  std::vector<double> mean(table.dim, 0.0);
  std::size_t covered = 0;
  for (const auto& w : sentence) {
    const std::vector<double>* v = table.find(w);
    if (!v) continue;
    for (std::size_t i = 0; i < table.dim; ++i) mean[i] += (*v)[i];
    ++covered;
  }
  if (covered)
    for (double& x : mean) x /= static_cast<double>(covered);
  return mean;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: vectors differ in length");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

namespace {

bool is_zero(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

}  // namespace

std::vector<double> document_coherence(const std::vector<Tokens>& sentences,
                                       const EmbeddingTable& table) {
  std::vector<std::vector<double>> vecs;
  for (const auto& s : sentences) vecs.push_back(sentence_vector(s, table));
  std::vector<double> sims;
  for (std::size_t i = 1; i < vecs.size(); ++i)
    if (!is_zero(vecs[i - 1]) && !is_zero(vecs[i])) sims.push_back(cosine(vecs[i - 1], vecs[i]));
  return sims;
}

CoherenceReport coherence(const std::vector<std::vector<Tokens>>& documents,
                          const std::vector<std::string>& ids, const EmbeddingTable& table) {
  CoherenceReport r;
  double total = 0.0;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    const std::string id = d < ids.size() ? ids[d] : std::to_string(d);
    std::size_t usable = 0;
    for (const auto& s : documents[d])
      if (!is_zero(sentence_vector(s, table))) ++usable;
    if (usable < 2) {
      std::cerr << "warning: coherence skips document " << id
                << ": fewer than two sentences with known words\n";
      r.skipped.push_back(id);
      continue;
    }
    std::vector<double> sims = document_coherence(documents[d], table);
    for (double x : sims) total += x;
    r.pairs += sims.size();
    r.documents.push_back(id);
    r.similarities.push_back(std::move(sims));
  }
  r.mean = r.pairs ? total / static_cast<double>(r.pairs) : 0.0;
  return r;
}

EmbeddingTable train_embeddings(const std::vector<Tokens>& sentences,
                                const EmbeddingOptions& options) {
  if (sentences.empty()) throw std::invalid_argument("train_embeddings: empty corpus");
  if (options.dim == 0) throw std::invalid_argument("train_embeddings: dim must be positive");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences)
    for (const auto& w : s) ++counts[w];
  std::vector<std::string> words;
  std::map<std::string, int> index;
  std::vector<double> cumulative;
  double mass = 0.0;
  for (const auto& [w, c] : counts) {
    index[w] = static_cast<int>(words.size());
    words.push_back(w);
    mass += std::pow(static_cast<double>(c), 0.75);
    cumulative.push_back(mass);
  }
  const std::size_t V = words.size(), D = options.dim;
  std::vector<std::vector<int>> ids;
  std::size_t tokens = 0;
  for (const auto& s : sentences) {
    std::vector<int> row;
    for (const auto& w : s) row.push_back(index[w]);
    tokens += row.size();
    ids.push_back(std::move(row));
  }

  Rng rng(options.seed);
  std::vector<double> in(V * D), out(V * D, 0.0);
  for (double& x : in) x = rng.uniform(-0.5, 0.5) / static_cast<double>(D);
  auto sample = [&] {
    const double u = rng.uniform() * mass;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<int>(std::min<std::size_t>(it - cumulative.begin(), V - 1));
  };
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

  const double total_steps = static_cast<double>(options.epochs * std::max<std::size_t>(tokens, 1));
  double step = 0.0;
  std::vector<double> grad(D);
  for (std::size_t e = 0; e < options.epochs; ++e) {
    for (const auto& s : ids) {
      for (std::size_t i = 0; i < s.size(); ++i, step += 1.0) {
        const double lr = options.learning_rate * std::max(1e-4, 1.0 - step / total_steps);
        const std::size_t lo = i >= options.window ? i - options.window : 0;
        const std::size_t hi = std::min(s.size(), i + options.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          double* v = &in[s[i] * D];
          std::fill(grad.begin(), grad.end(), 0.0);
          for (std::size_t k = 0; k <= options.negatives; ++k) {
            const int target = k == 0 ? s[j] : sample();
            if (k > 0 && target == s[j]) continue;
            const double label = k == 0 ? 1.0 : 0.0;
            double* u = &out[target * D];
            double dot = 0.0;
            for (std::size_t d = 0; d < D; ++d) dot += v[d] * u[d];
            const double g = lr * (label - sigmoid(dot));
            for (std::size_t d = 0; d < D; ++d) {
              grad[d] += g * u[d];
              u[d] += g * v[d];
            }
          }
          for (std::size_t d = 0; d < D; ++d) v[d] += grad[d];
        }
      }
    }
  }
  EmbeddingTable t;
  t.dim = D;
  for (std::size_t w = 0; w < V; ++w)
    t.vectors[words[w]] = std::vector<double>(in.begin() + w * D, in.begin() + (w + 1) * D);
  return t;
}

void save_embeddings(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embeddings '" + path + "'");
  out << table.vectors.size() << ' ' << table.dim << '\n';
  char buf[32];
  for (const auto& [w, v] : table.vectors) {
    out << w;
    for (double x : v) {
      std::snprintf(buf, sizeof buf, " %.17g", x);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing embeddings '" + path + "'");
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read embeddings '" + path + "'");
  std::size_t n = 0;
  EmbeddingTable t;
  if (!(in >> n >> t.dim)) throw std::runtime_error("embeddings '" + path + "': bad header");
  for (std::size_t k = 0; k < n; ++k) {
    std::string w;
    std::vector<double> v(t.dim);
    if (!(in >> w)) throw std::runtime_error("embeddings '" + path + "': truncated");
    for (double& x : v)
      if (!(in >> x)) throw std::runtime_error("embeddings '" + path + "': truncated");
    t.vectors[w] = std::move(v);
  }
  return t;
}

// ---------------------------------------------------------------- cache overlap

std::vector<CacheDump> read_cache_dumps(std::istream& in) {
  std::vector<CacheDump> out;
  std::string line;
  auto split = [](const std::string& text) {
    std::istringstream s(text);
    std::vector<std::string> w;
    for (std::string t; s >> t;) w.push_back(t);
    return w;
  };
  while (std::getline(in, line)) {
    if (line.rfind("#doc", 0) == 0) {
      out.emplace_back();
      out.back().id = line.size() > 5 ? line.substr(5) : "";
      continue;
    }
    if (out.empty()) continue;
    const auto tab = line.find('\t');
    const std::string key = line.substr(0, tab);
    const std::string rest = tab == std::string::npos ? "" : line.substr(tab + 1);
    if (key == "topic_cache") out.back().topic = split(rest);
    if (key == "dynamic") out.back().dynamic_before.push_back(split(rest));
  }
  return out;
}

OverlapStats cache_overlap_stats(const std::vector<std::vector<Tokens>>& translations,
                                 const std::vector<CacheDump>& caches,
                                 const StopWordList& stop_words) {
  if (translations.size() != caches.size())
    throw std::invalid_argument("overlap: " + std::to_string(translations.size()) +
                                " translated documents but " + std::to_string(caches.size()) +
                                " cache dumps");
  OverlapStats s;
  double sent_topic = 0.0, sent_union = 0.0, first_topic = 0.0;
  for (std::size_t d = 0; d < translations.size(); ++d) {
    const std::set<std::string> topic(caches[d].topic.begin(), caches[d].topic.end());
    ++s.documents;
    for (std::size_t i = 0; i < translations[d].size(); ++i) {
      std::set<std::string> words;
      for (const auto& w : translations[d][i])
        if (!stop_words.contains(w) && w != Vocabulary::kUnkToken) words.insert(w);
      std::set<std::string> both = topic;
      if (i < caches[d].dynamic_before.size())
        both.insert(caches[d].dynamic_before[i].begin(), caches[d].dynamic_before[i].end());
      std::size_t in_topic = 0, in_union = 0;
      for (const auto& w : words) {
        in_topic += topic.count(w);
        in_union += both.count(w);
      }
      sent_topic += static_cast<double>(in_topic);
      sent_union += static_cast<double>(in_union);
      if (i == 0) first_topic += static_cast<double>(in_topic);
      ++s.sentences;
    }
  }
  if (s.sentences) {
    s.sentence_topic = sent_topic / static_cast<double>(s.sentences);
    s.sentence_union = sent_union / static_cast<double>(s.sentences);
  }
  if (s.documents) {
    s.document_topic = sent_topic / static_cast<double>(s.documents);
    s.document_union = sent_union / static_cast<double>(s.documents);
    first_topic /= static_cast<double>(s.documents);
  }
  s.first_sentence_topic = first_topic;
  return s;
}

}  // namespace cnmt
