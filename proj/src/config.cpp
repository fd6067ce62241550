#include "cnmt/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cnmt/scorer.hpp"

namespace cnmt {

const std::vector<ConfigKey>& config_keys() {
  using K = KeyType;
  // Full-scale values are noted where they differ from the small defaults.
  static const std::vector<ConfigKey> keys = {
      {"paths.work_dir", K::String, "run", "directory holding every artifact"},

      {"corpus.train", K::String, "", "training corpus; default <work_dir>/data/train.txt"},
      {"corpus.dev", K::String, "", "held-out corpus; default <work_dir>/data/dev.txt"},
      {"corpus.test", K::String, "", "test corpus; default <work_dir>/data/test.txt"},
      {"corpus.test_sites", K::String, "",
       "recurrence sites of the test corpus; default <work_dir>/data/test_sites.tsv if present"},
      {"corpus.stop_words", K::String, "", "stop-word file; empty selects data/stop_words.txt if present, else the built-in list"},
      {"corpus.vocab_cap", K::Int, "2000", "vocabulary size including reserved ids (full scale 30000)",
       4, 1e7},
      {"corpus.batch_size", K::Int, "16", "sentences per update (full scale 80)", 1, 1e5},
      {"corpus.max_len", K::Int, "20", "longest training sentence (full scale 50)", 1, 1e4},

      {"model.emb", K::Int, "32", "embedding size (full scale 620)", 1, 1e5},
      {"model.hidden", K::Int, "64", "recurrent state size (full scale 1000)", 1, 1e5},
      {"model.attention", K::Int, "64", "attention hidden size", 1, 1e5},
      {"model.readout", K::Int, "32", "output hidden layer size", 1, 1e5},
      {"model.cache_hidden1", K::Int, "64", "cache scorer first layer (full scale 1000)", 1, 1e5},
      {"model.cache_hidden2", K::Int, "32", "cache scorer second layer (full scale 500)", 1, 1e5},
      {"model.gate_hidden1", K::Int, "32", "gate first layer (full scale 500)", 1, 1e5},
      {"model.gate_hidden2", K::Int, "16", "gate second layer (full scale 200)", 1, 1e5},
      {"model.init_scale", K::Real, "0.1", "uniform init range of the translation model", 1e-9, 10},
      {"model.scorer_init_scale", K::Real, "0.05", "uniform init range of scorer and gate", 1e-9,
       10},

      {"cache.name", K::String, "cache", "subdirectory of the cache model"},
      {"cache.dynamic_capacity", K::Int, "20", "dynamic cache size (full scale 100)", 0, 1e6},
      {"cache.topic_capacity", K::Int, "50", "topic cache size (full scale 200)", 0, 1e6},
      {"cache.gate", K::Gate, "learned", "learned or fixed:<value>"},

      {"lda.topics", K::Int, "8", "topics per side (full scale 100)", 2, 1e5},
      {"lda.alpha", K::Real, "0.5", "document-topic prior", 1e-12, 1e6},
      {"lda.beta", K::Real, "0.1", "topic-word prior", 1e-12, 1e6},
      {"lda.sweeps", K::Int, "200", "Gibbs sweeps", 1, 1e7},
      {"lda.restarts", K::Int, "4", "independent Gibbs chains; the most likely is kept", 1, 1000},
      {"lda.infer_sweeps", K::Int, "50", "fold-in sweeps for unseen documents", 1, 1e7},
      {"lda.seed", K::Int, "1", "sampler seed", 0, 9e15},

      {"train.pretrain_epochs", K::Int, "8", "baseline epochs before cache training", 0, 1e6},
      {"train.cache_epochs", K::Int, "4", "joint epochs; the baseline trains as many more", 0, 1e6},
      {"train.dropout", K::Real, "0.5", "output-layer dropout rate", 0, 0.99},
      {"train.clip_norm", K::Real, "5", "gradient norm clip; 0 disables", 0, 1e9},
      {"train.rho", K::Real, "0.95", "Adadelta decay", 1e-9, 0.999999},
      {"train.eps", K::Real, "1e-6", "Adadelta stabilizer", 1e-300, 1},
      {"train.seed", K::Int, "1", "initialization, shuffling and dropout seed", 0, 9e15},
      {"train.workers", K::Int, "1", "threads computing per-sentence gradients", 1, 1024},

      {"decode.system", K::String, "cache", "model subdirectory used by translate"},
      {"decode.beam", K::Int, "4", "beam width (full scale 10)", 1, 1000},
      {"decode.length_factor", K::Int, "3", "max length = factor * source + extra", 1, 100},
      {"decode.length_extra", K::Int, "5", "max length = factor * source + extra", 0, 1000},
      {"decode.gate", K::ModelGate, "model", "model, learned or fixed:<value>"},
      {"decode.use_cache", K::Bool, "true", "mix in the cache when the model has a scorer"},
      {"decode.workers", K::Int, "1", "documents decoded in parallel", 1, 1024},
      {"decode.seed", K::Int, "1", "seed for topic inference of test documents", 0, 9e15},

      {"eval.systems", K::String, "baseline,cache", "comma-separated model subdirectories"},
      {"eval.embedding_dim", K::Int, "32", "coherence embedding size (full scale 200)", 1, 10000},
      {"eval.embedding_epochs", K::Int, "5", "skip-gram epochs", 1, 10000},
      {"eval.embedding_window", K::Int, "2", "skip-gram context window", 1, 100},
      {"eval.embedding_negatives", K::Int, "5", "negative samples per pair", 1, 100},
      {"eval.seed", K::Int, "1", "embedding seed", 0, 9e15},
      {"eval.workers", K::Int, "1", "threads for held-out likelihood", 1, 1024},

      {"synthetic.seed", K::Int, "7", "generator seed", 0, 9e15},
      {"synthetic.train_documents", K::Int, "2000", "training documents", 1, 1e7},
      {"synthetic.dev_documents", K::Int, "100", "held-out documents", 1, 1e7},
      {"synthetic.test_documents", K::Int, "50", "test documents", 1, 1e7},
      {"synthetic.topics", K::Int, "4", "document topics", 1, 1000},
      {"synthetic.topic_words", K::Int, "30", "words per topic", 1, 1e6},
      {"synthetic.common_words", K::Int, "40", "topic-neutral words", 1, 1e6},
      {"synthetic.rare_words", K::Int, "300", "rare recurring words", 1, 1e6},
      {"synthetic.planted_documents", K::Int, "400", "planted-topic documents", 1, 1e7},
      {"synthetic.planted_vocab", K::Int, "400", "planted-topic vocabulary per side", 2, 1e7},
      {"synthetic.planted_length", K::Int, "40", "planted-topic document length", 1, 1e6},
  };
  return keys;
}

namespace {

const ConfigKey& find_key(const std::string& key) {
  for (const ConfigKey& k : config_keys())
    if (k.name == key) return k;
  throw ValidationError("unknown configuration key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& value, bool integral) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = integral ? static_cast<double>(std::stoll(value, &used)) : std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(v))
    throw ValidationError(key + ": '" + value + "' is not " +
                          (integral ? "an integer" : "a number"));
  return v;
}

}  // namespace

Config::Config() {
  for (const ConfigKey& k : config_keys()) values_[k.name] = k.fallback;
}

void Config::set(const std::string& key, const std::string& value_in) {
  const ConfigKey& k = find_key(key);
  const std::string value = trim(value_in);
  switch (k.type) {
    case KeyType::Int:
    case KeyType::Real: {
      const double v = parse_number(key, value, k.type == KeyType::Int);
      if (k.min != k.max && (v < k.min || v > k.max)) {
        std::ostringstream msg;
        msg << key << ": " << value << " outside [" << k.min << ", " << k.max << "]";
        throw ValidationError(msg.str());
      }
      break;
    }
    case KeyType::ModelGate:
      if (value == "model") break;
      [[fallthrough]];
    case KeyType::Gate:
      try {
        GateSetting::parse(value);
      } catch (const std::exception& e) {
        throw ValidationError(key + ": " + e.what());
      }
      break;
    case KeyType::Bool:
      if (value != "true" && value != "false")
        throw ValidationError(key + ": expected true or false, got '" + value + "'");
      break;
    case KeyType::String:
      break;
  }
  values_[key] = value;
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ValidationError("unknown configuration key '" + key + "'");
  return it->second;
}

std::int64_t Config::integer(const std::string& key) const { return std::stoll(raw(key)); }

std::size_t Config::size(const std::string& key) const {
  return static_cast<std::size_t>(integer(key));
}

double Config::real(const std::string& key) const { return std::stod(raw(key)); }

bool Config::flag(const std::string& key) const { return raw(key) == "true"; }

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw ValidationError(where + "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ValidationError(where + "expected 'key = value'");
    if (section.empty()) throw ValidationError(where + "key outside any [section]");
    try {
      c.set(section + "." + trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str(), path);
}

std::string Config::render() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    out << key.substr(dot + 1) << " = " << value << '\n';
  }
  return out.str();
}

}  // namespace cnmt
