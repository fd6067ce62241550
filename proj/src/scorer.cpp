#include "cnmt/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>

#include "cnmt/rng.hpp"

namespace cnmt {

GateSetting GateSetting::fixed_at(double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("fixed gate value must lie in [0, 1]");
  return {true, v};
}

GateSetting GateSetting::parse(const std::string& text) {
  if (text == "learned") return learned();
  if (text.rfind("fixed:", 0) == 0) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(text.substr(6), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() - 6)
      throw std::invalid_argument("gate mode '" + text + "': expected fixed:<number>");
    return fixed_at(v);
  }
  throw std::invalid_argument("gate mode '" + text + "': expected 'learned' or 'fixed:<value>'");
}

std::string GateSetting::str() const {
  if (!fixed) return "learned";
  char buf[64];
  std::snprintf(buf, sizeof buf, "fixed:%.17g", value);
  return buf;
}

// ---------------------------------------------------------------- value-level

namespace {

DecoderOutput features_for(const Model& model, Binder& p, const Tensor& state,
                           const Tensor& context, int prev_word) {
  Tape& tape = p.tape();
  DecoderOutput out;
  const int ids[] = {prev_word};
  const std::size_t emb = model.params().index("tgt.emb");
  out.prev_embedding = op::gather(p(emb), ids);
  out.state = tape.view(state);
  out.context = tape.view(context);
  const Var parts[] = {out.state, out.context, out.prev_embedding};
  out.features = op::concat(parts);
  return out;
}

}  // namespace

std::vector<double> score_cache(const Model& model, const Tensor& state, const Tensor& context,
                                int prev_word, const CacheState& cache) {
  const std::vector<int> members = cache.members();
  if (members.empty()) return {};
  Tape tape(false);
  Binder p(tape, model.params(), nullptr);
  DecoderOutput out = features_for(model, p, state, context, prev_word);
  CacheScores s = model.score_cache(p, out, members);
  return std::vector<double>(s.scores.data(), s.scores.data() + members.size());
}

std::vector<double> cache_softmax(std::span<const double> scores) {
  std::vector<double> p(scores.begin(), scores.end());
  softmax_inplace(p);
  return p;
}

double gate_value(const Model& model, const Tensor& state, const Tensor& context, int prev_word,
                  const GateSetting& gate) {
  if (gate.fixed) return gate.value;
  Tape tape(false);
  Binder p(tape, model.params(), nullptr);
  DecoderOutput out = features_for(model, p, state, context, prev_word);
  return model.gate(p, out).item();
}

std::vector<double> mix(std::span<const double> p_nmt, std::span<const int> members,
                        std::span<const double> p_cache, double alpha) {
  if (members.size() != p_cache.size())
    throw std::invalid_argument("mix: " + std::to_string(members.size()) + " cache members but " +
                                std::to_string(p_cache.size()) + " cache probabilities");
  std::vector<double> p(p_nmt.begin(), p_nmt.end());
  if (members.empty()) return p;
  for (double& v : p) v *= alpha;
  const double rest = 1.0 - alpha;
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (members[k] < 0 || static_cast<std::size_t>(members[k]) >= p.size())
      throw std::out_of_range("mix: cache member " + std::to_string(members[k]) + " out of range");
    p[members[k]] += rest * p_cache[k];
  }
  return p;
}

// ---------------------------------------------------------------- training loss

Var record_sentence_loss(const Model& model, Binder& p, const EncodedPair& pair,
                         const CacheState* start, const LossOptions& options) {
  const std::vector<int>& target = pair.target;
  if (target.empty()) throw std::invalid_argument("sentence loss: empty target sentence");
  if (start && !model.has_scorer() && !start->empty())
    throw std::logic_error("sentence loss: cache given to a model without a scorer");
  Tape& tape = p.tape();
  Encoded enc = model.encode(p, pair.source);
  Var state = enc.initial_state;

  const bool drop = options.dropout > 0.0;
  Rng rng(options.dropout_seed);
  std::vector<double> mask;
  const double keep_scale = drop ? 1.0 / (1.0 - options.dropout) : 1.0;

  std::optional<CacheState> cache;
  if (start) cache.emplace(*start);

  std::vector<Var> terms;
  terms.reserve(target.size());
  int prev = kStartWord;
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (drop) {
      mask.assign(model.config().readout, 0.0);
      for (double& m : mask) m = rng.uniform() < options.dropout ? 0.0 : keep_scale;
    }
    if (cache && t > 0) cache->dynamic.insert(prev);
    DecoderOutput out = model.step(p, enc, state, prev, mask);
    const int y = target[t];
    Var p_nmt_y = op::pick(out.p_nmt, static_cast<std::size_t>(y));
    const std::vector<int> members = cache ? cache->members() : std::vector<int>{};
    if (members.empty()) {
      terms.push_back(op::neg_log(p_nmt_y));
    } else {
      Var alpha = options.gate.fixed ? tape.constant(Tensor::scalar(options.gate.value))
                                     : model.gate(p, out);
      Var mixed = op::mul(p_nmt_y, alpha);
      const auto hit = std::find(members.begin(), members.end(), y);
      if (hit != members.end()) {
        CacheScores s = model.score_cache(p, out, members);
        Var p_cache_y = op::pick(s.p_cache, static_cast<std::size_t>(hit - members.begin()));
        mixed = op::add(mixed, op::mul(p_cache_y, op::affine(alpha, -1.0, 1.0)));
      }
      terms.push_back(op::neg_log(mixed));
    }
    state = out.state;
    prev = y;
  }
  return op::sum_all(terms);
}

double sentence_loss(const Model& model, const EncodedPair& pair, const CacheState* start,
                     const LossOptions& options, Gradients* grads) {
  Tape tape(grads != nullptr);
  Binder p(tape, model.params(), grads);
  Var loss = record_sentence_loss(model, p, pair, start, options);
  if (grads) tape.backward(loss);
  return loss.item();
}

std::vector<double> reference_probabilities(const Model& model, const EncodedPair& pair,
                                            const CacheState* start, const GateSetting& gate) {
  Tape tape(false);
  Binder p(tape, model.params(), nullptr);
  Encoded enc = model.encode(p, pair.source);
  Var state = enc.initial_state;
  std::optional<CacheState> cache;
  if (start) cache.emplace(*start);
  std::vector<double> probs;
  int prev = kStartWord;
  for (std::size_t t = 0; t < pair.target.size(); ++t) {
    if (cache && t > 0) cache->dynamic.insert(prev);
    DecoderOutput out = model.step(p, enc, state, prev);
    const int y = pair.target[t];
    double py = out.p_nmt.data()[y];
    const std::vector<int> members = cache ? cache->members() : std::vector<int>{};
    if (!members.empty()) {
      const double alpha = gate.fixed ? gate.value : model.gate(p, out).item();
      py *= alpha;
      const auto hit = std::find(members.begin(), members.end(), y);
      if (hit != members.end()) {
        CacheScores s = model.score_cache(p, out, members);
        py += (1.0 - alpha) * s.p_cache.data()[hit - members.begin()];
      }
    }
    probs.push_back(py);
    state = out.state;
    prev = y;
  }
  return probs;
}

}  // namespace cnmt
