#include "cnmt/nmt.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace cnmt {

// ---------------------------------------------------------------- config text

std::string ModelConfig::serialize() const {
  std::ostringstream out;
  out.precision(17);
  out << "source_vocab=" << source_vocab << '\n'
      << "target_vocab=" << target_vocab << '\n'
      << "emb=" << emb << '\n'
      << "hidden=" << hidden << '\n'
      << "attention=" << attention << '\n'
      << "readout=" << readout << '\n'
      << "cache_hidden1=" << cache_hidden1 << '\n'
      << "cache_hidden2=" << cache_hidden2 << '\n'
      << "gate_hidden1=" << gate_hidden1 << '\n'
      << "gate_hidden2=" << gate_hidden2 << '\n'
      << "init_scale=" << init_scale << '\n'
      << "scorer_init_scale=" << scorer_init_scale << '\n';
  return out.str();
}

ModelConfig ModelConfig::deserialize(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto size = [&](const char* k) -> std::size_t {
    auto it = kv.find(k);
    if (it == kv.end()) throw std::runtime_error(std::string("model config lacks '") + k + "'");
    return std::stoul(it->second);
  };
  auto real = [&](const char* k) -> double {
    auto it = kv.find(k);
    if (it == kv.end()) throw std::runtime_error(std::string("model config lacks '") + k + "'");
    return std::stod(it->second);
  };
  ModelConfig c;
  c.source_vocab = size("source_vocab");
  c.target_vocab = size("target_vocab");
  c.emb = size("emb");
  c.hidden = size("hidden");
  c.attention = size("attention");
  c.readout = size("readout");
  c.cache_hidden1 = size("cache_hidden1");
  c.cache_hidden2 = size("cache_hidden2");
  c.gate_hidden1 = size("gate_hidden1");
  c.gate_hidden2 = size("gate_hidden2");
  c.init_scale = real("init_scale");
  c.scorer_init_scale = real("scorer_init_scale");
  return c;
}

// ---------------------------------------------------------------- construction

namespace {

Tensor uniform(std::size_t r, std::size_t c, double scale, Rng& rng) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values) v = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

Model::Model(const ModelConfig& config, std::uint64_t seed, bool with_scorer) : config_(config) {
  if (config_.source_vocab == 0 || config_.target_vocab == 0)
    throw std::invalid_argument("model needs non-empty source and target vocabularies");
  Rng rng(seed);
  add_nmt_params(rng);
  resolve();
  if (with_scorer) add_scorer(derive_seed(seed, 1));
}

Model::Model(const ModelConfig& config, ParamSet params)
    : config_(config), params_(std::move(params)) {
  resolve();
}

void Model::add_nmt_params(Rng& rng) {
  const ModelConfig& c = config_;
  const double s = c.init_scale;
  const std::size_t E = c.emb, H = c.hidden, A = c.attention, R = c.readout;
  params_.add("src.emb", uniform(c.source_vocab, E, s, rng));
  params_.add("tgt.emb", uniform(c.target_vocab, E, s, rng));
  auto gru = [&](const std::string& name, std::size_t in) {
    params_.add(name + ".Wx", uniform(in, 3 * H, s, rng));
    params_.add(name + ".Wh", uniform(H, 3 * H, s, rng));
    params_.add(name + ".b", Tensor::matrix(1, 3 * H));
  };
  gru("enc.fwd", E);
  gru("enc.bwd", E);
  params_.add("dec.init.W", uniform(H, H, s, rng));
  params_.add("dec.init.b", Tensor::matrix(1, H));
  gru("dec.feedback", E);
  params_.add("att.Wk", uniform(2 * H, A, s, rng));
  params_.add("att.Wq", uniform(H, A, s, rng));
  params_.add("att.b", Tensor::matrix(1, A));
  params_.add("att.v", uniform(A, 1, s, rng));
  gru("dec.context", 2 * H);
  params_.add("out.hidden.W", uniform(E + H + 2 * H, R, s, rng));
  params_.add("out.hidden.b", Tensor::matrix(1, R));
  params_.add("out.W", uniform(R, c.target_vocab, s, rng));
  params_.add("out.b", Tensor::matrix(1, c.target_vocab));
}

void Model::add_scorer(std::uint64_t seed) {
  if (has_scorer_) throw std::logic_error("model already has cache scorer parameters");
  Rng rng(seed);
  const ModelConfig& c = config_;
  const double s = c.scorer_init_scale;
  const std::size_t F = c.hidden + 2 * c.hidden + c.emb;
  params_.add("cache.score.Wctx", uniform(F, c.cache_hidden1, s, rng));
  params_.add("cache.score.Wword", uniform(c.emb, c.cache_hidden1, s, rng));
  params_.add("cache.score.b1", Tensor::matrix(1, c.cache_hidden1));
  params_.add("cache.score.W2", uniform(c.cache_hidden1, c.cache_hidden2, s, rng));
  params_.add("cache.score.b2", Tensor::matrix(1, c.cache_hidden2));
  params_.add("cache.score.W3", Tensor::matrix(c.cache_hidden2, 1));
  params_.add("cache.score.b3", Tensor::matrix(1, 1));
  params_.add("cache.gate.W1", uniform(F, c.gate_hidden1, s, rng));
  params_.add("cache.gate.b1", Tensor::matrix(1, c.gate_hidden1));
  params_.add("cache.gate.W2", uniform(c.gate_hidden1, c.gate_hidden2, s, rng));
  params_.add("cache.gate.b2", Tensor::matrix(1, c.gate_hidden2));
  params_.add("cache.gate.W3", Tensor::matrix(c.gate_hidden2, 1));
  params_.add("cache.gate.b3", Tensor::matrix(1, 1));
  resolve();
}

void Model::resolve() {
  auto at = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    const std::size_t i = params_.index(name);
    const Tensor& t = params_[i];
    if (t.rows() != rows || t.cols() != cols)
      throw ShapeError("parameter '" + name + "' has shape " + shape_string(t.shape) +
                       ", expected [" + std::to_string(rows) + "x" + std::to_string(cols) + "]");
    return i;
  };
  const ModelConfig& c = config_;
  const std::size_t E = c.emb, H = c.hidden, A = c.attention, R = c.readout;
  auto gru = [&](const std::string& name, std::size_t in) {
    return Gru{at(name + ".Wx", in, 3 * H), at(name + ".Wh", H, 3 * H), at(name + ".b", 1, 3 * H)};
  };
  src_emb_ = at("src.emb", c.source_vocab, E);
  tgt_emb_ = at("tgt.emb", c.target_vocab, E);
  enc_fwd_ = gru("enc.fwd", E);
  enc_bwd_ = gru("enc.bwd", E);
  init_w_ = at("dec.init.W", H, H);
  init_b_ = at("dec.init.b", 1, H);
  dec_feedback_ = gru("dec.feedback", E);
  att_keys_ = at("att.Wk", 2 * H, A);
  att_query_ = at("att.Wq", H, A);
  att_b_ = at("att.b", 1, A);
  att_v_ = at("att.v", A, 1);
  dec_context_ = gru("dec.context", 2 * H);
  read_w_ = at("out.hidden.W", E + H + 2 * H, R);
  read_b_ = at("out.hidden.b", 1, R);
  out_w_ = at("out.W", R, c.target_vocab);
  out_b_ = at("out.b", 1, c.target_vocab);

  has_scorer_ = params_.contains("cache.score.Wctx");
  if (!has_scorer_) return;
  const std::size_t F = H + 2 * H + E;
  sc_ctx_ = at("cache.score.Wctx", F, c.cache_hidden1);
  sc_word_ = at("cache.score.Wword", E, c.cache_hidden1);
  sc_b1_ = at("cache.score.b1", 1, c.cache_hidden1);
  sc_w2_ = at("cache.score.W2", c.cache_hidden1, c.cache_hidden2);
  sc_b2_ = at("cache.score.b2", 1, c.cache_hidden2);
  sc_w3_ = at("cache.score.W3", c.cache_hidden2, 1);
  sc_b3_ = at("cache.score.b3", 1, 1);
  gt_w1_ = at("cache.gate.W1", F, c.gate_hidden1);
  gt_b1_ = at("cache.gate.b1", 1, c.gate_hidden1);
  gt_w2_ = at("cache.gate.W2", c.gate_hidden1, c.gate_hidden2);
  gt_b2_ = at("cache.gate.b2", 1, c.gate_hidden2);
  gt_w3_ = at("cache.gate.W3", c.gate_hidden2, 1);
  gt_b3_ = at("cache.gate.b3", 1, 1);
}

// ---------------------------------------------------------------- graph

Var Model::gru_step(Binder& p, const Gru& g, Var x, Var h) const {
  return op::gru_gate(op::linear(x, p(g.wx), p(g.b)), op::matmul(h, p(g.wh)), h);
}

Encoded Model::encode(Binder& p, std::span<const int> source) const {
  if (source.empty()) throw std::invalid_argument("encode: empty source sentence");
  for (int id : source)
    if (id < 0 || static_cast<std::size_t>(id) >= config_.source_vocab)
      throw std::out_of_range("encode: source id " + std::to_string(id) +
                              " outside vocabulary of " + std::to_string(config_.source_vocab));
  Tape& tape = p.tape();
  const std::size_t T = source.size(), H = config_.hidden;
  Var x = op::gather(p(src_emb_), source);
  Var xf = op::linear(x, p(enc_fwd_.wx), p(enc_fwd_.b));
  Var xb = op::linear(x, p(enc_bwd_.wx), p(enc_bwd_.b));
  Var zero = tape.constant(Tensor::matrix(1, H));

  std::vector<Var> fwd(T), bwd(T);
  Var h = zero;
  for (std::size_t j = 0; j < T; ++j) {
    h = op::gru_gate(op::row(xf, j), op::matmul(h, p(enc_fwd_.wh)), h);
    fwd[j] = h;
  }
  h = zero;
  for (std::size_t j = T; j-- > 0;) {
    h = op::gru_gate(op::row(xb, j), op::matmul(h, p(enc_bwd_.wh)), h);
    bwd[j] = h;
  }
  Encoded enc;
  enc.forward_states = op::stack(fwd);
  enc.backward_states = op::stack(bwd);
  const Var halves[] = {enc.forward_states, enc.backward_states};
  enc.annotations = op::concat(halves);
  enc.attention_keys = attention_keys(p, enc.annotations);
  enc.initial_state = op::tanh(op::linear(bwd[0], p(init_w_), p(init_b_)));
  return enc;
}

Var Model::attention_keys(Binder& p, Var annotations) const {
  return op::linear(annotations, p(att_keys_), p(att_b_));
}

void Model::feedback(Binder& p, Var prev_state, int prev_word, DecoderOutput& out) const {
  if (prev_word != kStartWord &&
      (prev_word < 0 || static_cast<std::size_t>(prev_word) >= config_.target_vocab))
    throw std::out_of_range("decoder: target id " + std::to_string(prev_word) + " out of range");
  const int ids[] = {prev_word};
  out.prev_embedding = op::gather(p(tgt_emb_), ids);
  out.feedback_state = gru_step(p, dec_feedback_, out.prev_embedding, prev_state);
}

void Model::attend(Binder& p, const Encoded& enc, DecoderOutput& out) const {
  Var query = op::matmul(out.feedback_state, p(att_query_));
  Var hidden = op::tanh(op::add(enc.attention_keys, query));
  out.energies = op::transpose(op::matmul(hidden, p(att_v_)));
  out.alpha = op::softmax(out.energies);
  out.context = op::matmul(out.alpha, enc.annotations);
}

void Model::readout(Binder& p, DecoderOutput& out, std::span<const double> dropout_mask) const {
  out.state = gru_step(p, dec_context_, out.context, out.feedback_state);
  const Var parts[] = {out.state, out.context, out.prev_embedding};
  out.features = op::concat(parts);
  const Var read_in[] = {out.prev_embedding, out.state, out.context};
  Var t = op::tanh(op::linear(op::concat(read_in), p(read_w_), p(read_b_)));
  if (!dropout_mask.empty()) t = op::dropout(t, dropout_mask);
  out.p_nmt = op::softmax(op::linear(t, p(out_w_), p(out_b_)));
}

DecoderOutput Model::step(Binder& p, const Encoded& enc, Var prev_state, int prev_word,
                          std::span<const double> dropout_mask) const {
  DecoderOutput out;
  feedback(p, prev_state, prev_word, out);
  attend(p, enc, out);
  readout(p, out, dropout_mask);
  return out;
}

CacheScores Model::score_cache(Binder& p, const DecoderOutput& out,
                               std::span<const int> members) const {
  if (!has_scorer_) throw std::logic_error("model has no cache scorer");
  if (members.empty()) return {};
  Var context = op::linear(out.features, p(sc_ctx_), p(sc_b1_));
  Var words = op::matmul(op::gather(p(tgt_emb_), members), p(sc_word_));
  Var h1 = op::tanh(op::add(words, context));
  Var h2 = op::tanh(op::linear(h1, p(sc_w2_), p(sc_b2_)));
  CacheScores s;
  s.scores = op::linear(h2, p(sc_w3_), p(sc_b3_));
  s.p_cache = op::softmax(op::transpose(s.scores));
  return s;
}

Var Model::gate(Binder& p, const DecoderOutput& out) const {
  if (!has_scorer_) throw std::logic_error("model has no gate network");
  Var h1 = op::tanh(op::linear(out.features, p(gt_w1_), p(gt_b1_)));
  Var h2 = op::tanh(op::linear(h1, p(gt_w2_), p(gt_b2_)));
  return op::sigmoid(op::linear(h2, p(gt_w3_), p(gt_b3_)));
}

// ---------------------------------------------------------------- value-level API

EncoderAnnotations encode(const Model& model, std::span<const int> source) {
  Tape tape(false);
  Binder p(tape, model.params(), nullptr);
  Encoded enc = model.encode(p, source);
  return {enc.annotations.value(), enc.forward_states.value(), enc.backward_states.value(),
          enc.initial_state.value()};
}

Attention attend(const Model& model, const Tensor& prev_state, int prev_word,
                 const EncoderAnnotations& enc) {
  Tape tape(false);
  Binder p(tape, model.params(), nullptr);
  Encoded e;
  e.annotations = tape.view(enc.annotations);
  e.attention_keys = model.attention_keys(p, e.annotations);
  DecoderOutput out;
  model.feedback(p, tape.view(prev_state), prev_word, out);
  model.attend(p, e, out);
  return {out.context.value(), out.alpha.value(), out.energies.value()};
}

StepResult decode_step(const Model& model, const Tensor& prev_state, int prev_word,
                       const Tensor& context) {
  Tape tape(false);
  Binder p(tape, model.params(), nullptr);
  DecoderOutput out;
  model.feedback(p, tape.view(prev_state), prev_word, out);
  out.context = tape.view(context);
  model.readout(p, out, {});
  return {out.state.value(), out.p_nmt.value()};
}

double sentence_nll(const Model& model, std::span<const int> source, std::span<const int> target,
                    Gradients* grads) {
  if (target.empty()) throw std::invalid_argument("sentence_nll: empty target sentence");
  Tape tape(grads != nullptr);
  Binder p(tape, model.params(), grads);
  Encoded enc = model.encode(p, source);
  Var state = enc.initial_state;
  std::vector<Var> terms;
  int prev = kStartWord;
  for (int y : target) {
    DecoderOutput out = model.step(p, enc, state, prev);
    terms.push_back(op::neg_log(op::pick(out.p_nmt, static_cast<std::size_t>(y))));
    state = out.state;
    prev = y;
  }
  Var loss = op::sum_all(terms);
  if (grads) tape.backward(loss);
  return loss.item();
}

}  // namespace cnmt
