#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cnmt/params.hpp"
#include "cnmt/rng.hpp"
#include "cnmt/tape.hpp"

namespace cnmt {

/// Network dimensions. Defaults are desk-scale; a full-size run uses
/// emb 620, hidden 1000, cache 1000/500 and gate 500/200.
struct ModelConfig {
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;
  std::size_t emb = 32;
  std::size_t hidden = 64;
  std::size_t attention = 64;
  std::size_t readout = 32;
  std::size_t cache_hidden1 = 64;
  std::size_t cache_hidden2 = 32;
  std::size_t gate_hidden1 = 32;
  std::size_t gate_hidden2 = 16;
  double init_scale = 0.1;
  double scorer_init_scale = 0.05;

  std::string serialize() const;
  static ModelConfig deserialize(const std::string& text);
};

/// Sentinel previous-word id for the first decoder step (zero embedding).
inline constexpr int kStartWord = -1;

/// Encoder output recorded on a tape.
struct Encoded {
  Var annotations;  // (T, 2H), row j = [forward h_j ; backward h_j]
  Var attention_keys;  // (T, A), annotations projected for the energy network
  Var initial_state;   // (1, H)
  Var forward_states;  // (T, H)
  Var backward_states; // (T, H)
};

/// One decoder step recorded on a tape.
struct DecoderOutput {
  Var prev_embedding;  // (1, E)
  Var feedback_state;  // (1, H) GRU(s_{t-1}, y_{t-1})
  Var energies;        // (1, T)
  Var alpha;           // (1, T)
  Var context;         // (1, 2H)
  Var state;           // (1, H) s_t
  Var p_nmt;           // (1, V)
  Var features;        // (1, H + 2H + E) = [s_t ; c_t ; emb(y_{t-1})]
};

/// Cache-model outputs for one step.
struct CacheScores {
  Var scores;   // (m, 1)
  Var p_cache;  // (1, m)
};

/// Encoder-decoder with feedback attention plus the cache scorer and gate
/// networks. All weights live in one ParamSet; the scorer groups are absent
/// from a baseline model until add_scorer() is called.
class Model {
 public:
  Model() = default;
  Model(const ModelConfig& config, std::uint64_t seed, bool with_scorer);
  // Adopts trained parameters; a baseline parameter set gets no scorer.
  Model(const ModelConfig& config, ParamSet params);

  const ModelConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  bool has_scorer() const { return has_scorer_; }

  /// Fresh scorer and gate weights: uniform in +-scorer_init_scale with
  /// zero output layers, so scores start equal and the gate at 0.5.
  void add_scorer(std::uint64_t seed);

  Encoded encode(Binder& p, std::span<const int> source) const;
  Var attention_keys(Binder& p, Var annotations) const;
  // Step from s_{t-1} given the previous target word (kStartWord at t = 0).
  DecoderOutput step(Binder& p, const Encoded& enc, Var prev_state, int prev_word,
                     std::span<const double> dropout_mask = {}) const;
  // The pieces of step(), usable on their own.
  void feedback(Binder& p, Var prev_state, int prev_word, DecoderOutput& out) const;
  void attend(Binder& p, const Encoded& enc, DecoderOutput& out) const;
  void readout(Binder& p, DecoderOutput& out, std::span<const double> dropout_mask) const;

  CacheScores score_cache(Binder& p, const DecoderOutput& out, std::span<const int> members) const;
  Var gate(Binder& p, const DecoderOutput& out) const;

 private:
  struct Gru {
    std::size_t wx, wh, b;
  };
  void add_nmt_params(Rng& rng);
  void resolve();
  Var gru_step(Binder& p, const Gru& g, Var x, Var h) const;

  ModelConfig config_;
  ParamSet params_;
  bool has_scorer_ = false;

  std::size_t src_emb_ = 0, tgt_emb_ = 0;
  Gru enc_fwd_{}, enc_bwd_{}, dec_feedback_{}, dec_context_{};
  std::size_t init_w_ = 0, init_b_ = 0;
  std::size_t att_keys_ = 0, att_query_ = 0, att_b_ = 0, att_v_ = 0;
  std::size_t read_w_ = 0, read_b_ = 0, out_w_ = 0, out_b_ = 0;
  std::size_t sc_ctx_ = 0, sc_word_ = 0, sc_b1_ = 0, sc_w2_ = 0, sc_b2_ = 0, sc_w3_ = 0, sc_b3_ = 0;
  std::size_t gt_w1_ = 0, gt_b1_ = 0, gt_w2_ = 0, gt_b2_ = 0, gt_w3_ = 0, gt_b3_ = 0;
};

// ---------------------------------------------------------------- value-level API

struct EncoderAnnotations {
  Tensor annotations;      // (T, 2H)
  Tensor forward_states;   // (T, H)
  Tensor backward_states;  // (T, H)
  Tensor initial_state;    // (1, H)
};

EncoderAnnotations encode(const Model& model, std::span<const int> source);

struct Attention {
  Tensor context;  // (1, 2H)
  Tensor alpha;    // (1, T)
  Tensor energies; // (1, T)
};

Attention attend(const Model& model, const Tensor& prev_state, int prev_word,
                 const EncoderAnnotations& enc);

struct StepResult {
  Tensor state;  // (1, H)
  Tensor p_nmt;  // (1, V)
};

StepResult decode_step(const Model& model, const Tensor& prev_state, int prev_word,
                       const Tensor& context);

/// Teacher-forced -sum_t log p_nmt(y_t | y_<t, x). `target` is scored as
/// given (callers append the end-of-sentence id). Accumulates gradients into
/// `grads` when non-null.
double sentence_nll(const Model& model, std::span<const int> source, std::span<const int> target,
                    Gradients* grads = nullptr);

}  // namespace cnmt
