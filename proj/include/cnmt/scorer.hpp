#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cnmt/cache.hpp"
#include "cnmt/corpus.hpp"
#include "cnmt/nmt.hpp"

namespace cnmt {

/// Learned gate, or a constant mixing weight for ablations.
struct GateSetting {
  bool fixed = false;
  double value = 0.5;

  static GateSetting learned() { return {}; }
  static GateSetting fixed_at(double v);
  // "learned" or "fixed:<value>" with value in [0, 1].
  static GateSetting parse(const std::string& text);
  std::string str() const;
};

// ---------------------------------------------------------------- value-level

/// g_cache score of every member of `cache.members()`, in that order.
std::vector<double> score_cache(const Model& model, const Tensor& state, const Tensor& context,
                                int prev_word, const CacheState& cache);

/// Softmax restricted to the cache members.
std::vector<double> cache_softmax(std::span<const double> scores);

/// Gate value alpha_t in (0, 1), or the fixed value.
double gate_value(const Model& model, const Tensor& state, const Tensor& context, int prev_word,
                  const GateSetting& gate);

/// p(y) = (1 - alpha) p_cache(y) + alpha p_nmt(y), with p_cache zero outside
/// `members`. With no members the result is p_nmt unchanged.
std::vector<double> mix(std::span<const double> p_nmt, std::span<const int> members,
                        std::span<const double> p_cache, double alpha);

// ---------------------------------------------------------------- training loss

struct LossOptions {
  GateSetting gate;
  double dropout = 0.0;  // output-layer dropout rate; 0 disables
  std::uint64_t dropout_seed = 0;
};

/// Teacher-forced NLL of the mixed distribution for one sentence pair.
/// `start` is the cache at sentence start; the reference prefix is inserted
/// into a private copy of its dynamic part step by step. With start == nullptr
/// (or an empty cache at a step) the step reduces to -log p_nmt(y_t) and the
/// computation is identical to the baseline.
double sentence_loss(const Model& model, const EncodedPair& pair, const CacheState* start,
                     const LossOptions& options, Gradients* grads);

/// Records the same loss on an existing binder; returns the scalar loss Var.
Var record_sentence_loss(const Model& model, Binder& p, const EncodedPair& pair,
                         const CacheState* start, const LossOptions& options);

/// Per-step teacher-forced probability of each reference token under the
/// (possibly mixed) model, for analysis.
std::vector<double> reference_probabilities(const Model& model, const EncodedPair& pair,
                                            const CacheState* start, const GateSetting& gate);

}  // namespace cnmt
