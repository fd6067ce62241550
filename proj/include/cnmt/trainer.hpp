#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cnmt/adadelta.hpp"
#include "cnmt/cache.hpp"
#include "cnmt/corpus.hpp"
#include "cnmt/nmt.hpp"
#include "cnmt/scorer.hpp"

namespace cnmt {

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::size_t max_len = 20;
  double dropout = 0.5;
  double clip_norm = 5.0;  // global gradient norm; 0 disables
  double rho = 0.95;
  double eps = 1e-6;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  GateSetting gate;  // cache training only
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss_per_token = 0.0;
  std::size_t tokens = 0;
  std::size_t sentences = 0;
  std::size_t skipped = 0;
  double seconds = 0.0;
};

/// Cache at the start of every training sentence: the dynamic part holds the
/// reference translations of the preceding sentences of the same document,
/// the topic part the given per-document topical ids.
using SentenceCaches = std::vector<std::vector<CacheState>>;
SentenceCaches training_caches(const EncodedCorpus& data, std::size_t dynamic_capacity,
                               std::size_t topic_capacity, const ExclusionMask& mask,
                               const std::vector<std::vector<int>>& topic_ids);

/// Mini-batch Adadelta on teacher-forced loss. Per-sentence gradients are
/// computed independently and summed in sentence order, so the trajectory is
/// the same for every worker count.
class Trainer {
 public:
  Trainer(Model& model, const TrainOptions& options);

  // One pass over the corpus. With caches the loss is the mixed-model NLL.
  EpochStats epoch(const Corpus& corpus, const EncodedCorpus& data, const SentenceCaches* caches);
  std::size_t epochs_done() const { return epoch_; }

 private:
  Model& model_;
  TrainOptions options_;
  AdadeltaState state_;
  std::size_t epoch_ = 0;
};

struct NllTotal {
  double loss = 0.0;
  std::size_t tokens = 0;
  double per_token() const { return tokens ? loss / static_cast<double>(tokens) : 0.0; }
};

/// Teacher-forced NLL over a corpus without dropout.
NllTotal corpus_nll(const Model& model, const EncodedCorpus& data, const SentenceCaches* caches,
                    const GateSetting& gate, std::size_t workers = 1);

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// A model plus the vocabularies it was trained with.
struct ModelBundle {
  Model model;
  Vocabulary source_vocab;
  Vocabulary target_vocab;
  std::map<std::string, std::string> metadata;
};

void save_model(const std::string& path, const ModelBundle& bundle);
ModelBundle load_model(const std::string& path);

}  // namespace cnmt
