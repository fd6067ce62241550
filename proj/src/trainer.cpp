#include "cnmt/trainer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "cnmt/rng.hpp"

namespace cnmt {

SentenceCaches training_caches(const EncodedCorpus& data, std::size_t dynamic_capacity,
                               std::size_t topic_capacity, const ExclusionMask& mask,
                               const std::vector<std::vector<int>>& topic_ids) {
  if (topic_ids.size() != data.size())
    throw std::invalid_argument("training caches: " + std::to_string(topic_ids.size()) +
                                " topic lists for " + std::to_string(data.size()) + " documents");
  const std::size_t vocab = mask->size();
  SentenceCaches out(data.size());
  for (std::size_t d = 0; d < data.size(); ++d) {
    CacheState running(dynamic_capacity, topic_capacity, mask);
    running.topic.fill_ids(topic_ids[d], vocab);
    out[d].reserve(data[d].size());
    for (const EncodedPair& pair : data[d]) {
      out[d].push_back(running);
      for (int y : pair.target) running.dynamic.insert(y);
    }
  }
  return out;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_lock;
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(error_lock);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  const std::size_t count = std::min(workers, n);
  for (std::size_t t = 1; t < count; ++t) threads.emplace_back(run);
  run();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

Trainer::Trainer(Model& model, const TrainOptions& options)
    : model_(model), options_(options), state_(model.params(), options.rho, options.eps) {
  if (options_.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(options_.dropout >= 0.0 && options_.dropout < 1.0))
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  if (options_.clip_norm < 0.0) throw std::invalid_argument("clip norm must be nonnegative");
}

EpochStats Trainer::epoch(const Corpus& corpus, const EncodedCorpus& data,
                          const SentenceCaches* caches) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t epoch_seed = derive_seed(options_.seed, epoch_);
  const BatchPlan plan =
      make_batches(corpus, options_.batch_size, options_.max_len, true, epoch_seed);

  EpochStats stats;
  stats.epoch = ++epoch_;
  stats.skipped = plan.skipped_too_long;
  Gradients total(model_.params());
  std::vector<Gradients> per(options_.batch_size, Gradients(model_.params()));
  std::vector<double> losses(options_.batch_size);
  double loss_sum = 0.0;

  for (const auto& batch : plan.batches) {
    parallel_for(batch.size(), options_.workers, [&](std::size_t i) {
      const SentenceRef& ref = batch[i];
      const EncodedPair& pair = data[ref.doc][ref.index];
      const CacheState* cache = caches ? &(*caches)[ref.doc][ref.index] : nullptr;
      LossOptions lo;
      lo.gate = options_.gate;
      lo.dropout = options_.dropout;
      lo.dropout_seed = derive_seed(epoch_seed, (ref.doc << 20) ^ ref.index);
      per[i].zero();
      losses[i] = sentence_loss(model_, pair, cache, lo, &per[i]);
    });
    total.zero();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      total.add(per[i]);
      loss_sum += losses[i];
      stats.tokens += data[batch[i].doc][batch[i].index].target.size();
    }
    stats.sentences += batch.size();
    total.scale(1.0 / static_cast<double>(batch.size()));
    if (options_.clip_norm > 0.0) {
      const double norm = total.norm();
      if (norm > options_.clip_norm) total.scale(options_.clip_norm / norm);
    }
    adadelta_step(model_.params(), total, state_);
  }
  stats.loss_per_token = stats.tokens ? loss_sum / static_cast<double>(stats.tokens) : 0.0;
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return stats;
}

NllTotal corpus_nll(const Model& model, const EncodedCorpus& data, const SentenceCaches* caches,
                    const GateSetting& gate, std::size_t workers) {
  std::vector<SentenceRef> refs;
  for (std::size_t d = 0; d < data.size(); ++d)
    for (std::size_t i = 0; i < data[d].size(); ++i) refs.push_back({d, i});
  std::vector<double> losses(refs.size());
  LossOptions lo;
  lo.gate = gate;
  parallel_for(refs.size(), workers, [&](std::size_t k) {
    const SentenceRef& r = refs[k];
    const CacheState* cache = caches ? &(*caches)[r.doc][r.index] : nullptr;
    losses[k] = sentence_loss(model, data[r.doc][r.index], cache, lo, nullptr);
  });
  NllTotal t;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    t.loss += losses[k];
    t.tokens += data[refs[k].doc][refs[k].index].target.size();
  }
  return t;
}

void save_model(const std::string& path, const ModelBundle& bundle) {
  Checkpoint c;
  c.metadata = bundle.metadata;
  c.metadata["config"] = bundle.model.config().serialize();
  c.metadata["source_vocab"] = bundle.source_vocab.serialize();
  c.metadata["target_vocab"] = bundle.target_vocab.serialize();
  c.params = bundle.model.params();
  save_checkpoint(path, c);
}

ModelBundle load_model(const std::string& path) {
  Checkpoint c = load_checkpoint(path);
  for (const char* key : {"config", "source_vocab", "target_vocab"})
    if (!c.metadata.count(key))
      throw std::runtime_error("checkpoint '" + path + "' lacks '" + key + "' metadata");
  ModelBundle b;
  const ModelConfig config = ModelConfig::deserialize(c.metadata.at("config"));
  b.source_vocab = Vocabulary::deserialize(c.metadata.at("source_vocab"));
  b.target_vocab = Vocabulary::deserialize(c.metadata.at("target_vocab"));
  if (b.source_vocab.size() != config.source_vocab || b.target_vocab.size() != config.target_vocab)
    throw std::runtime_error("checkpoint '" + path + "': vocabulary sizes disagree with config");
  b.model = Model(config, std::move(c.params));
  c.metadata.erase("config");
  c.metadata.erase("source_vocab");
  c.metadata.erase("target_vocab");
  b.metadata = std::move(c.metadata);
  return b;
}

}  // namespace cnmt
