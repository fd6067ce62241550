#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cnmt/config.hpp"

namespace cnmt {

/// A command could not run, typically because an earlier step's artifact is
/// missing. The message names the artifact and the command producing it.
class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// gen-synthetic, train-lda, train-baseline, train-cache, translate, evaluate.
const std::vector<std::string>& pipeline_commands();

/// Where each command reads and writes, all below paths.work_dir:
///
///   data/             gen-synthetic corpora, recurrence sites, stop words
///   lda/              topic models and projection
///   baseline/         model.ckpt, pretrain.ckpt
///   <cache.name>/     cache model
///   translate-<sys>/  translations.txt, diagnostics.txt
///   eval/             report.tsv, summary.json, recurrence.tsv
///
/// Every output directory also receives config.ini (the resolved config) and
/// manifest.json (seeds and content digests of inputs and outputs).
struct Layout {
  std::filesystem::path work, data, lda, eval;
  std::filesystem::path train, dev, test, test_sites;

  explicit Layout(const Config& config);
  std::filesystem::path model_dir(const std::string& system) const { return work / system; }
  std::filesystem::path translate_dir(const std::string& system) const {
    return work / ("translate-" + system);
  }
};

/// Runs one command. Progress goes to `log`; artifacts are deterministic
/// given the config, so timings are only logged, never written.
void run_command(const std::string& command, const Config& config, std::ostream& log);

}  // namespace cnmt
