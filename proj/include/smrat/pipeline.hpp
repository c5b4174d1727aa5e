#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "smrat/config.hpp"
#include "smrat/corpus.hpp"
#include "smrat/gateway.hpp"

namespace smrat {

// A required input from an earlier stage is not on disk.
class MissingArtifactError : public Error {
 public:
  explicit MissingArtifactError(const std::filesystem::path& p)
      : Error("missing upstream artifact: " + p.string() + " (run the earlier stage first)") {}
};

struct StageResult {
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> warnings;
  size_t failures = 0;
};

// Stage-per-method driver. Every stage reads only files written by earlier
// stages (plus the configured inputs) and writes deterministic files under
// the output directory, each stamped with the config hash.
//
//   corpus/<c>.meta.json                   ingest
//   rationales/<c>.jsonl, .summary.json    rationalize
//   splits/<c>/k<k>_s<seed>.json           split
//   augmented/<c>/<MODE>/*.jsonl           augment
//   bundles/{ID,TF}/.../manifest.json      export
//   predictions/<c>/<MODE>/*.jsonl         classify
//   reports/<c>/<setting>_k<k>/<MODE>.json evaluate
//   report/table.{csv,txt}, runs_long.csv  report
class Pipeline {
 public:
  // `transport` overrides the HTTP transport used in live/record mode.
  explicit Pipeline(RunConfig config, std::shared_ptr<Transport> transport = nullptr);

  StageResult ingest();
  StageResult rationalize();
  StageResult split();
  StageResult augment();
  StageResult export_bundles();
  StageResult classify();
  StageResult evaluate(bool force = false);
  StageResult report(bool force = false);
  StageResult run_all(bool force = false);

  const RunConfig& config() const { return config_; }
  std::filesystem::path out(const std::filesystem::path& rel) const { return config_.output_dir / rel; }

 private:
  struct LoadedCorpus {
    Corpus corpus;
    DialoguePartition partition;
  };
  LoadedCorpus load_ingested(const std::string& name) const;
  Gateway make_gateway() const;
  Json header(Json extra) const;

  RunConfig config_;
  std::shared_ptr<Transport> transport_;
};

}  // namespace smrat
