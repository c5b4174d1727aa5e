#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "smrat/augment.hpp"
#include "smrat/corpus.hpp"
#include "smrat/eval.hpp"
#include "smrat/gateway.hpp"
#include "smrat/rationale.hpp"

namespace smrat {

// Thrown with every problem found, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct CorpusEntry {
  std::string name;
  std::filesystem::path path;  // resolved
};

struct TransferPair {
  std::string source;
  std::string target;
};

struct GatewaySettings {
  GatewayMode mode = GatewayMode::kReplay;
  std::filesystem::path cache_dir;  // resolved
  std::string model = "gpt-3.5-turbo-16k";
  double temperature = 0.0;
  int max_tokens = 1024;
  size_t concurrency = 4;
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  RetryPolicy retry;
};

struct ClassifySettings {
  std::vector<size_t> shots = {0};  // per side; 0 or 5
  std::vector<RationaleMode> modes;
  int max_tokens = 4;
};

struct EvaluateSettings {
  size_t bootstrap_samples = kDefaultBootstrapSamples;
  std::uint64_t bootstrap_seed = 12345;
  double alpha = kDefaultAlpha;
};

inline const std::vector<int> kDefaultShotCounts = {5, 10, 20, 50, 100};

struct RunConfig {
  std::filesystem::path base_dir;  // directory relative paths resolve against
  Task task = Task::kERC;
  std::filesystem::path template_path;
  std::filesystem::path label_definitions_path;
  std::vector<CorpusEntry> corpora;
  std::vector<TransferPair> transfer;
  size_t context_width = kDefaultContextWidth;
  std::vector<RationaleMode> modes;
  std::vector<ShotCount> k;
  std::vector<std::uint64_t> seeds;
  SplitRatios split_ratios;
  std::uint64_t split_seed = 13;
  ValidityOptions validity;                                 // scope; aliases unused here
  std::map<std::string, std::vector<std::string>> aliases;  // speaker or "*" -> names
  GatewaySettings gateway;
  ClassifySettings classify;
  EvaluateSettings evaluate;
  FinetuneHyperparams finetune;
  std::filesystem::path output_dir;

  Json raw;  // as written, used for hashing
  std::string config_hash;

  const CorpusEntry& corpus(std::string_view name) const;
  std::vector<std::string> aliases_for(const std::string& speaker) const;
};

// Keys that change where or how a run executes but not what it computes.
// They are dropped before hashing.
Json hashable_config(const Json& raw);
std::string config_hash(const Json& raw);

// Parses and validates; relative paths resolve against `base_dir`.
RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir);
// `overrides` is merged into the file's JSON (RFC 7386) before parsing.
RunConfig load_config(const std::filesystem::path& path, const Json& overrides = Json::object());

}  // namespace smrat
