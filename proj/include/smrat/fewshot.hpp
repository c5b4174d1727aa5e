#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "smrat/augment.hpp"
#include "smrat/corpus.hpp"
#include "smrat/gateway.hpp"
#include "smrat/prompt.hpp"

namespace smrat {

enum class ProbeAnswer { kYes, kNo, kUnparseable };
std::string to_string(ProbeAnswer a);
ProbeAnswer probe_answer_from_string(std::string_view s);

// Strict: only the first whitespace-delimited token counts, case-folded with
// punctuation removed. Anything but "yes"/"no" is unparseable.
ProbeAnswer parse_probe_answer(std::string_view response);

struct BinaryProbe {
  std::string label;
  RenderedPrompt prompt;
  ProbeAnswer answer = ProbeAnswer::kUnparseable;
  std::string raw;
};

enum class Resolution { kUniqueYes, kTieBroken, kDefaultMajority, kModel };
std::string to_string(Resolution r);
Resolution resolution_from_string(std::string_view s);

struct PredictionRecord {
  std::string example_id;
  std::map<std::string, ProbeAnswer> per_label;
  std::string predicted;
  Resolution resolution = Resolution::kDefaultMajority;

  Json to_json() const;
  static PredictionRecord from_json(const Json& j);
};

// One yes wins outright; several yeses go to the earliest in LabelSet order;
// no yes (unparseable counts as no) falls back to the majority label.
PredictionRecord aggregate_probes(std::string example_id, const std::map<std::string, ProbeAnswer>& answers,
                                  const LabelSet& labels);

// Per-label, per-dataset descriptions shown in probe prompts.
class LabelDefinitions {
 public:
  LabelDefinitions() = default;
  static LabelDefinitions from_json(const Json& j);
  static LabelDefinitions load(const std::filesystem::path& path);
  // Falls back to the "default" table when the dataset has no entry.
  const std::string& lookup(std::string_view dataset, std::string_view label) const;

 private:
  std::map<std::string, std::map<std::string, std::string>, std::less<>> by_dataset_;
};

struct ProbeSettings {
  std::string model = "gpt-3.5-turbo-16k";
  double temperature = 0.0;
  int max_tokens = 4;
};

// Five positives then five negatives for `label`, drawn without replacement
// from `train_refs` with a generator derived from (seed, label position).
// Fewer are returned when the pool is short.
std::vector<ExampleRef> sample_probe_shots(const Corpus& corpus, const std::vector<ExampleRef>& train_refs,
                                           const std::string& label, size_t per_side, std::uint64_t seed);

// Context, response and (when the mode needs it and it is valid) rationales for one example.
ProbeItem make_probe_item(const Corpus& corpus, const ExampleRef& ref, const RationaleStore& store,
                          RationaleMode mode, size_t context_width);

ChatRequest make_probe_request(const RenderedPrompt& prompt, const ProbeSettings& settings, std::string tag);

BinaryProbe probe_example(const Corpus& corpus, const ExampleRef& ref, const std::string& label,
                          std::span<const ProbeShot> shots, const RationaleStore& store, RationaleMode mode,
                          size_t context_width, const LabelDefinitions& defs, const ProbeSettings& settings,
                          const Gateway& gateway, GatewayMode gateway_mode);

struct ClassifyOptions {
  RationaleMode mode = RationaleMode::kNone;
  size_t shots_per_side = 0;  // 0 or 5
  std::uint64_t seed = 0;
  size_t context_width = kDefaultContextWidth;
  ProbeSettings probe;
  GatewayMode gateway_mode = GatewayMode::kReplay;
  size_t concurrency = 4;
};

struct ClassifyResult {
  std::vector<PredictionRecord> predictions;
  std::vector<std::pair<std::string, std::string>> failures;  // (example_id, message)
  std::map<std::string, size_t> resolution_histogram;
  Json summary() const;
};

ClassifyResult classify_split(const Corpus& corpus, const std::vector<ExampleRef>& test_refs,
                              const std::vector<ExampleRef>& train_refs, const RationaleStore& store,
                              const LabelDefinitions& defs, const ClassifyOptions& options,
                              const Gateway& gateway);

// Predictions JSONL: a {"header": {...}} line, then one record per example.
struct PredictionsFile {
  Json header = Json::object();
  std::vector<PredictionRecord> records;
};
void write_predictions(const std::filesystem::path& path, const PredictionsFile& file);
PredictionsFile read_predictions(const std::filesystem::path& path);

}  // namespace smrat
