#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "smrat/corpus.hpp"
#include "smrat/rationale.hpp"

namespace smrat {

inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kSeparator = " [SEP] ";

struct AugmentedExample {
  std::string example_id;
  std::string input_text;
  std::string label;
  RationaleMode mode = RationaleMode::kNone;
  bool fallback_applied = false;
  std::set<std::string> split_tags;

  Json to_json() const;
  static AugmentedExample from_json(const Json& j);
};

struct RenderedInput {
  std::string text;
  bool fallback = false;
};

// Segments: context ("Speaker: text" lines, omitted when the window is
// empty), target text, then the rationales `mode` selects, in INT/ASM/IMP
// order, joined by " [SEP] ". Invalid rationales fall back to the NONE
// rendering. Literal "[SEP]" inside a segment is rewritten to "[ SEP ]" so
// the separator count always equals segments - 1.
RenderedInput render_input(std::span<const Turn> window, const Turn& target,
                           const StoredRationale* rationale, RationaleMode mode);

size_t count_separators(std::string_view text);

// Parsed rationales keyed by example.
class RationaleStore {
 public:
  RationaleStore() = default;
  explicit RationaleStore(std::vector<StoredRationale> records);
  static RationaleStore load(const std::filesystem::path& jsonl);

  const StoredRationale* find(const ExampleRef& ref) const;
  size_t size() const { return by_ref_.size(); }
  std::vector<StoredRationale> records() const;

 private:
  std::map<ExampleRef, StoredRationale> by_ref_;
};

struct AugmentSummary {
  size_t total = 0;
  size_t fallbacks = 0;
  size_t missing = 0;
  Json to_json() const;
};

struct ExampleStream {
  LabelSet labels;
  RationaleMode mode = RationaleMode::kNone;
  std::vector<AugmentedExample> examples;
  AugmentSummary summary;
};

// One example per labeled ref, in the order given. Refs without a stored
// rationale are treated as invalid.
ExampleStream augment_refs(const Corpus& corpus, const RationaleStore& store, RationaleMode mode,
                           const std::vector<ExampleRef>& refs, size_t context_width,
                           const std::set<std::string>& tags = {});

// `split` == nullptr means every labeled turn of the corpus.
ExampleStream augment_corpus(const Corpus& corpus, const RationaleStore& store, RationaleMode mode,
                             const KShotSplit* split, size_t context_width = kDefaultContextWidth);

struct FinetuneHyperparams {
  int max_seq_len = 512;
  double learning_rate = 2e-5;
  int batch_size = 16;
  int epochs = 15;
  std::string optimizer = "adam";
  int patience = 5;

  Json to_json() const;
  static FinetuneHyperparams from_json(const Json& j);
};

struct BundleInfo {
  std::filesystem::path dir;
  std::string manifest_sha256;
};

inline constexpr int kBundleFormatVersion = 1;

// Writes train.jsonl, dev.jsonl, test.jsonl and manifest.json under `dir`.
BundleInfo export_finetune_bundle(const std::filesystem::path& dir, const ExampleStream& train,
                                  const ExampleStream& dev, const ExampleStream& test,
                                  const FinetuneHyperparams& hyper, const Json& provenance);

}  // namespace smrat
