#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smrat/util.hpp"

namespace smrat {

enum class Task { kERC, kRES };

std::string to_string(Task task);
Task task_from_string(std::string_view s);

// The eight class names of a task in canonical order. Canonical order is
// load-bearing: k-shot sampling walks it and few-shot tie-breaks use it.
struct LabelSet {
  Task task = Task::kERC;
  std::vector<std::string> labels;
  std::string majority_label;

  static LabelSet for_task(Task task);

  std::optional<size_t> index_of(std::string_view label) const;
  bool contains(std::string_view label) const { return index_of(label).has_value(); }
  size_t size() const { return labels.size(); }
  // Throws unless there are exactly 8 distinct labels including the majority one.
  void check() const;
};

struct Turn {
  std::string speaker;
  std::string text;
  std::optional<std::string> label;
};

struct Dialogue {
  std::string dialogue_id;
  std::string domain;
  std::vector<Turn> turns;
};

struct ExampleRef {
  std::string dialogue_id;
  size_t turn_index = 0;

  // "dialogue_id#turn_index"
  std::string id() const;
  static ExampleRef parse(std::string_view example_id);

  auto operator<=>(const ExampleRef&) const = default;
};

class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Dialogue> dialogues, LabelSet labels);

  const std::vector<Dialogue>& dialogues() const { return dialogues_; }
  const LabelSet& labels() const { return labels_; }

  const Dialogue* find(std::string_view dialogue_id) const;
  const Dialogue& at(std::string_view dialogue_id) const;
  const Turn& resolve(const ExampleRef& ref) const;

  // Position of a dialogue in source order.
  size_t position(std::string_view dialogue_id) const;

  // Every labeled turn, in dialogue order then turn order.
  std::vector<ExampleRef> labeled_refs() const;
  size_t turn_count() const;

 private:
  std::vector<Dialogue> dialogues_;
  LabelSet labels_;
  std::map<std::string, size_t, std::less<>> index_;
};

// One JSON object per line: {"dialogue_id","domain","turns":[{"speaker","text","label"}]}.
Corpus load_corpus(const std::filesystem::path& path, Task task);
Corpus parse_corpus(std::string_view jsonl, Task task, std::string_view source_name = "<memory>");
Json dialogue_to_json(const Dialogue& d);

inline constexpr size_t kDefaultContextWidth = 5;

// The min(width, turn_index) turns right before `turn_index`; never the target itself.
std::span<const Turn> context_window(const Dialogue& dialogue, size_t turn_index,
                                     size_t width = kDefaultContextWidth);

// A k value: a positive count or "all".
class ShotCount {
 public:
  static ShotCount all() { return ShotCount(); }
  static ShotCount of(int k);
  static ShotCount from_json(const Json& j);

  bool is_all() const { return !k_.has_value(); }
  int value() const;
  Json to_json() const;
  std::string to_string() const;
  auto operator<=>(const ShotCount&) const = default;

 private:
  ShotCount() = default;
  std::optional<int> k_;
};

struct KShotSplit {
  ShotCount k = ShotCount::all();
  std::uint64_t seed = 0;
  // Label order follows the LabelSet.
  std::vector<std::pair<std::string, std::vector<ExampleRef>>> selected;
  std::vector<std::string> warnings;

  const std::vector<ExampleRef>& for_label(std::string_view label) const;
  std::vector<ExampleRef> all_refs() const;
  size_t total() const;

  Json to_json() const;
  static KShotSplit from_json(const Json& j);
};

// Per label, an unbiased sample without replacement of min(k, available)
// labeled turns. One generator seeded with `seed` is consumed label by label
// in LabelSet order. `pool` restricts sampling to those dialogue ids when given.
KShotSplit make_kshot_split(const Corpus& corpus, ShotCount k, std::uint64_t seed,
                            const std::vector<std::string>* pool = nullptr);

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct DialoguePartition {
  std::vector<std::string> train;
  std::vector<std::string> dev;
  std::vector<std::string> test;

  Json to_json() const;
  static DialoguePartition from_json(const Json& j);
};

// Dialogue-granular shuffle split. dev and test get floor(n * ratio), train
// takes the remainder.
DialoguePartition split_corpus(const Corpus& corpus, const SplitRatios& ratios,
                               std::uint64_t seed);

}  // namespace smrat
