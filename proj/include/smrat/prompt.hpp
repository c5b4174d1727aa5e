#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smrat/corpus.hpp"
#include "smrat/rationale.hpp"

namespace smrat {

enum class PromptMode { kSingleUtterance, kPerLine };
std::string to_string(PromptMode mode);

struct ICLExample {
  std::string input_block;
  std::string output_block;
};

// Four-part rationale-generation prompt: task description, instructions,
// output template, in-context examples. ERC templates ask about the final
// utterance only; RES templates ask for one block per dialogue line.
struct PromptTemplate {
  std::string id;
  Task task = Task::kERC;
  std::string task_description;
  std::string instructions;
  std::string output_template;
  std::vector<ICLExample> icl_examples;

  PromptMode mode() const {
    return task == Task::kERC ? PromptMode::kSingleUtterance : PromptMode::kPerLine;
  }

  // Validates every field and that each ICL output block parses completely.
  static PromptTemplate from_json(const Json& j, std::string id);
  Json to_json() const;
};

PromptTemplate load_template(const std::filesystem::path& path);

struct RenderedPrompt {
  std::string text;
  std::string target_speaker;
  PromptMode mode = PromptMode::kSingleUtterance;
  // Number of rationale blocks the response should contain.
  size_t expected_blocks = 1;
  Json provenance = Json::object();
};

// Examples in declared order, each "input\n\noutput", separated by a blank line.
std::string render_icl_examples(const PromptTemplate& tpl);

// "Speaker: text" per line.
std::string render_turns(std::span<const Turn> turns);

RenderedPrompt build_rationale_prompt(const PromptTemplate& tpl, std::span<const Turn> window,
                                      const Turn& target);

struct ProbeItem {
  std::vector<Turn> context;
  Turn response;
  // Absent for baseline queries and for rationales that failed validation.
  std::optional<RationaleSet> rationales;
};

struct ProbeShot {
  ProbeItem item;
  bool positive = false;
};

struct ProbeSpec {
  std::string label;
  std::string dataset;
  std::string definition;
  RationaleMode mode = RationaleMode::kNone;
};

// Binary yes/no probe for one label: strategy description, instructions,
// shots in the given order, then the test block ending in "[OUTPUT]".
RenderedPrompt build_probe_prompt(const LabelSet& labels, const ProbeSpec& spec,
                                  std::span<const ProbeShot> shots, const ProbeItem& query);

}  // namespace smrat
