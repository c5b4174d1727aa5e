#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smrat/util.hpp"

namespace smrat {

// Which rationale segments a classification input (or probe query) carries.
enum class RationaleMode { kNone, kIntention, kAssumption, kImplicit, kAll };

std::string to_string(RationaleMode mode);  // NONE, INT, ASM, IMP, ALL
RationaleMode mode_from_string(std::string_view s);
inline constexpr RationaleMode kAllModes[] = {RationaleMode::kNone, RationaleMode::kIntention,
                                              RationaleMode::kAssumption, RationaleMode::kImplicit,
                                              RationaleMode::kAll};

enum class Facet { kIntention = 0, kAssumption = 1, kImplicit = 2 };

// Parsed rationales for one utterance. Fields are header-stripped and
// trimmed; an empty string means the facet was absent.
struct RationaleSet {
  std::string intention;
  std::string assumption;
  std::string implicit;
  std::string raw;
  std::string source_key;
  std::vector<std::string> notes;

  const std::string& get(Facet f) const;
  std::string& get(Facet f);
  bool empty() const { return intention.empty() && assumption.empty() && implicit.empty(); }
};

// Header grammar, applied per line:
//   [ws] [list marker] [ws] [**] <phrase> [" in the final utterance"] [**] ":" [**] content
// list markers: "a)" (any ASCII letter), "1." / "1)" (any digits), "-", "*".
// phrases (case-insensitive, straight or curly apostrophe):
//   "Speaker's Intention" | "Assumptions about the conversation" | "Implicit Information"
// Anything else is not a header.
struct HeaderMatch {
  Facet facet;
  size_t content_offset;  // where the text after the colon starts
};
std::optional<HeaderMatch> match_header(std::string_view line);

// Never throws. Each facet takes the text after its first header up to the
// next header line or end of text.
RationaleSet parse_single(std::string_view response);

// Splits a per-line (one block per dialogue line) response into header
// triples. A block starts at an intention header or at any repeated facet.
// Always returns exactly `expected_blocks` sets, padding or truncating.
std::vector<RationaleSet> parse_per_line(std::string_view response, size_t expected_blocks);

// Inverse of parse_single for populated sets, in the single-utterance dialect.
std::string format_single(const RationaleSet& rs);
// One bare-header block, as used by per-line responses.
std::string format_block(const RationaleSet& rs);

enum class SubjectScope { kIntention, kAnyField };

struct ValidityOptions {
  // Extra names that count as the speaker (dataset roles such as "Persuadee").
  std::vector<std::string> aliases;
  SubjectScope scope = SubjectScope::kIntention;
};

struct ValidityReport {
  bool non_null = false;
  bool speaker_subject = false;
  bool all_three_present = false;
  bool valid = false;
  std::vector<std::string> failure_notes;
};

ValidityReport validate(const RationaleSet& rs, std::string_view target_speaker,
                        const ValidityOptions& options = {});

double validity_rate(std::span<const ValidityReport> reports);

// Parse failures (a facet missing) and rule failures (complete but the
// speaker is not the subject) are counted apart.
struct ValiditySummary {
  size_t total = 0;
  size_t valid = 0;
  size_t parse_failures = 0;
  size_t rule_failures = 0;
  double rate() const { return total ? static_cast<double>(valid) / static_cast<double>(total) : 0.0; }
  Json to_json() const;
};
ValiditySummary summarize(std::span<const ValidityReport> reports);

// One line of the parsed rationale store.
struct StoredRationale {
  std::string dialogue_id;
  size_t turn_index = 0;
  RationaleSet rationales;
  bool valid = false;
  std::vector<std::string> failure_notes;

  Json to_json() const;
  static StoredRationale from_json(const Json& j);
};

}  // namespace smrat
