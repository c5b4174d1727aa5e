#include "smrat/rationale.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace smrat {

std::string to_string(RationaleMode mode) {
  switch (mode) {
    case RationaleMode::kNone: return "NONE";
    case RationaleMode::kIntention: return "INT";
    case RationaleMode::kAssumption: return "ASM";
    case RationaleMode::kImplicit: return "IMP";
    case RationaleMode::kAll: return "ALL";
  }
  return "NONE";
}

RationaleMode mode_from_string(std::string_view s) {
  for (auto m : kAllModes) {
    if (util::iequals(s, to_string(m))) return m;
  }
  throw Error("unknown rationale mode '" + std::string(s) + "' (expected NONE, INT, ASM, IMP or ALL)");
}

const std::string& RationaleSet::get(Facet f) const {
  switch (f) {
    case Facet::kIntention: return intention;
    case Facet::kAssumption: return assumption;
    case Facet::kImplicit: return implicit;
  }
  return intention;
}

std::string& RationaleSet::get(Facet f) {
  return const_cast<std::string&>(std::as_const(*this).get(f));
}

namespace {

constexpr std::array<Facet, 3> kFacets = {Facet::kIntention, Facet::kAssumption, Facet::kImplicit};

const char* facet_name(Facet f) {
  switch (f) {
    case Facet::kIntention: return "intention";
    case Facet::kAssumption: return "assumption";
    case Facet::kImplicit: return "implicit information";
  }
  return "";
}

bool is_ws(char c) { return c == ' ' || c == '\t'; }

// Consumes `word` case-insensitively at `pos`. The apostrophe in the pattern
// also matches U+2019.
bool consume_ci(std::string_view line, size_t& pos, std::string_view word) {
  size_t p = pos;
  for (char w : word) {
    if (w == '\'') {
      if (p < line.size() && line[p] == '\'') {
        ++p;
        continue;
      }
      if (line.substr(p, 3) == "\xE2\x80\x99") {
        p += 3;
        continue;
      }
      return false;
    }
    if (p >= line.size()) return false;
    if (std::tolower(static_cast<unsigned char>(line[p])) != std::tolower(static_cast<unsigned char>(w))) {
      return false;
    }
    ++p;
  }
  pos = p;
  return true;
}

void skip_ws(std::string_view line, size_t& pos) {
  while (pos < line.size() && is_ws(line[pos])) ++pos;
}

void skip_list_marker(std::string_view line, size_t& pos) {
  size_t p = pos;
  if (p < line.size() && line.substr(p, 2) != "**" && (line[p] == '-' || line[p] == '*')) {
    pos = p + 1;
    return;
  }
  if (p + 1 < line.size() && std::isalpha(static_cast<unsigned char>(line[p])) && line[p + 1] == ')') {
    pos = p + 2;
    return;
  }
  size_t d = p;
  while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
  if (d > p && d < line.size() && (line[d] == '.' || line[d] == ')')) pos = d + 1;
}

struct HeaderSpan {
  Facet facet;
  size_t line;
  size_t content_offset;
};

std::vector<HeaderSpan> find_headers(const std::vector<std::string>& lines) {
  std::vector<HeaderSpan> out;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (auto m = match_header(lines[i])) out.push_back({m->facet, i, m->content_offset});
  }
  return out;
}

// Text of header `h` up to the line of `next_line` (exclusive).
std::string header_content(const std::vector<std::string>& lines, const HeaderSpan& h, size_t next_line) {
  std::string text = lines[h.line].substr(h.content_offset);
  for (size_t l = h.line + 1; l < next_line; ++l) {
    text += '\n';
    text += lines[l];
  }
  return util::trim(text);
}

std::string slice_lines(const std::vector<std::string>& lines, size_t from, size_t to) {
  std::vector<std::string> part(lines.begin() + static_cast<std::ptrdiff_t>(from),
                                lines.begin() + static_cast<std::ptrdiff_t>(to));
  return util::join(part, "\n");
}

}  // namespace

std::optional<HeaderMatch> match_header(std::string_view line) {
  size_t pos = 0;
  skip_ws(line, pos);
  skip_list_marker(line, pos);
  skip_ws(line, pos);
  if (line.substr(pos, 2) == "**") pos += 2;
  skip_ws(line, pos);

  static constexpr std::array<std::pair<Facet, std::string_view>, 3> kPhrases = {{
      {Facet::kIntention, "speaker's intention"},
      {Facet::kAssumption, "assumptions about the conversation"},
      {Facet::kImplicit, "implicit information"},
  }};
  for (const auto& [facet, phrase] : kPhrases) {
    size_t p = pos;
    if (!consume_ci(line, p, phrase)) continue;
    size_t q = p;
    if (consume_ci(line, q, " in the final utterance")) p = q;
    skip_ws(line, p);
    if (line.substr(p, 2) == "**") p += 2;
    skip_ws(line, p);
    if (p >= line.size() || line[p] != ':') return std::nullopt;
    ++p;
    if (line.substr(p, 2) == "**") p += 2;
    return HeaderMatch{facet, p};
  }
  return std::nullopt;
}

RationaleSet parse_single(std::string_view response) {
  RationaleSet rs;
  const std::string text = util::normalize_newlines(response);
  rs.raw = text;
  const auto lines = util::split_lines(text);
  const auto headers = find_headers(lines);
  std::array<bool, 3> taken{};
  for (size_t i = 0; i < headers.size(); ++i) {
    const auto& h = headers[i];
    const auto slot = static_cast<size_t>(h.facet);
    if (taken[slot]) {
      rs.notes.push_back(std::string("duplicate ") + facet_name(h.facet) + " header ignored");
      continue;
    }
    taken[slot] = true;
    const size_t next = i + 1 < headers.size() ? headers[i + 1].line : lines.size();
    rs.get(h.facet) = header_content(lines, h, next);
  }
  return rs;
}

std::vector<RationaleSet> parse_per_line(std::string_view response, size_t expected_blocks) {
  if (expected_blocks == 0) throw Error("parse_per_line: expected_blocks must be at least 1");
  const std::string text = util::normalize_newlines(response);
  const auto lines = util::split_lines(text);
  const auto headers = find_headers(lines);

  // Group header indices into blocks.
  std::vector<std::vector<size_t>> blocks;
  std::array<bool, 3> seen{};
  for (size_t i = 0; i < headers.size(); ++i) {
    const auto slot = static_cast<size_t>(headers[i].facet);
    const bool fresh = blocks.empty() || seen[slot] ||
                       (headers[i].facet == Facet::kIntention && !blocks.back().empty());
    if (fresh) {
      blocks.emplace_back();
      seen = {};
    }
    seen[slot] = true;
    blocks.back().push_back(i);
  }

  std::vector<RationaleSet> out;
  for (size_t b = 0; b < blocks.size() && b < expected_blocks; ++b) {
    RationaleSet rs;
    for (size_t hi : blocks[b]) {
      const size_t next = hi + 1 < headers.size() ? headers[hi + 1].line : lines.size();
      rs.get(headers[hi].facet) = header_content(lines, headers[hi], next);
    }
    const size_t first = headers[blocks[b].front()].line;
    const size_t end = b + 1 < blocks.size() ? headers[blocks[b + 1].front()].line : lines.size();
    rs.raw = util::trim(slice_lines(lines, first, end));
    out.push_back(std::move(rs));
  }

  const std::string mismatch = "expected " + std::to_string(expected_blocks) + " blocks, parsed " +
                               std::to_string(blocks.size());
  if (blocks.size() > expected_blocks) {
    for (auto& rs : out) rs.notes.push_back(mismatch + "; extra blocks dropped");
  }
  while (out.size() < expected_blocks) {
    RationaleSet pad;
    pad.notes.push_back(mismatch + "; padded with an empty block");
    out.push_back(std::move(pad));
  }
  return out;
}

std::string format_single(const RationaleSet& rs) {
  return "Speaker's Intention in the final utterance: " + rs.intention +
         "\nAssumptions about the conversation in the final utterance: " + rs.assumption +
         "\nImplicit Information in the final utterance: " + rs.implicit;
}

std::string format_block(const RationaleSet& rs) {
  return "Speaker's Intention: " + rs.intention + "\nAssumptions about the conversation: " +
         rs.assumption + "\nImplicit Information: " + rs.implicit;
}

ValidityReport validate(const RationaleSet& rs, std::string_view target_speaker,
                        const ValidityOptions& options) {
  if (util::trim(target_speaker).empty()) throw Error("validate: target speaker is empty");
  ValidityReport r;
  r.non_null = !rs.empty();
  r.all_three_present = !rs.intention.empty() && !rs.assumption.empty() && !rs.implicit.empty();

  auto names_speaker = [&](const std::string& field) {
    if (util::contains_word_ci(field, target_speaker)) return true;
    for (const auto& alias : options.aliases) {
      if (util::contains_word_ci(field, alias)) return true;
    }
    return false;
  };
  if (options.scope == SubjectScope::kIntention) {
    r.speaker_subject = names_speaker(rs.intention);
  } else {
    r.speaker_subject = std::any_of(kFacets.begin(), kFacets.end(),
                                    [&](Facet f) { return names_speaker(rs.get(f)); });
  }
  r.valid = r.non_null && r.speaker_subject && r.all_three_present;

  if (!r.non_null) r.failure_notes.push_back("no rationale text");
  for (Facet f : kFacets) {
    if (r.non_null && rs.get(f).empty()) r.failure_notes.push_back(std::string("missing ") + facet_name(f));
  }
  if (r.non_null && !r.speaker_subject) {
    r.failure_notes.push_back("speaker '" + std::string(target_speaker) + "' is not the subject");
  }
  r.failure_notes.insert(r.failure_notes.end(), rs.notes.begin(), rs.notes.end());
  return r;
}

double validity_rate(std::span<const ValidityReport> reports) {
  if (reports.empty()) throw Error("validity_rate: no reports");
  size_t valid = 0;
  for (const auto& r : reports) valid += r.valid ? 1 : 0;
  return static_cast<double>(valid) / static_cast<double>(reports.size());
}

ValiditySummary summarize(std::span<const ValidityReport> reports) {
  ValiditySummary s;
  for (const auto& r : reports) {
    ++s.total;
    if (r.valid) {
      ++s.valid;
    } else if (!r.all_three_present) {
      ++s.parse_failures;
    } else {
      ++s.rule_failures;
    }
  }
  return s;
}

Json ValiditySummary::to_json() const {
  return {{"total", total},
          {"valid", valid},
          {"parse_failures", parse_failures},
          {"rule_failures", rule_failures},
          {"validity_rate", rate()}};
}

Json StoredRationale::to_json() const {
  return {{"dialogue_id", dialogue_id},
          {"turn_index", turn_index},
          {"intention", rationales.intention},
          {"assumption", rationales.assumption},
          {"implicit", rationales.implicit},
          {"valid", valid},
          {"failure_notes", failure_notes},
          {"source_key", rationales.source_key}};
}

StoredRationale StoredRationale::from_json(const Json& j) {
  StoredRationale s;
  s.dialogue_id = j.at("dialogue_id").get<std::string>();
  s.turn_index = j.at("turn_index").get<size_t>();
  s.rationales.intention = j.value("intention", "");
  s.rationales.assumption = j.value("assumption", "");
  s.rationales.implicit = j.value("implicit", "");
  s.rationales.source_key = j.value("source_key", "");
  s.valid = j.at("valid").get<bool>();
  if (j.contains("failure_notes")) s.failure_notes = j.at("failure_notes").get<std::vector<std::string>>();
  return s;
}

}  // namespace smrat
