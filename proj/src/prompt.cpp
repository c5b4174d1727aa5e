#include "smrat/prompt.hpp"

#include <array>

namespace smrat {

std::string to_string(PromptMode mode) {
  return mode == PromptMode::kSingleUtterance ? "single_utterance" : "per_line";
}

namespace {

std::string require_text(const Json& j, const char* key, const std::string& id) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error("template '" + id + "': missing field '" + key + "'");
  }
  std::string v = util::normalize_newlines(it->get<std::string>());
  if (util::trim(v).empty()) throw Error("template '" + id + "': empty field '" + key + "'");
  return v;
}

std::array<size_t, 3> count_headers(std::string_view text) {
  std::array<size_t, 3> counts{};
  for (const auto& line : util::split_lines(text)) {
    if (auto m = match_header(line)) ++counts[static_cast<size_t>(m->facet)];
  }
  return counts;
}

void check_icl_example(const ICLExample& ex, Task task, const std::string& id, size_t n) {
  const std::string where = "template '" + id + "': ICL example " + std::to_string(n + 1);
  if (util::trim(ex.input_block).empty()) throw Error(where + " has an empty input_block");
  if (task == Task::kERC) {
    const auto rs = parse_single(ex.output_block);
    if (rs.intention.empty() || rs.assumption.empty() || rs.implicit.empty()) {
      throw Error(where + " output_block does not parse into all three rationales");
    }
    return;
  }
  const auto counts = count_headers(ex.output_block);
  if (counts[0] == 0 || counts[0] != counts[1] || counts[0] != counts[2]) {
    throw Error(where + " output_block does not hold complete header triples");
  }
  for (const auto& rs : parse_per_line(ex.output_block, counts[0])) {
    if (rs.intention.empty() || rs.assumption.empty() || rs.implicit.empty() || !rs.notes.empty()) {
      throw Error(where + " output_block has an incomplete rationale block");
    }
  }
}

std::string flatten(std::string_view s) {
  std::string out = util::trim(util::normalize_newlines(s));
  for (char& c : out) {
    if (c == '\n') c = ' ';
  }
  return out;
}

std::string render_probe_block(const ProbeItem& item, RationaleMode mode) {
  std::string out = "[CONTEXT]\n";
  for (const auto& t : item.context) out += "[" + t.speaker + "]:" + flatten(t.text) + "\n";
  out += "[RESPONSE]\n";
  out += "[" + item.response.speaker + "]:" + flatten(item.response.text) + "\n";
  if (mode != RationaleMode::kNone && item.rationales) {
    const auto& rs = *item.rationales;
    if (mode == RationaleMode::kIntention || mode == RationaleMode::kAll) {
      out += "[INTENTION] " + flatten(rs.intention) + "\n";
    }
    if (mode == RationaleMode::kAssumption || mode == RationaleMode::kAll) {
      out += "[ASSUMPTION] " + flatten(rs.assumption) + "\n";
    }
    if (mode == RationaleMode::kImplicit || mode == RationaleMode::kAll) {
      out += "[IMPLICIT INFORMATION] " + flatten(rs.implicit) + "\n";
    }
  }
  out += "[OUTPUT]";
  return out;
}

}  // namespace

PromptTemplate PromptTemplate::from_json(const Json& j, std::string id) {
  if (!j.is_object()) throw Error("template '" + id + "' is not a JSON object");
  PromptTemplate t;
  t.id = j.value("id", id);
  t.task = task_from_string(require_text(j, "task", t.id));
  t.task_description = require_text(j, "task_description", t.id);
  t.instructions = require_text(j, "instructions", t.id);
  t.output_template = require_text(j, "output_template", t.id);

  const auto counts = count_headers(t.output_template);
  for (size_t f = 0; f < 3; ++f) {
    if (counts[f] != 1) {
      throw Error("template '" + t.id + "': output_template must hold each rationale header exactly once");
    }
  }
  if (auto it = j.find("icl_examples"); it != j.end()) {
    if (!it->is_array()) throw Error("template '" + t.id + "': icl_examples must be an array");
    for (const auto& e : *it) {
      ICLExample ex;
      ex.input_block = util::normalize_newlines(e.at("input_block").get<std::string>());
      ex.output_block = util::normalize_newlines(e.at("output_block").get<std::string>());
      check_icl_example(ex, t.task, t.id, t.icl_examples.size());
      t.icl_examples.push_back(std::move(ex));
    }
  }
  return t;
}

Json PromptTemplate::to_json() const {
  Json icl = Json::array();
  for (const auto& e : icl_examples) icl.push_back({{"input_block", e.input_block}, {"output_block", e.output_block}});
  return {{"id", id},
          {"task", smrat::to_string(task)},
          {"task_description", task_description},
          {"instructions", instructions},
          {"output_template", output_template},
          {"icl_examples", std::move(icl)}};
}

PromptTemplate load_template(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(util::read_file(path));
  } catch (const Json::parse_error& e) {
    throw Error("template " + path.string() + ": malformed JSON: " + e.what());
  }
  return PromptTemplate::from_json(j, path.stem().string());
}

std::string render_icl_examples(const PromptTemplate& tpl) {
  std::vector<std::string> parts;
  for (const auto& e : tpl.icl_examples) parts.push_back(e.input_block + "\n\n" + e.output_block);
  return util::join(parts, "\n\n");
}

std::string render_turns(std::span<const Turn> turns) {
  std::vector<std::string> lines;
  for (const auto& t : turns) lines.push_back(t.speaker + ": " + util::normalize_newlines(t.text));
  return util::join(lines, "\n");
}

RenderedPrompt build_rationale_prompt(const PromptTemplate& tpl, std::span<const Turn> window,
                                      const Turn& target) {
  if (util::trim(target.text).empty()) throw Error("build_rationale_prompt: target has no text");
  for (const auto* field : {&tpl.task_description, &tpl.instructions, &tpl.output_template}) {
    if (util::trim(*field).empty()) throw Error("template '" + tpl.id + "' has an empty field");
  }
  std::vector<std::string> parts = {tpl.task_description, tpl.instructions, tpl.output_template};
  if (auto icl = render_icl_examples(tpl); !icl.empty()) parts.push_back(std::move(icl));
  std::string history = "Dialogue history:";
  if (!window.empty()) history += "\n" + render_turns(window);
  parts.push_back(std::move(history));
  parts.push_back("Final utterance:\n" + render_turns(std::span<const Turn>(&target, 1)));

  RenderedPrompt p;
  p.text = util::join(parts, "\n\n");
  p.target_speaker = target.speaker;
  p.mode = tpl.mode();
  p.expected_blocks = p.mode == PromptMode::kPerLine ? window.size() + 1 : 1;
  p.provenance = {{"template", tpl.id}, {"kind", "rationale"}, {"mode", to_string(p.mode)}};
  return p;
}

RenderedPrompt build_probe_prompt(const LabelSet& labels, const ProbeSpec& spec,
                                  std::span<const ProbeShot> shots, const ProbeItem& query) {
  if (!labels.contains(spec.label)) {
    throw Error("build_probe_prompt: label '" + spec.label + "' is not in the label set");
  }
  const std::string noun = labels.task == Task::kRES ? "strategy" : "emotion";
  std::vector<std::string> parts;
  parts.push_back("These examples pertains to the " + spec.label + " " + noun + ". For the dataset " +
                  spec.dataset + ", the description of " + spec.label + " is as follows:\n" +
                  util::trim(util::normalize_newlines(spec.definition)));
  parts.push_back(
      "Given a response for a particular speaker and recent dialogue context containing the past "
      "utterances (wherever available), output 'Yes' if the utterance contains the above " + noun +
      ", otherwise output 'No'. Your output should contain only 'Yes' or 'No', and no other text.");
  for (const auto& shot : shots) {
    parts.push_back(render_probe_block(shot.item, spec.mode) + "\n" + (shot.positive ? "Yes" : "No"));
  }
  parts.push_back(render_probe_block(query, spec.mode));

  RenderedPrompt p;
  p.text = util::join(parts, "\n\n");
  p.target_speaker = query.response.speaker;
  p.mode = PromptMode::kSingleUtterance;
  p.provenance = {{"kind", "probe"},
                  {"label", spec.label},
                  {"dataset", spec.dataset},
                  {"rationale_mode", to_string(spec.mode)},
                  {"shots", shots.size()}};
  return p;
}

}  // namespace smrat
