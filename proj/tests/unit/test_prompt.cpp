#include "doctest.h"
#include "smrat/fewshot.hpp"
#include "smrat/prompt.hpp"
#include "golden_inputs.hpp"

using namespace smrat;

namespace {

using testing::turns;

PromptTemplate shipped(const std::string& id) { return testing::shipped_template(id); }

size_t count(const std::string& hay, const std::string& needle) {
  size_t n = 0;
  for (size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
  return n;
}

}  // namespace

TEST_SUITE("prompt") {
  TEST_CASE("ERC rationale prompt matches the golden file") {
    const auto p = testing::golden_erc_rationale();
    CHECK(p.text == testing::slurp(testing::fixture("tests/golden/erc_rationale_prompt.txt")));
    CHECK(p.mode == PromptMode::kSingleUtterance);
    CHECK(p.target_speaker == "Monica");
    CHECK(p.expected_blocks == 1);
    CHECK(testing::golden_erc_rationale().text == p.text);
  }

  TEST_CASE("RES rationale prompt matches the golden file") {
    const auto p = testing::golden_res_rationale();
    CHECK(p.text == testing::slurp(testing::fixture("tests/golden/res_rationale_prompt.txt")));
    CHECK(p.mode == PromptMode::kPerLine);
    CHECK(p.expected_blocks == 4);
  }

  TEST_CASE("ERC output template has each header exactly once and the prompt ends with history and target") {
    const auto tpl = shipped("erc");
    CHECK(count(tpl.output_template, "Speaker's Intention in the final utterance:") == 1);
    CHECK(count(tpl.output_template, "Assumptions about the conversation in the final utterance:") == 1);
    CHECK(count(tpl.output_template, "Implicit Information in the final utterance:") == 1);
    const Turn target{"A", "hello", std::nullopt};
    const auto p = build_rationale_prompt(tpl, {}, target);
    CHECK(p.text.ends_with("Dialogue history:\n\nFinal utterance:\nA: hello"));
  }

  TEST_CASE("newlines are normalized") {
    const auto window = turns({{"A", "one\r\ntwo"}});
    const Turn target{"B", "three\rfour", std::nullopt};
    const auto p = build_rationale_prompt(shipped("erc"), window, target);
    CHECK(p.text.find('\r') == std::string::npos);
  }

  TEST_CASE("empty target or template field is rejected") {
    const Turn blank{"A", "  ", std::nullopt};
    CHECK_THROWS_AS(build_rationale_prompt(shipped("erc"), {}, blank), Error);
    auto tpl = shipped("erc");
    tpl.instructions = "";
    CHECK_THROWS_AS(build_rationale_prompt(tpl, {}, Turn{"A", "x", std::nullopt}), Error);
  }

  TEST_CASE("shipped ICL examples parse into valid rationales") {
    const auto erc = shipped("erc");
    REQUIRE(erc.icl_examples.size() == 1);
    const auto rs = parse_single(erc.icl_examples[0].output_block);
    CHECK(validate(rs, "The Interviewer", {{"speaker"}, SubjectScope::kIntention}).valid);
    const auto res = shipped("res");
    const auto blocks = parse_per_line(res.icl_examples[0].output_block, 2);
    CHECK(validate(blocks[0], "Persuadee", {}).valid);
    CHECK(validate(blocks[1], "Persuader", {}).valid);
  }

  TEST_CASE("ICL rendering") {
    auto tpl = shipped("erc");
    const auto one = render_icl_examples(tpl);
    CHECK(one == tpl.icl_examples[0].input_block + "\n\n" + tpl.icl_examples[0].output_block);
    tpl.icl_examples.push_back(tpl.icl_examples[0]);
    CHECK(render_icl_examples(tpl) == one + "\n\n" + one);
    tpl.icl_examples.clear();
    CHECK(render_icl_examples(tpl).empty());
  }

  TEST_CASE("templates whose examples drop a header fail to load") {
    Json j = shipped("erc").to_json();
    std::string out = j["icl_examples"][0]["output_block"];
    const auto start = out.find("Assumptions about");
    const auto end = out.find("Implicit Information");
    j["icl_examples"][0]["output_block"] = out.substr(0, start) + out.substr(end);
    CHECK_THROWS_AS(PromptTemplate::from_json(j, "broken"), Error);

    Json r = shipped("res").to_json();
    std::string rout = r["icl_examples"][0]["output_block"];
    const auto a = rout.rfind("Assumptions about");
    r["icl_examples"][0]["output_block"] = rout.substr(0, a) + rout.substr(rout.find('\n', a) + 1);
    CHECK_THROWS_AS(PromptTemplate::from_json(r, "broken"), Error);

    Json t = shipped("erc").to_json();
    t["output_template"] = "Please answer.";
    CHECK_THROWS_AS(PromptTemplate::from_json(t, "broken"), Error);
  }

  TEST_CASE("probe prompts match the golden files") {
    CHECK(testing::golden_probe_2shot_all().text ==
          testing::slurp(testing::fixture("tests/golden/probe_prompt_2shot_all.txt")));
    CHECK(testing::golden_probe_0shot_none().text ==
          testing::slurp(testing::fixture("tests/golden/probe_prompt_0shot_none.txt")));
  }

  TEST_CASE("probe block counts and marker order") {
    const auto labels = LabelSet::for_task(Task::kERC);
    ProbeItem item{turns({{"A", "hi"}}), {"B", "oh no"}, RationaleSet{"B is upset.", "B assumes bad news.", "Loss.", "", "", {}}};
    std::vector<ProbeShot> shots;
    for (int i = 0; i < 10; ++i) shots.push_back({item, i < 5});
    const ProbeSpec spec{"sadness", "Friends", "Sadness.", RationaleMode::kAll};
    const auto p = build_probe_prompt(labels, spec, shots, item);
    CHECK(count(p.text, "[CONTEXT]") == 11);
    CHECK(count(p.text, "[RESPONSE]") == 11);
    CHECK(count(p.text, "[OUTPUT]") == 11);
    CHECK(count(p.text, "[OUTPUT]\nYes") == 5);
    CHECK(count(p.text, "[OUTPUT]\nNo") == 5);
    CHECK(p.text.ends_with("[OUTPUT]"));
    const auto last = p.text.substr(p.text.rfind("[CONTEXT]"));
    const auto i = last.find("[INTENTION]"), a = last.find("[ASSUMPTION]"), m = last.find("[IMPLICIT INFORMATION]");
    CHECK(i < a);
    CHECK(a < m);
    CHECK(m != std::string::npos);

    const ProbeSpec none{"sadness", "Friends", "Sadness.", RationaleMode::kNone};
    const auto q = build_probe_prompt(labels, none, {}, item);
    CHECK(count(q.text, "[CONTEXT]") == 1);
    CHECK(q.text.find("[INTENTION]") == std::string::npos);

    const ProbeSpec asm_only{"sadness", "Friends", "Sadness.", RationaleMode::kAssumption};
    const auto r = build_probe_prompt(labels, asm_only, {}, item);
    CHECK(r.text.find("[INTENTION]") == std::string::npos);
    CHECK(r.text.find("[ASSUMPTION] B assumes bad news.") != std::string::npos);

    const ProbeSpec bad{"Hesitance", "Friends", "x", RationaleMode::kNone};
    CHECK_THROWS_AS(build_probe_prompt(labels, bad, {}, item), Error);
  }
}
