#include <random>

#include "doctest.h"
#include "smrat/rationale.hpp"
#include "support.hpp"

using namespace smrat;

namespace {

struct Case {
  std::string id;
  Json j;
};

std::vector<Case> load_cases() {
  const Json j = Json::parse(testing::slurp(testing::fixture("tests/fixtures/parser_cases.json")));
  std::vector<Case> out;
  for (const auto& c : j.at("cases")) out.push_back({c.at("id"), c});
  return out;
}

std::vector<RationaleSet> parse_case(const Json& c) {
  if (c.at("kind") == "single") return {parse_single(c.at("response").get<std::string>())};
  return parse_per_line(c.at("response").get<std::string>(), c.at("expected_blocks").get<size_t>());
}

ValidityOptions options_for(const Json& c) {
  return {c.at("aliases").get<std::vector<std::string>>(), SubjectScope::kIntention};
}

}  // namespace

TEST_SUITE("rationale") {
  TEST_CASE("authored parser cases extract the expected fields") {
    const auto cases = load_cases();
    REQUIRE(cases.size() == 40);
    std::vector<ValidityReport> reports;
    for (const auto& [id, c] : cases) {
      CAPTURE(id);
      const auto got = parse_case(c);
      const auto& want = c.at("expected");
      REQUIRE(got.size() == want.size());
      for (size_t b = 0; b < got.size(); ++b) {
        CHECK(got[b].intention == want[b].at("intention").get<std::string>());
        CHECK(got[b].assumption == want[b].at("assumption").get<std::string>());
        CHECK(got[b].implicit == want[b].at("implicit").get<std::string>());
      }
      const auto report = validate(got.back(), c.at("speaker").get<std::string>(), options_for(c));
      CHECK(report.valid == c.at("valid").get<bool>());
      reports.push_back(report);
    }
    CHECK(validity_rate(reports) == 0.925);
  }

  TEST_CASE("header grammar") {
    CHECK(match_header("Speaker's Intention: x"));
    CHECK(match_header("  b) **Assumptions about the conversation in the final utterance**: y"));
    CHECK(match_header("12) implicit information:z"));
    CHECK(match_header("Speaker\xE2\x80\x99s intention: x"));
    CHECK_FALSE(match_header("Speaker's Intention - x"));
    CHECK_FALSE(match_header("The Speaker's Intention: x"));
    CHECK_FALSE(match_header("### Speaker's Intention: x"));
    CHECK_FALSE(match_header(""));
    const auto m = match_header("- Implicit Information: rest");
    REQUIRE(m);
    CHECK(m->facet == Facet::kImplicit);
  }

  TEST_CASE("missing header leaves only that field empty") {
    const auto rs = parse_single("Speaker's Intention: A wants x.\nImplicit Information: z");
    CHECK(rs.intention == "A wants x.");
    CHECK(rs.assumption.empty());
    CHECK(rs.implicit == "z");
    CHECK(parse_single("").empty());
  }

  TEST_CASE("per-line padding and truncation") {
    const std::string block = "Speaker's Intention: A.\nAssumptions about the conversation: B.\nImplicit Information: C.";
    const auto padded = parse_per_line(block, 3);
    REQUIRE(padded.size() == 3);
    CHECK(padded[0].intention == "A.");
    CHECK(padded[1].empty());
    CHECK(padded[2].empty());
    CHECK_FALSE(padded[2].notes.empty());
    CHECK(padded[0].notes.empty());

    const auto four = block + "\n\n" + block + "\n\n" + block + "\n\n" + block;
    const auto cut = parse_per_line(four, 3);
    REQUIRE(cut.size() == 3);
    for (const auto& rs : cut) {
      CHECK(rs.implicit == "C.");
      REQUIRE(rs.notes.size() == 1);
      CHECK(rs.notes[0].find("expected 3 blocks, parsed 4") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_per_line(block, 0), Error);
  }

  TEST_CASE("round trip through the output formats") {
    RationaleSet rs;
    rs.intention = "Joey wants a sandwich.";
    rs.assumption = "Joey assumes there is food.";
    rs.implicit = "Joey is hungry.";
    const auto back = parse_single(format_single(rs));
    CHECK(back.intention == rs.intention);
    CHECK(back.assumption == rs.assumption);
    CHECK(back.implicit == rs.implicit);
    const auto blocks = parse_per_line(format_block(rs) + "\n\n" + format_block(rs), 2);
    CHECK(blocks[1].implicit == rs.implicit);
  }

  TEST_CASE("validity rules") {
    RationaleSet rs;
    CHECK_FALSE(validate(rs, "Persuadee").non_null);
    CHECK_FALSE(validate(rs, "Persuadee").valid);
    rs.intention = "The Persuadee expresses gratitude to the Persuader for considering their request.";
    rs.assumption = "The Persuadee assumes that expressing gratitude may positively influence the Persuader's decision.";
    rs.implicit = "The Persuadee appreciates the Persuader's willingness to consider their request.";
    const auto ok = validate(rs, "Persuadee");
    CHECK(ok.valid);
    CHECK(ok.speaker_subject);
    CHECK(ok.all_three_present);

    RationaleSet seller = rs;
    seller.intention = "The Seller wants a higher price.";
    const auto bad = validate(seller, "Buyer");
    CHECK_FALSE(bad.speaker_subject);
    CHECK_FALSE(bad.valid);
    CHECK_FALSE(bad.failure_notes.empty());

    // word boundaries: "Ann" is not found inside "Annual"
    RationaleSet ann = rs;
    ann.intention = "Annual plans come up.";
    CHECK_FALSE(validate(ann, "Ann").speaker_subject);

    // alias and scope
    RationaleSet role = rs;
    role.intention = "The speaker hesitates.";
    CHECK_FALSE(validate(role, "Persuadee").valid);
    CHECK(validate(role, "Persuadee", {{"speaker"}, SubjectScope::kIntention}).valid);
    RationaleSet elsewhere = rs;
    elsewhere.intention = "To stall.";
    CHECK_FALSE(validate(elsewhere, "Persuadee").valid);
    CHECK(validate(elsewhere, "Persuadee", {{}, SubjectScope::kAnyField}).valid);

    CHECK_THROWS_AS(validate(rs, "  "), Error);
  }

  TEST_CASE("blanking any field of a valid set invalidates it") {
    RationaleSet rs{"Ross is sad.", "Ross assumes it is over.", "He misses her.", "", "", {}};
    REQUIRE(validate(rs, "Ross").valid);
    for (auto f : {Facet::kIntention, Facet::kAssumption, Facet::kImplicit}) {
      RationaleSet copy = rs;
      copy.get(f).clear();
      CHECK_FALSE(validate(copy, "Ross").valid);
    }
  }

  TEST_CASE("validity rate and summary") {
    std::vector<ValidityReport> reports(20);
    for (size_t i = 0; i < 19; ++i) reports[i].valid = true;
    CHECK(validity_rate(reports) == doctest::Approx(0.95));
    for (auto& r : reports) r.valid = true;
    CHECK(validity_rate(reports) == 1.0);
    CHECK_THROWS_AS(validity_rate(std::vector<ValidityReport>{}), Error);

    std::vector<ValidityReport> mixed(3);
    mixed[0] = {true, true, true, true, {}};
    mixed[1] = {true, false, true, false, {}};
    mixed[2] = {false, false, false, false, {}};
    const auto s = summarize(mixed);
    CHECK(s.total == 3);
    CHECK(s.valid == 1);
    CHECK(s.parse_failures == 1);
    CHECK(s.rule_failures == 1);
  }

  TEST_CASE("stored rationale JSON round trip") {
    StoredRationale st;
    st.dialogue_id = "d";
    st.turn_index = 3;
    st.rationales = {"a", "b", "c", "raw", "abc123", {}};
    st.valid = true;
    const Json j = st.to_json();
    for (const char* k : {"dialogue_id", "turn_index", "intention", "assumption", "implicit", "valid", "failure_notes",
                          "source_key"}) {
      CHECK(j.contains(k));
    }
    const auto back = StoredRationale::from_json(j);
    CHECK(back.rationales.implicit == "c");
    CHECK(back.rationales.source_key == "abc123");
    CHECK(back.turn_index == 3);
  }

  TEST_CASE("parsers never throw on random input") {
    std::mt19937_64 rng(2024);
    const std::vector<std::string> pieces = {"Speaker's Intention", "Assumptions about the conversation",
                                             "Implicit Information", " in the final utterance", ":", "**", "\n",
                                             "\r\n", "a)", "1.", "-", "*", " ", "\xE2\x80\x99", "\xFF", "x"};
    for (int i = 0; i < 10000; ++i) {
      std::string s;
      const int len = static_cast<int>(rng() % 40);
      for (int k = 0; k < len; ++k) {
        if (rng() % 3 == 0) {
          s += static_cast<char>(rng() % 256);
        } else {
          s += pieces[rng() % pieces.size()];
        }
      }
      CHECK_NOTHROW(parse_single(s));
      CHECK_NOTHROW(parse_per_line(s, 1 + rng() % 4));
    }
  }
}
