#include <set>

#include "doctest.h"
#include "smrat/corpus.hpp"
#include "support.hpp"

using namespace smrat;

namespace {

const char* kOneDialogue =
    R"({"dialogue_id":"d1","domain":"Friends","turns":[)"
    R"({"speaker":"Ross","text":"Hi.","label":"neutral"},)"
    R"({"speaker":"Rachel","text":"Oh my God!","label":"surprise"},)"
    R"({"speaker":"Ross","text":"I know.","label":"joy"}]})";

std::string dialogue_line(const std::string& id, int turns, const std::string& label = "neutral") {
  Json d = {{"dialogue_id", id}, {"domain", "Friends"}, {"turns", Json::array()}};
  for (int i = 0; i < turns; ++i) {
    d["turns"].push_back({{"speaker", i % 2 ? "A" : "B"}, {"text", "turn " + std::to_string(i)}, {"label", label}});
  }
  return d.dump();
}

Corpus many_labels(int per_label) {
  std::string text;
  const auto labels = LabelSet::for_task(Task::kERC).labels;
  int d = 0;
  for (const auto& l : labels) {
    for (int i = 0; i < per_label; ++i) text += dialogue_line("d" + std::to_string(d++), 1, l) + "\n";
  }
  return parse_corpus(text, Task::kERC);
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("label sets hold eight labels with the majority class") {
    for (auto task : {Task::kERC, Task::kRES}) {
      const auto ls = LabelSet::for_task(task);
      CHECK(ls.size() == 8);
      CHECK(ls.contains(ls.majority_label));
      CHECK_NOTHROW(ls.check());
      CHECK(std::set<std::string>(ls.labels.begin(), ls.labels.end()).size() == 8);
    }
    CHECK(LabelSet::for_task(Task::kERC).majority_label == "neutral");
    CHECK(LabelSet::for_task(Task::kRES).majority_label == "Not a resistance strategy");
    CHECK(LabelSet::for_task(Task::kRES).contains("Hesitance"));
    LabelSet broken = LabelSet::for_task(Task::kERC);
    broken.labels.pop_back();
    CHECK_THROWS_AS(broken.check(), Error);
  }

  TEST_CASE("a one-dialogue file parses with turn order kept") {
    const auto c = parse_corpus(kOneDialogue, Task::kERC);
    REQUIRE(c.dialogues().size() == 1);
    const auto& d = c.dialogues()[0];
    CHECK(d.dialogue_id == "d1");
    CHECK(d.domain == "Friends");
    REQUIRE(d.turns.size() == 3);
    CHECK(d.turns[1].speaker == "Rachel");
    CHECK(*d.turns[1].label == "surprise");
    CHECK(c.labeled_refs().size() == 3);
  }

  TEST_CASE("load errors name what went wrong") {
    auto message = [](const std::string& text) {
      try {
        parse_corpus(text, Task::kERC, "f.jsonl");
      } catch (const Error& e) {
        return std::string(e.what());
      }
      return std::string("no error");
    };
    const std::string ok = dialogue_line("a", 1);
    CHECK(message(ok + "\n{not json\n").find("line 2") != std::string::npos);
    const std::string bad_label =
        R"({"dialogue_id":"x9","domain":"F","turns":[{"speaker":"A","text":"t","label":"joyy"}]})";
    const auto m = message(bad_label);
    CHECK(m.find("unknown label") != std::string::npos);
    CHECK(m.find("joyy") != std::string::npos);
    CHECK(m.find("x9") != std::string::npos);
    CHECK(message(ok + "\n" + ok).find("duplicate") != std::string::npos);
    CHECK(message(R"({"dialogue_id":"e","domain":"F","turns":[]})") != "no error");
    CHECK(message(R"({"dialogue_id":"e","domain":"F","turns":[{"speaker":"A","text":"   ","label":null}]})") !=
          "no error");
    CHECK(message(R"({"dialogue_id":"e","domain":"F","turns":[{"speaker":"","text":"x","label":null}]})") !=
          "no error");
  }

  TEST_CASE("unlabeled turns are kept but not referenced") {
    const auto c = parse_corpus(
        R"({"dialogue_id":"p","domain":"P4G","turns":[{"speaker":"Persuader","text":"Donate?","label":null},)"
        R"({"speaker":"Persuadee","text":"Later.","label":"Hesitance"}]})",
        Task::kRES);
    CHECK(c.turn_count() == 2);
    REQUIRE(c.labeled_refs().size() == 1);
    CHECK(c.labeled_refs()[0].turn_index == 1);
  }

  TEST_CASE("shipped friends fixture has 20 dialogues and 140 turns") {
    const auto c = load_corpus(testing::fixture("fixtures/corpora/friends_synth.jsonl"), Task::kERC);
    CHECK(c.dialogues().size() == 20);
    CHECK(c.turn_count() == 140);
  }

  TEST_CASE("context windows") {
    const auto c = parse_corpus(dialogue_line("w", 12), Task::kERC);
    const auto& d = c.dialogues()[0];
    CHECK(context_window(d, 0, 5).empty());
    auto w3 = context_window(d, 3, 5);
    REQUIRE(w3.size() == 3);
    CHECK(w3[0].text == "turn 0");
    CHECK(w3[2].text == "turn 2");
    auto w9 = context_window(d, 9, 5);
    REQUIRE(w9.size() == 5);
    CHECK(w9.front().text == "turn 4");
    CHECK(w9.back().text == "turn 8");
    CHECK(context_window(d, 9).size() == kDefaultContextWidth);
    CHECK(context_window(d, 9, 0).empty());
    CHECK_THROWS_AS(context_window(d, 12, 5), Error);
    // window + target is a contiguous slice
    for (size_t i = 0; i < d.turns.size(); ++i) {
      for (size_t w = 0; w <= 7; ++w) {
        auto win = context_window(d, i, w);
        CHECK(win.size() == std::min(w, i));
        if (!win.empty()) CHECK(&win.back() + 1 == &d.turns[i]);
      }
    }
  }

  TEST_CASE("k-shot splits follow the min rule and are reproducible") {
    const auto c = many_labels(3);
    const auto s5 = make_kshot_split(c, ShotCount::of(5), 7);
    for (const auto& [label, refs] : s5.selected) CHECK(refs.size() == 3);
    const auto s2 = make_kshot_split(c, ShotCount::of(2), 7);
    std::set<ExampleRef> seen;
    for (const auto& [label, refs] : s2.selected) {
      CHECK(refs.size() == 2);
      for (const auto& r : refs) {
        CHECK(seen.insert(r).second);
        REQUIRE(c.resolve(r).label.has_value());
        CHECK(*c.resolve(r).label == label);
      }
    }
    CHECK(make_kshot_split(c, ShotCount::of(2), 7).to_json().dump() == s2.to_json().dump());
    const auto all = make_kshot_split(c, ShotCount::all(), 99);
    CHECK(all.total() == c.labeled_refs().size());
    CHECK(KShotSplit::from_json(s2.to_json()).to_json() == s2.to_json());
  }

  TEST_CASE("k-shot splits differ across seeds") {
    const auto c = many_labels(4);
    std::set<std::string> distinct;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      distinct.insert(make_kshot_split(c, ShotCount::of(2), seed).to_json()["selected"].dump());
    }
    // 6^8 possible splits; 100 draws collide with negligible probability.
    CHECK(distinct.size() >= 95);
  }

  TEST_CASE("labels with no examples produce a warning, not an error") {
    const auto c = parse_corpus(dialogue_line("only", 4, "joy"), Task::kERC);
    const auto s = make_kshot_split(c, ShotCount::of(5), 1);
    CHECK(s.for_label("joy").size() == 4);
    CHECK(s.for_label("anger").empty());
    CHECK(s.warnings.size() == 7);
  }

  TEST_CASE("k-shot pool restricts sampling") {
    const auto c = many_labels(4);
    std::vector<std::string> pool = {"d0", "d1"};
    const auto s = make_kshot_split(c, ShotCount::of(5), 3, &pool);
    for (const auto& r : s.all_refs()) CHECK((r.dialogue_id == "d0" || r.dialogue_id == "d1"));
    CHECK(s.total() == 2);
  }

  TEST_CASE("shot counts") {
    CHECK(ShotCount::from_json(Json("all")).is_all());
    CHECK(ShotCount::from_json(Json(20)).value() == 20);
    CHECK_THROWS(ShotCount::of(0));
    CHECK_THROWS(ShotCount::from_json(Json(-5)));
    CHECK_THROWS(ShotCount::from_json(Json("some")));
  }

  TEST_CASE("dialogue partition sizes and determinism") {
    std::string text;
    for (int i = 0; i < 10; ++i) text += dialogue_line("d" + std::to_string(i), 2) + "\n";
    const auto c = parse_corpus(text, Task::kERC);
    const auto p = split_corpus(c, {}, 5);
    CHECK(p.train.size() == 8);
    CHECK(p.dev.size() == 1);
    CHECK(p.test.size() == 1);
    std::set<std::string> all(p.train.begin(), p.train.end());
    all.insert(p.dev.begin(), p.dev.end());
    all.insert(p.test.begin(), p.test.end());
    CHECK(all.size() == 10);
    CHECK(split_corpus(c, {}, 5).to_json() == p.to_json());
    CHECK_THROWS_AS(split_corpus(c, {0.7, 0.1, 0.1}, 5), Error);
    CHECK_THROWS_AS(split_corpus(c, {0.8, 0.2, 0.0}, 5), Error);
    const auto two = parse_corpus(dialogue_line("a", 1) + "\n" + dialogue_line("b", 1), Task::kERC);
    CHECK_THROWS_AS(split_corpus(two, {}, 1), Error);
  }

  TEST_CASE("example refs") {
    const auto r = ExampleRef::parse("dlg#12");
    CHECK(r.dialogue_id == "dlg");
    CHECK(r.turn_index == 12);
    CHECK(r.id() == "dlg#12");
    CHECK(ExampleRef::parse("a#b#3").dialogue_id == "a#b");
    CHECK_THROWS(ExampleRef::parse("nohash"));
  }
}
