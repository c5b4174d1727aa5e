// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any criterion fails.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "golden_inputs.hpp"
#include "smrat/augment.hpp"
#include "smrat/config.hpp"
#include "smrat/eval.hpp"
#include "smrat/fewshot.hpp"
#include "smrat/pipeline.hpp"
#include "smrat/rationale.hpp"
#include "support.hpp"

using namespace smrat;
namespace fs = std::filesystem;

namespace {

// Collects failed expectations for one criterion.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

int g_failed = 0;

void criterion(const std::string& name, double budget_s, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "took %.2f s, budget %.0f s", secs, budget_s);
    c.failures.push_back(buf);
  }
  const bool ok = c.failures.empty();
  if (!ok) ++g_failed;
  std::printf("%s  %-28s (%.2f s)", ok ? "PASS" : "FAIL", name.c_str(), secs);
  if (!ok) {
    std::printf("  %s", c.failures.front().c_str());
    if (c.failures.size() > 1) std::printf(" (+%zu more)", c.failures.size() - 1);
  }
  std::printf("\n");
  std::fflush(stdout);
}

size_t occurrences(const std::string& hay, const std::string& needle) {
  size_t n = 0;
  for (size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
  return n;
}

// Fails loudly if the pipeline ever tries to reach a model.
class NoNetwork : public Transport {
 public:
  std::atomic<int> calls{0};
  ChatResponse send(const ChatRequest&) override {
    ++calls;
    throw ProviderError(0, "network access during replay");
  }
};

void prompt_goldens(Check& c) {
  const std::pair<std::string, RenderedPrompt> cases[] = {
      {"erc_rationale_prompt.txt", testing::golden_erc_rationale()},
      {"res_rationale_prompt.txt", testing::golden_res_rationale()},
      {"probe_prompt_2shot_all.txt", testing::golden_probe_2shot_all()},
      {"probe_prompt_0shot_none.txt", testing::golden_probe_0shot_none()},
  };
  for (const auto& [file, p] : cases) {
    c.expect(p.text == testing::slurp(testing::fixture("tests/golden/" + file)), file + " differs");
  }
  const auto erc = testing::shipped_template("erc");
  for (const char* h : {"Speaker's Intention in the final utterance:",
                        "Assumptions about the conversation in the final utterance:",
                        "Implicit Information in the final utterance:"}) {
    c.expect(occurrences(erc.output_template, h) == 1, std::string("ERC header count: ") + h);
  }
  const auto& erc_text = cases[0].second.text;
  c.expect(erc_text.find(erc.task_description) == 0, "ERC prompt does not open with the task description");
  c.expect(erc_text.find(erc.instructions) != std::string::npos, "ERC prompt lacks the instructions");
  c.expect(erc_text.ends_with("Monica: Oh my God, this is the best birthday ever!"), "ERC prompt must end with the target");
  const auto& probe = cases[2].second.text;
  c.expect(occurrences(probe, "[CONTEXT]") == 3 && occurrences(probe, "[RESPONSE]") == 3 &&
               occurrences(probe, "[OUTPUT]") == 3,
           "probe marker counts");
  c.expect(probe.ends_with("[OUTPUT]"), "probe prompt must end with [OUTPUT]");
  c.expect(probe.find("[CONTEXT]") < probe.find("[RESPONSE]") && probe.find("[RESPONSE]") < probe.find("[OUTPUT]"),
           "probe marker order");
}

void parser_suite(Check& c) {
  const Json j = Json::parse(testing::slurp(testing::fixture("tests/fixtures/parser_cases.json")));
  const auto& cases = j.at("cases");
  c.expect(cases.size() == 40, "expected 40 parser cases");
  size_t well_formed = 0, malformed = 0;
  std::vector<ValidityReport> reports;
  for (const auto& k : cases) {
    const std::string id = k.at("id");
    (id.starts_with("m") ? malformed : well_formed)++;
    std::vector<RationaleSet> got;
    if (k.at("kind") == "single") {
      got = {parse_single(k.at("response").get<std::string>())};
    } else {
      got = parse_per_line(k.at("response").get<std::string>(), k.at("expected_blocks").get<size_t>());
    }
    const auto& want = k.at("expected");
    if (got.size() != want.size()) {
      c.expect(false, id + ": block count");
      continue;
    }
    for (size_t b = 0; b < got.size(); ++b) {
      c.expect(got[b].intention == want[b].at("intention").get<std::string>(), id + ": intention");
      c.expect(got[b].assumption == want[b].at("assumption").get<std::string>(), id + ": assumption");
      c.expect(got[b].implicit == want[b].at("implicit").get<std::string>(), id + ": implicit");
    }
    const auto rep = validate(got.back(), k.at("speaker").get<std::string>(),
                              {k.at("aliases").get<std::vector<std::string>>(), SubjectScope::kIntention});
    c.expect(rep.valid == k.at("valid").get<bool>(), id + ": validity verdict");
    reports.push_back(rep);
  }
  c.expect(well_formed == 30 && malformed == 10, "fixture should hold 30 well-formed and 10 malformed");
  c.expect(validity_rate(reports) == 0.925, "validity rate " + std::to_string(validity_rate(reports)));

  std::mt19937_64 rng(2024);
  const std::vector<std::string> pieces = {"Speaker's Intention:", "Assumptions about the conversation:",
                                           "Implicit Information:", "\n", "\r\n", "**", "a)", "1.", "- ",
                                           "The speaker", "\xE2\x80\x99", "\xFF", ":", " ", "x"};
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const int n = static_cast<int>(rng() % 40);
    for (int t = 0; t < n; ++t) {
      if (rng() % 4 == 0) s.push_back(static_cast<char>(rng() % 256));
      else s += pieces[rng() % pieces.size()];
    }
    try {
      const auto one = parse_single(s);
      const auto many = parse_per_line(s, 1 + rng() % 6);
      validate(one, "A");
    } catch (...) {
      c.expect(false, "fuzz input raised");
      return;
    }
  }
}

void augmentation(Check& c) {
  testing::TempDir erc_dir("acc_aug_erc"), res_dir("acc_aug_res");
  size_t checked = 0;
  for (const auto& [cfg, dir] : {std::pair{"config_erc.json", erc_dir.path()}, std::pair{"config_res.json", res_dir.path()}}) {
    auto config = load_config(testing::fixture(std::string("fixtures/configs/") + cfg), {{"output_dir", dir.string()}});
    Pipeline p(config, std::make_shared<NoNetwork>());
    p.ingest();
    p.rationalize();
    for (const auto& entry : config.corpora) {
      const Corpus corpus = load_corpus(entry.path, config.task);
      const auto store = RationaleStore::load(dir / "rationales" / (entry.name + ".jsonl"));
      for (const auto& ref : corpus.labeled_refs()) {
        const auto& d = corpus.at(ref.dialogue_id);
        const auto window = context_window(d, ref.turn_index, config.context_width);
        const Turn& target = corpus.resolve(ref);
        const auto* rs = store.find(ref);
        if (!rs) {
          c.expect(false, "no stored rationale for " + ref.id());
          continue;
        }
        const auto none = render_input(window, target, nullptr, RationaleMode::kNone);
        const size_t base = window.empty() ? 0 : 1;
        c.expect(count_separators(none.text) == base, ref.id() + ": NONE separator count");
        for (auto mode : {RationaleMode::kIntention, RationaleMode::kAssumption, RationaleMode::kImplicit,
                          RationaleMode::kAll}) {
          const auto r = render_input(window, target, rs, mode);
          c.expect(r.text.starts_with(none.text), ref.id() + ": NONE prefix");
          if (rs->valid) {
            const size_t extra = mode == RationaleMode::kAll ? 3 : 1;
            c.expect(count_separators(r.text) == base + extra, ref.id() + ": separator count");
            c.expect(!r.fallback, ref.id() + ": unexpected fallback");
          } else {
            c.expect(r.text == none.text && r.fallback, ref.id() + ": fallback must equal NONE");
          }
        }
        ++checked;
      }
    }
  }
  c.expect(checked == 140 + 75 + 62 + 58, "checked " + std::to_string(checked) + " examples");

  Json j = Json::parse(testing::slurp(testing::fixture("fixtures/configs/config_erc.json")));
  j["context_width"] = 5;
  j["k"] = {5, 10, 20, 50, 100};
  const auto cfg = parse_config(j, testing::fixture("fixtures/configs"));
  c.expect(cfg.context_width == 5, "context width 5");
  c.expect(cfg.k.size() == 5 && cfg.k[0].value() == 5 && cfg.k[4].value() == 100, "k 5..100 accepted");
  j.erase("k");
  j.erase("context_width");
  const auto defaults = parse_config(j, testing::fixture("fixtures/configs"));
  std::vector<int> ks;
  for (const auto& k : defaults.k) ks.push_back(k.value());
  c.expect(defaults.context_width == 5 && ks == std::vector<int>{5, 10, 20, 50, 100}, "defaults");
}

void macro_f1_oracle(Check& c) {
  const std::vector<std::string> abc = {"A", "B", "C"};
  const std::vector<std::string> g = {"A", "A", "B", "C"}, p = {"A", "B", "B", "C"};
  c.expect(std::abs(macro_f1(g, p, abc) - 7.0 / 9.0) < 1e-9, "7/9 case");
  c.expect(std::abs(testing::oracle_macro_f1(g, p, abc) - 7.0 / 9.0) < 1e-9, "oracle 7/9 case");
  std::mt19937_64 rng(5);
  const auto ls = LabelSet::for_task(Task::kERC).labels;
  for (int t = 0; t < 20; ++t) {
    const size_t n = 1 + rng() % 25;
    std::vector<std::string> gg, pp;
    for (size_t i = 0; i < n; ++i) {
      gg.push_back(ls[rng() % 8]);
      pp.push_back(rng() % 2 ? gg.back() : ls[rng() % 8]);
    }
    c.expect(std::abs(macro_f1(gg, pp, ls) - testing::oracle_macro_f1(gg, pp, ls)) < 1e-9,
             "random case " + std::to_string(t));
  }
}

double acc_span(std::span<const int> g, std::span<const int> p) {
  double hit = 0;
  for (size_t i = 0; i < g.size(); ++i) hit += g[i] == p[i];
  return hit / static_cast<double>(g.size());
}

void bootstrap(Check& c) {
  const std::vector<int> gold = {0, 0, 0}, a = {0, 0, 1}, b = {1, 1, 0};
  const double exact = testing::oracle_exact_bootstrap_p(
      gold, a, b, [](const std::vector<int>& x, const std::vector<int>& y) { return testing::oracle_accuracy(x, y); });
  const auto r = paired_bootstrap(gold, a, b, acc_span, 100000, 20240601);
  char buf[96];
  std::snprintf(buf, sizeof buf, "p=%.4f exact=%.4f", r.p_value, exact);
  c.expect(std::abs(r.p_value - exact) <= 0.02, buf);
  const auto same = paired_bootstrap(gold, a, a, acc_span, 100000, 1);
  c.expect(same.degenerate && same.p_value == 1.0 && same.exceed_count == 0, "identical systems");
  const auto again = paired_bootstrap(gold, a, b, acc_span, 100000, 20240601);
  c.expect(again.exceed_count == r.exceed_count, "seeded determinism");
  const auto one_thread = paired_bootstrap(gold, a, b, acc_span, 100000, 20240601, 1);
  c.expect(one_thread.exceed_count == r.exceed_count, "thread count changed the result");
}

void lindell(Check& c) {
  c.expect(lindell_irr({{2, 2, 2}, {4, 4, 4}}, 5).r_wg == 1.0, "identical raters");
  c.expect(std::abs(lindell_irr({{4, 5}, {5, 5}}, 5).r_wg - 0.875) < 1e-9, "0.875 case");
  c.expect(std::abs(lindell_irr({{1, 5}}, 5).r_wg + 3.0) < 1e-9, "-3.0 case");
  c.expect(uniform_null_variance(5) == 2.0, "null variance for a 1-5 scale");
}

void end_to_end(Check& c) {
  testing::TempDir first("acc_e2e_1"), second("acc_e2e_2");
  const auto cfg_path = testing::fixture("fixtures/configs/config_erc.json");
  auto net = std::make_shared<NoNetwork>();
  for (const auto* dir : {&first, &second}) {
    const auto r = Pipeline(load_config(cfg_path, {{"output_dir", dir->path().string()}}), net).run_all();
    c.expect(r.failures == 0, "stage failures: " + std::to_string(r.failures));
  }
  c.expect(net->calls == 0, "a model was called during replay");
  const auto a = testing::snapshot(first.path());
  const auto b = testing::snapshot(second.path());
  c.expect(!a.empty() && a == b, "the two runs differ");

  const auto it = a.find("report/table.txt");
  c.expect(it != a.end(), "report/table.txt missing");
  if (it == a.end()) return;
  c.expect(it->second.find("\xC2\xB1") != std::string::npos, "report lacks mean\xC2\xB1std cells");
  size_t reports = 0;
  for (const auto& [rel, bytes] : a) {
    if (!rel.starts_with("reports/")) continue;
    const Json r = Json::parse(bytes);
    ++reports;
    c.expect(r["per_seed"].size() == 3, rel + ": expected 3 seeds");
    c.expect(r["std"].is_number(), rel + ": std missing");
    const std::string cell = r["formatted"].get<std::string>();
    c.expect(it->second.find(cell) != std::string::npos, rel + ": cell " + cell + " not in the table");
  }
  c.expect(reports > 0, "no reports written");
}

void aggregation(Check& c) {
  const auto ls = LabelSet::for_task(Task::kERC);
  const ProbeAnswer values[] = {ProbeAnswer::kYes, ProbeAnswer::kNo, ProbeAnswer::kUnparseable};
  size_t combos = 0;
  for (int code = 0; code < 6561; ++code) {
    std::map<std::string, ProbeAnswer> answers;
    int x = code, first_yes = -1, yeses = 0;
    for (int l = 0; l < 8; ++l) {
      const ProbeAnswer a = values[x % 3];
      x /= 3;
      answers[ls.labels[l]] = a;
      if (a == ProbeAnswer::kYes) {
        ++yeses;
        if (first_yes < 0) first_yes = l;
      }
    }
    const auto rec = aggregate_probes("e", answers, ls);
    std::string want;
    Resolution how;
    if (yeses == 1) {
      want = ls.labels[first_yes];
      how = Resolution::kUniqueYes;
    } else if (yeses > 1) {
      want = ls.labels[first_yes];
      how = Resolution::kTieBroken;
    } else {
      want = ls.majority_label;
      how = Resolution::kDefaultMajority;
    }
    if (rec.predicted != want || rec.resolution != how || !ls.contains(rec.predicted)) {
      c.expect(false, "combination " + std::to_string(code));
    }
    ++combos;
  }
  c.expect(combos == 6561, "combination count");
}

}  // namespace

int main() {
  criterion("prompt goldens", 1, prompt_goldens);
  criterion("parser fixture suite", 5, parser_suite);
  criterion("augmentation invariants", 0, augmentation);
  criterion("macro-F1 oracle", 0, macro_f1_oracle);
  criterion("paired bootstrap", 30, bootstrap);
  criterion("Lindell agreement", 0, lindell);
  criterion("end-to-end replay", 120, end_to_end);
  criterion("few-shot aggregation", 10, aggregation);
  std::printf("%s\n", g_failed == 0 ? "all criteria passed" : (std::to_string(g_failed) + " criteria failed").c_str());
  return g_failed == 0 ? 0 : 1;
}
