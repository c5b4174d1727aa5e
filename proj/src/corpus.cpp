#include "smrat/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace smrat {

std::string to_string(Task task) { return task == Task::kERC ? "ERC" : "RES"; }

Task task_from_string(std::string_view s) {
  if (util::iequals(s, "ERC")) return Task::kERC;
  if (util::iequals(s, "RES")) return Task::kRES;
  throw Error("unknown task '" + std::string(s) + "' (expected ERC or RES)");
}

LabelSet LabelSet::for_task(Task task) {
  LabelSet ls;
  ls.task = task;
  if (task == Task::kERC) {
    ls.labels = {"neutral", "joy", "sadness", "surprise", "fear", "disgust", "anger", "other"};
    ls.majority_label = "neutral";
  } else {
    ls.labels = {"Source Derogation", "Counter Argument",    "Personal Choice",
                 "Information Inquiry", "Self Pity",         "Hesitance",
                 "Self-assertion",      "Not a resistance strategy"};
    ls.majority_label = "Not a resistance strategy";
  }
  return ls;
}

std::optional<size_t> LabelSet::index_of(std::string_view label) const {
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return i;
  }
  return std::nullopt;
}

void LabelSet::check() const {
  if (labels.size() != 8) {
    throw Error("label set must have exactly 8 labels, got " + std::to_string(labels.size()));
  }
  std::set<std::string> uniq(labels.begin(), labels.end());
  if (uniq.size() != labels.size()) throw Error("label set has duplicate labels");
  if (!contains(majority_label)) {
    throw Error("majority label '" + majority_label + "' is not in the label set");
  }
}

std::string ExampleRef::id() const { return dialogue_id + "#" + std::to_string(turn_index); }

ExampleRef ExampleRef::parse(std::string_view example_id) {
  const auto hash = example_id.rfind('#');
  if (hash == std::string_view::npos || hash == 0 || hash + 1 == example_id.size()) {
    throw Error("malformed example id '" + std::string(example_id) + "'");
  }
  ExampleRef ref;
  ref.dialogue_id = std::string(example_id.substr(0, hash));
  try {
    size_t used = 0;
    const std::string digits(example_id.substr(hash + 1));
    ref.turn_index = std::stoul(digits, &used);
    if (used != digits.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error("malformed example id '" + std::string(example_id) + "'");
  }
  return ref;
}

Corpus::Corpus(std::vector<Dialogue> dialogues, LabelSet labels)
    : dialogues_(std::move(dialogues)), labels_(std::move(labels)) {
  for (size_t i = 0; i < dialogues_.size(); ++i) {
    if (!index_.emplace(dialogues_[i].dialogue_id, i).second) {
      throw Error("duplicate dialogue_id '" + dialogues_[i].dialogue_id + "'");
    }
  }
}

const Dialogue* Corpus::find(std::string_view dialogue_id) const {
  auto it = index_.find(dialogue_id);
  return it == index_.end() ? nullptr : &dialogues_[it->second];
}

const Dialogue& Corpus::at(std::string_view dialogue_id) const {
  const Dialogue* d = find(dialogue_id);
  if (!d) throw Error("unknown dialogue_id '" + std::string(dialogue_id) + "'");
  return *d;
}

const Turn& Corpus::resolve(const ExampleRef& ref) const {
  const Dialogue& d = at(ref.dialogue_id);
  if (ref.turn_index >= d.turns.size()) {
    throw Error("turn index out of range in example " + ref.id());
  }
  return d.turns[ref.turn_index];
}

size_t Corpus::position(std::string_view dialogue_id) const {
  auto it = index_.find(dialogue_id);
  if (it == index_.end()) throw Error("unknown dialogue_id '" + std::string(dialogue_id) + "'");
  return it->second;
}

std::vector<ExampleRef> Corpus::labeled_refs() const {
  std::vector<ExampleRef> refs;
  for (const auto& d : dialogues_) {
    for (size_t i = 0; i < d.turns.size(); ++i) {
      if (d.turns[i].label) refs.push_back({d.dialogue_id, i});
    }
  }
  return refs;
}

size_t Corpus::turn_count() const {
  size_t n = 0;
  for (const auto& d : dialogues_) n += d.turns.size();
  return n;
}

namespace {

std::string require_string(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw Error(where + ": missing or non-string field '" + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

Corpus parse_corpus(std::string_view jsonl, Task task, std::string_view source_name) {
  const LabelSet labels = LabelSet::for_task(task);
  std::vector<Dialogue> dialogues;
  std::set<std::string> seen;
  const auto lines = util::split_lines(util::normalize_newlines(jsonl));
  for (size_t n = 0; n < lines.size(); ++n) {
    if (util::trim(lines[n]).empty()) continue;
    const std::string where = std::string(source_name) + ":" + std::to_string(n + 1);
    Json rec;
    try {
      rec = Json::parse(lines[n]);
    } catch (const Json::parse_error&) {
      throw Error(where + ": malformed JSON on line " + std::to_string(n + 1));
    }
    if (!rec.is_object()) throw Error(where + ": record is not a JSON object");
    Dialogue d;
    d.dialogue_id = require_string(rec, "dialogue_id", where);
    if (d.dialogue_id.empty()) throw Error(where + ": empty dialogue_id");
    d.domain = require_string(rec, "domain", where);
    auto turns = rec.find("turns");
    if (turns == rec.end() || !turns->is_array() || turns->empty()) {
      throw Error(where + ": dialogue '" + d.dialogue_id + "' has no turns");
    }
    for (size_t t = 0; t < turns->size(); ++t) {
      const Json& tj = (*turns)[t];
      const std::string twhere = where + " turn " + std::to_string(t);
      if (!tj.is_object()) throw Error(twhere + ": turn is not an object");
      Turn turn;
      turn.speaker = require_string(tj, "speaker", twhere);
      turn.text = require_string(tj, "text", twhere);
      if (util::trim(turn.speaker).empty()) throw Error(twhere + ": empty speaker");
      if (util::trim(turn.text).empty()) throw Error(twhere + ": empty text");
      auto lab = tj.find("label");
      if (lab != tj.end() && !lab->is_null()) {
        if (!lab->is_string()) throw Error(twhere + ": label must be a string or null");
        std::string l = lab->get<std::string>();
        if (!labels.contains(l)) {
          throw Error(where + ": unknown label '" + l + "' in dialogue '" + d.dialogue_id + "'");
        }
        turn.label = std::move(l);
      }
      d.turns.push_back(std::move(turn));
    }
    if (!seen.insert(d.dialogue_id).second) {
      throw Error(where + ": duplicate dialogue_id '" + d.dialogue_id + "'");
    }
    dialogues.push_back(std::move(d));
  }
  return Corpus(std::move(dialogues), labels);
}

Corpus load_corpus(const std::filesystem::path& path, Task task) {
  return parse_corpus(util::read_file(path), task, path.string());
}

Json dialogue_to_json(const Dialogue& d) {
  Json turns = Json::array();
  for (const auto& t : d.turns) {
    turns.push_back({{"speaker", t.speaker},
                     {"text", t.text},
                     {"label", t.label ? Json(*t.label) : Json(nullptr)}});
  }
  return {{"dialogue_id", d.dialogue_id}, {"domain", d.domain}, {"turns", std::move(turns)}};
}

std::span<const Turn> context_window(const Dialogue& dialogue, size_t turn_index, size_t width) {
  if (turn_index >= dialogue.turns.size()) {
    throw Error("turn index " + std::to_string(turn_index) + " out of range for dialogue '" +
                dialogue.dialogue_id + "' with " + std::to_string(dialogue.turns.size()) + " turns");
  }
  const size_t n = std::min(width, turn_index);
  return std::span<const Turn>(dialogue.turns).subspan(turn_index - n, n);
}

ShotCount ShotCount::of(int k) {
  if (k < 1) throw Error("k must be positive, got " + std::to_string(k));
  ShotCount s;
  s.k_ = k;
  return s;
}

ShotCount ShotCount::from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "all") return all();
    throw Error("k must be a positive integer or \"all\", got \"" + j.get<std::string>() + "\"");
  }
  if (j.is_number_integer()) return of(j.get<int>());
  throw Error("k must be a positive integer or \"all\", got " + j.dump());
}

int ShotCount::value() const {
  if (!k_) throw Error("k is \"all\"");
  return *k_;
}

Json ShotCount::to_json() const { return k_ ? Json(*k_) : Json("all"); }

std::string ShotCount::to_string() const { return k_ ? std::to_string(*k_) : "all"; }

const std::vector<ExampleRef>& KShotSplit::for_label(std::string_view label) const {
  for (const auto& [l, refs] : selected) {
    if (l == label) return refs;
  }
  throw Error("label '" + std::string(label) + "' not in split");
}

std::vector<ExampleRef> KShotSplit::all_refs() const {
  std::vector<ExampleRef> out;
  for (const auto& [l, refs] : selected) out.insert(out.end(), refs.begin(), refs.end());
  return out;
}

size_t KShotSplit::total() const {
  size_t n = 0;
  for (const auto& [l, refs] : selected) n += refs.size();
  return n;
}

Json KShotSplit::to_json() const {
  // Labels are emitted as an ordered array of pairs under "label_order" so the
  // LabelSet order survives the sorted-key "selected" object.
  Json sel = Json::object();
  Json order = Json::array();
  for (const auto& [label, refs] : selected) {
    Json arr = Json::array();
    for (const auto& r : refs) arr.push_back({{"dialogue_id", r.dialogue_id}, {"turn_index", r.turn_index}});
    sel[label] = std::move(arr);
    order.push_back(label);
  }
  return {{"k", k.to_json()},
          {"seed", seed},
          {"selected", std::move(sel)},
          {"label_order", std::move(order)},
          {"warnings", warnings},
          {"sampling", "per-label without replacement, redrawn per seed"}};
}

KShotSplit KShotSplit::from_json(const Json& j) {
  KShotSplit s;
  s.k = ShotCount::from_json(j.at("k"));
  s.seed = j.at("seed").get<std::uint64_t>();
  std::vector<std::string> order;
  if (j.contains("label_order")) {
    order = j.at("label_order").get<std::vector<std::string>>();
  } else {
    for (const auto& [label, _] : j.at("selected").items()) order.push_back(label);
  }
  for (const auto& label : order) {
    std::vector<ExampleRef> refs;
    for (const auto& r : j.at("selected").at(label)) {
      refs.push_back({r.at("dialogue_id").get<std::string>(), r.at("turn_index").get<size_t>()});
    }
    s.selected.emplace_back(label, std::move(refs));
  }
  if (j.contains("warnings")) s.warnings = j.at("warnings").get<std::vector<std::string>>();
  return s;
}

KShotSplit make_kshot_split(const Corpus& corpus, ShotCount k, std::uint64_t seed,
                            const std::vector<std::string>* pool) {
  std::set<std::string, std::less<>> allowed;
  if (pool) allowed.insert(pool->begin(), pool->end());

  KShotSplit split;
  split.k = k;
  split.seed = seed;
  std::mt19937_64 rng(seed);
  const auto refs = corpus.labeled_refs();
  for (const auto& label : corpus.labels().labels) {
    std::vector<ExampleRef> candidates;
    for (const auto& r : refs) {
      if (pool && !allowed.contains(r.dialogue_id)) continue;
      if (*corpus.resolve(r).label == label) candidates.push_back(r);
    }
    if (candidates.empty()) {
      split.warnings.push_back("label '" + label + "' has no examples");
      split.selected.emplace_back(label, std::vector<ExampleRef>{});
      continue;
    }
    if (k.is_all() || static_cast<size_t>(k.value()) >= candidates.size()) {
      split.selected.emplace_back(label, std::move(candidates));
      continue;
    }
    // Partial Fisher-Yates over positions, then restore corpus order.
    const size_t want = static_cast<size_t>(k.value());
    std::vector<size_t> idx(candidates.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (size_t i = 0; i < want; ++i) {
      size_t j = i + util::uniform_below(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(want);
    std::sort(idx.begin(), idx.end());
    std::vector<ExampleRef> chosen;
    for (size_t i : idx) chosen.push_back(candidates[i]);
    split.selected.emplace_back(label, std::move(chosen));
  }
  return split;
}

Json DialoguePartition::to_json() const {
  return {{"train", train}, {"dev", dev}, {"test", test}};
}

DialoguePartition DialoguePartition::from_json(const Json& j) {
  DialoguePartition p;
  p.train = j.at("train").get<std::vector<std::string>>();
  p.dev = j.at("dev").get<std::vector<std::string>>();
  p.test = j.at("test").get<std::vector<std::string>>();
  return p;
}

DialoguePartition split_corpus(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.dev <= 0 || ratios.test <= 0) {
    throw Error("split ratios must all be positive");
  }
  if (std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9) {
    throw Error("split ratios must sum to 1");
  }
  const size_t n = corpus.dialogues().size();
  if (n < 3) {
    throw Error("need at least 3 dialogues to split, got " + std::to_string(n));
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[util::uniform_below(rng, i + 1)]);
  }
  // Tolerance guards against products like 0.29 * 100 landing just below an integer.
  const auto n_dev = static_cast<size_t>(std::floor(static_cast<double>(n) * ratios.dev + 1e-9));
  const auto n_test = static_cast<size_t>(std::floor(static_cast<double>(n) * ratios.test + 1e-9));

  std::vector<size_t> dev(order.begin(), order.begin() + n_dev);
  std::vector<size_t> test(order.begin() + n_dev, order.begin() + n_dev + n_test);
  std::vector<size_t> train(order.begin() + n_dev + n_test, order.end());
  auto ids = [&](std::vector<size_t> v) {
    std::sort(v.begin(), v.end());
    std::vector<std::string> out;
    for (size_t i : v) out.push_back(corpus.dialogues()[i].dialogue_id);
    return out;
  };
  return {ids(train), ids(dev), ids(test)};
}

}  // namespace smrat
