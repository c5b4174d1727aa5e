#include "smrat/fewshot.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace smrat {

std::string to_string(ProbeAnswer a) {
  switch (a) {
    case ProbeAnswer::kYes: return "yes";
    case ProbeAnswer::kNo: return "no";
    case ProbeAnswer::kUnparseable: return "unparseable";
  }
  return "unparseable";
}

ProbeAnswer probe_answer_from_string(std::string_view s) {
  if (s == "yes") return ProbeAnswer::kYes;
  if (s == "no") return ProbeAnswer::kNo;
  if (s == "unparseable") return ProbeAnswer::kUnparseable;
  throw Error("unknown probe answer '" + std::string(s) + "'");
}

ProbeAnswer parse_probe_answer(std::string_view response) {
  size_t b = 0;
  while (b < response.size() && std::isspace(static_cast<unsigned char>(response[b]))) ++b;
  size_t e = b;
  while (e < response.size() && !std::isspace(static_cast<unsigned char>(response[e]))) ++e;
  std::string token;
  for (char c : response.substr(b, e - b)) {
    if (std::ispunct(static_cast<unsigned char>(c))) continue;
    token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (token == "yes") return ProbeAnswer::kYes;
  if (token == "no") return ProbeAnswer::kNo;
  return ProbeAnswer::kUnparseable;
}

std::string to_string(Resolution r) {
  switch (r) {
    case Resolution::kUniqueYes: return "unique_yes";
    case Resolution::kTieBroken: return "tie_broken";
    case Resolution::kDefaultMajority: return "default_majority";
    case Resolution::kModel: return "model";
  }
  return "model";
}

Resolution resolution_from_string(std::string_view s) {
  if (s == "unique_yes") return Resolution::kUniqueYes;
  if (s == "tie_broken") return Resolution::kTieBroken;
  if (s == "default_majority") return Resolution::kDefaultMajority;
  if (s == "model") return Resolution::kModel;
  throw Error("unknown resolution '" + std::string(s) + "'");
}

Json PredictionRecord::to_json() const {
  Json per = Json::object();
  for (const auto& [label, a] : per_label) per[label] = to_string(a);
  return {{"example_id", example_id},
          {"predicted", predicted},
          {"per_label", std::move(per)},
          {"resolution", to_string(resolution)}};
}

PredictionRecord PredictionRecord::from_json(const Json& j) {
  PredictionRecord r;
  r.example_id = j.at("example_id").get<std::string>();
  r.predicted = j.at("predicted").get<std::string>();
  if (auto it = j.find("per_label"); it != j.end() && it->is_object()) {
    for (const auto& [label, a] : it->items()) r.per_label[label] = probe_answer_from_string(a.get<std::string>());
  }
  r.resolution = resolution_from_string(j.value("resolution", "model"));
  return r;
}

PredictionRecord aggregate_probes(std::string example_id, const std::map<std::string, ProbeAnswer>& answers,
                                  const LabelSet& labels) {
  PredictionRecord rec;
  rec.example_id = std::move(example_id);
  std::vector<size_t> yes;
  for (size_t i = 0; i < labels.labels.size(); ++i) {
    auto it = answers.find(labels.labels[i]);
    if (it == answers.end()) {
      throw Error("no probe answer for label '" + labels.labels[i] + "' on " + rec.example_id);
    }
    rec.per_label[it->first] = it->second;
    if (it->second == ProbeAnswer::kYes) yes.push_back(i);
  }
  if (yes.size() == 1) {
    rec.predicted = labels.labels[yes.front()];
    rec.resolution = Resolution::kUniqueYes;
  } else if (yes.size() > 1) {
    rec.predicted = labels.labels[yes.front()];
    rec.resolution = Resolution::kTieBroken;
  } else {
    rec.predicted = labels.majority_label;
    rec.resolution = Resolution::kDefaultMajority;
  }
  return rec;
}

LabelDefinitions LabelDefinitions::from_json(const Json& j) {
  LabelDefinitions d;
  for (const auto& [dataset, table] : j.at("definitions").items()) {
    for (const auto& [label, text] : table.items()) d.by_dataset_[dataset][label] = text.get<std::string>();
  }
  if (!d.by_dataset_.contains("default")) throw Error("label definitions need a \"default\" table");
  return d;
}

LabelDefinitions LabelDefinitions::load(const std::filesystem::path& path) {
  try {
    return from_json(Json::parse(util::read_file(path)));
  } catch (const Json::exception& e) {
    throw Error("label definitions " + path.string() + ": " + e.what());
  }
}

const std::string& LabelDefinitions::lookup(std::string_view dataset, std::string_view label) const {
  for (std::string_view table : {dataset, std::string_view("default")}) {
    auto t = by_dataset_.find(table);
    if (t == by_dataset_.end()) continue;
    auto it = t->second.find(std::string(label));
    if (it != t->second.end()) return it->second;
  }
  throw Error("no definition for label '" + std::string(label) + "'");
}

namespace {

std::vector<ExampleRef> draw(std::vector<ExampleRef> pool, size_t n, std::mt19937_64& rng) {
  n = std::min(n, pool.size());
  for (size_t i = 0; i < n; ++i) {
    size_t j = i + util::uniform_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  return pool;
}

}  // namespace

std::vector<ExampleRef> sample_probe_shots(const Corpus& corpus, const std::vector<ExampleRef>& train_refs,
                                           const std::string& label, size_t per_side, std::uint64_t seed) {
  const auto pos = corpus.labels().index_of(label);
  if (!pos) throw Error("label '" + label + "' is not in the label set");
  if (per_side == 0) return {};
  std::vector<ExampleRef> positives, negatives;
  for (const auto& r : train_refs) {
    const auto& gold = corpus.resolve(r).label;
    if (!gold) continue;
    (*gold == label ? positives : negatives).push_back(r);
  }
  std::mt19937_64 rng(util::mix_seed(seed, *pos));
  auto out = draw(std::move(positives), per_side, rng);
  auto neg = draw(std::move(negatives), per_side, rng);
  out.insert(out.end(), neg.begin(), neg.end());
  return out;
}

ProbeItem make_probe_item(const Corpus& corpus, const ExampleRef& ref, const RationaleStore& store,
                          RationaleMode mode, size_t context_width) {
  const Dialogue& d = corpus.at(ref.dialogue_id);
  const auto window = context_window(d, ref.turn_index, context_width);
  ProbeItem item;
  item.context.assign(window.begin(), window.end());
  item.response = d.turns[ref.turn_index];
  if (mode != RationaleMode::kNone) {
    if (const auto* rs = store.find(ref); rs && rs->valid) item.rationales = rs->rationales;
  }
  return item;
}

ChatRequest make_probe_request(const RenderedPrompt& prompt, const ProbeSettings& settings, std::string tag) {
  ChatRequest req;
  req.model = settings.model;
  req.prompt = prompt.text;
  req.temperature = settings.temperature;
  req.max_tokens = settings.max_tokens;
  req.request_tag = std::move(tag);
  return req;
}

namespace {

std::vector<ProbeShot> build_shots(const Corpus& corpus, const std::vector<ExampleRef>& refs,
                                   const std::string& label, const RationaleStore& store, RationaleMode mode,
                                   size_t context_width) {
  std::vector<ProbeShot> shots;
  for (const auto& r : refs) {
    ProbeShot s;
    s.item = make_probe_item(corpus, r, store, mode, context_width);
    s.positive = corpus.resolve(r).label == label;
    shots.push_back(std::move(s));
  }
  return shots;
}

RenderedPrompt render_probe(const Corpus& corpus, const ExampleRef& ref, const std::string& label,
                            std::span<const ProbeShot> shots, const RationaleStore& store, RationaleMode mode,
                            size_t context_width, const LabelDefinitions& defs) {
  const Dialogue& d = corpus.at(ref.dialogue_id);
  ProbeSpec spec{label, d.domain, defs.lookup(d.domain, label), mode};
  return build_probe_prompt(corpus.labels(), spec, shots,
                            make_probe_item(corpus, ref, store, mode, context_width));
}

}  // namespace

BinaryProbe probe_example(const Corpus& corpus, const ExampleRef& ref, const std::string& label,
                          std::span<const ProbeShot> shots, const RationaleStore& store, RationaleMode mode,
                          size_t context_width, const LabelDefinitions& defs, const ProbeSettings& settings,
                          const Gateway& gateway, GatewayMode gateway_mode) {
  BinaryProbe probe;
  probe.label = label;
  probe.prompt = render_probe(corpus, ref, label, shots, store, mode, context_width, defs);
  try {
    const auto resp = gateway.complete(make_probe_request(probe.prompt, settings, "probe:" + ref.id() + ":" + label),
                                       gateway_mode);
    probe.raw = resp.text;
  } catch (const std::exception& e) {
    throw Error("probe for " + ref.id() + " / '" + label + "': " + e.what());
  }
  probe.answer = parse_probe_answer(probe.raw);
  return probe;
}

Json ClassifyResult::summary() const {
  Json fails = Json::array();
  for (const auto& [id, msg] : failures) fails.push_back({{"example_id", id}, {"error", msg}});
  return {{"predictions", predictions.size()}, {"resolution_histogram", resolution_histogram}, {"failures", fails}};
}

ClassifyResult classify_split(const Corpus& corpus, const std::vector<ExampleRef>& test_refs,
                              const std::vector<ExampleRef>& train_refs, const RationaleStore& store,
                              const LabelDefinitions& defs, const ClassifyOptions& options,
                              const Gateway& gateway) {
  const auto& labels = corpus.labels().labels;
  // Shots are drawn once per label, shared by every test example.
  std::vector<std::vector<ProbeShot>> shots_by_label;
  for (const auto& label : labels) {
    auto refs = sample_probe_shots(corpus, train_refs, label, options.shots_per_side, options.seed);
    shots_by_label.push_back(build_shots(corpus, refs, label, store, options.mode, options.context_width));
  }

  std::vector<ChatRequest> requests;
  requests.reserve(test_refs.size() * labels.size());
  for (const auto& ref : test_refs) {
    for (size_t l = 0; l < labels.size(); ++l) {
      auto prompt = render_probe(corpus, ref, labels[l], shots_by_label[l], store, options.mode,
                                 options.context_width, defs);
      requests.push_back(make_probe_request(prompt, options.probe, "probe:" + ref.id() + ":" + labels[l]));
    }
  }
  const auto batch = gateway.batch_complete(requests, options.gateway_mode, options.concurrency);

  ClassifyResult result;
  for (const auto& label : {Resolution::kUniqueYes, Resolution::kTieBroken, Resolution::kDefaultMajority}) {
    result.resolution_histogram[to_string(label)] = 0;
  }
  size_t err = 0;
  for (size_t e = 0; e < test_refs.size(); ++e) {
    std::map<std::string, ProbeAnswer> answers;
    std::string failure;
    for (size_t l = 0; l < labels.size(); ++l) {
      const size_t i = e * labels.size() + l;
      while (err < batch.errors.size() && batch.errors[err].first < i) ++err;
      if (err < batch.errors.size() && batch.errors[err].first == i) {
        if (failure.empty()) failure = "'" + labels[l] + "': " + batch.errors[err].second;
        continue;
      }
      answers[labels[l]] = parse_probe_answer(batch.responses[i]->text);
    }
    if (!failure.empty()) {
      result.failures.emplace_back(test_refs[e].id(), failure);
      continue;
    }
    auto rec = aggregate_probes(test_refs[e].id(), answers, corpus.labels());
    ++result.resolution_histogram[to_string(rec.resolution)];
    result.predictions.push_back(std::move(rec));
  }
  return result;
}

void write_predictions(const std::filesystem::path& path, const PredictionsFile& file) {
  std::vector<Json> rows;
  rows.push_back({{"header", file.header}});
  for (const auto& r : file.records) rows.push_back(r.to_json());
  util::write_jsonl(path, rows);
}

PredictionsFile read_predictions(const std::filesystem::path& path) {
  PredictionsFile f;
  bool have_header = false;
  for (const auto& j : util::read_jsonl(path)) {
    if (j.contains("header")) {
      f.header = j.at("header");
      have_header = true;
      continue;
    }
    f.records.push_back(PredictionRecord::from_json(j));
  }
  if (!have_header) throw Error("predictions file " + path.string() + " has no header line");
  return f;
}

}  // namespace smrat
