#include "smrat/augment.hpp"

#include "smrat/prompt.hpp"

namespace smrat {

Json AugmentedExample::to_json() const {
  return {{"example_id", example_id},
          {"input_text", input_text},
          {"label", label},
          {"mode", to_string(mode)},
          {"fallback_applied", fallback_applied},
          {"split_tags", split_tags}};
}

AugmentedExample AugmentedExample::from_json(const Json& j) {
  AugmentedExample e;
  e.example_id = j.at("example_id").get<std::string>();
  e.input_text = j.at("input_text").get<std::string>();
  e.label = j.at("label").get<std::string>();
  e.mode = mode_from_string(j.at("mode").get<std::string>());
  e.fallback_applied = j.at("fallback_applied").get<bool>();
  if (j.contains("split_tags")) e.split_tags = j.at("split_tags").get<std::set<std::string>>();
  return e;
}

namespace {

std::string neutralize(std::string s) {
  size_t pos = 0;
  while ((pos = s.find(kSepToken, pos)) != std::string::npos) {
    s.replace(pos, kSepToken.size(), "[ SEP ]");
    pos += 7;
  }
  return s;
}

}  // namespace

size_t count_separators(std::string_view text) {
  size_t n = 0;
  for (size_t pos = text.find(kSeparator); pos != std::string_view::npos;
       pos = text.find(kSeparator, pos + kSeparator.size())) {
    ++n;
  }
  return n;
}

RenderedInput render_input(std::span<const Turn> window, const Turn& target,
                           const StoredRationale* rationale, RationaleMode mode) {
  if (mode != RationaleMode::kNone && rationale == nullptr) {
    throw Error("render_input: mode " + to_string(mode) + " needs a rationale set");
  }
  std::vector<std::string> segments;
  if (!window.empty()) segments.push_back(neutralize(render_turns(window)));
  segments.push_back(neutralize(util::normalize_newlines(target.text)));

  RenderedInput out;
  if (mode != RationaleMode::kNone) {
    if (!rationale->valid) {
      out.fallback = true;
    } else {
      const auto& rs = rationale->rationales;
      if (mode == RationaleMode::kIntention || mode == RationaleMode::kAll) segments.push_back(neutralize(rs.intention));
      if (mode == RationaleMode::kAssumption || mode == RationaleMode::kAll) segments.push_back(neutralize(rs.assumption));
      if (mode == RationaleMode::kImplicit || mode == RationaleMode::kAll) segments.push_back(neutralize(rs.implicit));
    }
  }
  out.text = util::join(segments, kSeparator);
  return out;
}

RationaleStore::RationaleStore(std::vector<StoredRationale> records) {
  for (auto& r : records) {
    ExampleRef ref{r.dialogue_id, r.turn_index};
    by_ref_.insert_or_assign(std::move(ref), std::move(r));
  }
}

RationaleStore RationaleStore::load(const std::filesystem::path& jsonl) {
  std::vector<StoredRationale> records;
  for (const auto& j : util::read_jsonl(jsonl)) {
    if (j.contains("header")) continue;
    records.push_back(StoredRationale::from_json(j));
  }
  return RationaleStore(std::move(records));
}

const StoredRationale* RationaleStore::find(const ExampleRef& ref) const {
  auto it = by_ref_.find(ref);
  return it == by_ref_.end() ? nullptr : &it->second;
}

std::vector<StoredRationale> RationaleStore::records() const {
  std::vector<StoredRationale> out;
  for (const auto& [ref, r] : by_ref_) out.push_back(r);
  return out;
}

Json AugmentSummary::to_json() const {
  return {{"total", total}, {"fallbacks", fallbacks}, {"missing_rationales", missing}};
}

ExampleStream augment_refs(const Corpus& corpus, const RationaleStore& store, RationaleMode mode,
                           const std::vector<ExampleRef>& refs, size_t context_width,
                           const std::set<std::string>& tags) {
  ExampleStream stream;
  stream.labels = corpus.labels();
  stream.mode = mode;
  for (const auto& ref : refs) {
    const Dialogue& d = corpus.at(ref.dialogue_id);
    const Turn& target = corpus.resolve(ref);
    if (!target.label) throw Error("example " + ref.id() + " has no label");
    const StoredRationale* rs = store.find(ref);
    StoredRationale missing;
    if (mode != RationaleMode::kNone && rs == nullptr) {
      ++stream.summary.missing;
      missing.dialogue_id = ref.dialogue_id;
      missing.turn_index = ref.turn_index;
      rs = &missing;
    }
    auto rendered = render_input(context_window(d, ref.turn_index, context_width), target, rs, mode);
    AugmentedExample ex;
    ex.example_id = ref.id();
    ex.input_text = std::move(rendered.text);
    ex.label = *target.label;
    ex.mode = mode;
    ex.fallback_applied = rendered.fallback;
    ex.split_tags = tags;
    ++stream.summary.total;
    if (ex.fallback_applied) ++stream.summary.fallbacks;
    stream.examples.push_back(std::move(ex));
  }
  return stream;
}

ExampleStream augment_corpus(const Corpus& corpus, const RationaleStore& store, RationaleMode mode,
                             const KShotSplit* split, size_t context_width) {
  if (split == nullptr) {
    return augment_refs(corpus, store, mode, corpus.labeled_refs(), context_width, {"full"});
  }
  return augment_refs(corpus, store, mode, split->all_refs(), context_width,
                      {"k=" + split->k.to_string(), "seed=" + std::to_string(split->seed)});
}

Json FinetuneHyperparams::to_json() const {
  return {{"max_seq_len", max_seq_len}, {"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"epochs", epochs},           {"optimizer", optimizer},         {"patience", patience}};
}

FinetuneHyperparams FinetuneHyperparams::from_json(const Json& j) {
  FinetuneHyperparams h;
  h.max_seq_len = j.value("max_seq_len", h.max_seq_len);
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.epochs = j.value("epochs", h.epochs);
  h.optimizer = j.value("optimizer", h.optimizer);
  h.patience = j.value("patience", h.patience);
  return h;
}

BundleInfo export_finetune_bundle(const std::filesystem::path& dir, const ExampleStream& train,
                                  const ExampleStream& dev, const ExampleStream& test,
                                  const FinetuneHyperparams& hyper, const Json& provenance) {
  const std::pair<const char*, const ExampleStream*> parts[] = {{"train", &train}, {"dev", &dev}, {"test", &test}};
  for (const auto& [name, s] : parts) {
    if (s->labels.labels != train.labels.labels) {
      throw Error(std::string("label set of the ") + name + " split differs from train");
    }
    if (s->mode != train.mode) throw Error(std::string("rationale mode of the ") + name + " split differs from train");
    if (s->examples.empty()) throw Error(std::string("empty split: ") + name);
  }
  Json counts = Json::object();
  for (const auto& [name, s] : parts) {
    std::vector<Json> rows;
    for (const auto& e : s->examples) rows.push_back(e.to_json());
    util::write_jsonl(dir / (std::string(name) + ".jsonl"), rows);
    counts[name] = s->examples.size();
  }
  const Json manifest = {{"format_version", kBundleFormatVersion},
                         {"task", to_string(train.labels.task)},
                         {"labels", train.labels.labels},
                         {"majority_label", train.labels.majority_label},
                         {"mode", to_string(train.mode)},
                         {"separator", std::string(kSeparator)},
                         {"hyperparameters", hyper.to_json()},
                         {"truncation", "trainer policy; inputs are not truncated at export"},
                         {"counts", counts},
                         {"provenance", provenance}};
  const std::string text = manifest.dump(2) + "\n";
  util::write_file_atomic(dir / "manifest.json", text);
  return {dir, util::sha256_hex(text)};
}

}  // namespace smrat
