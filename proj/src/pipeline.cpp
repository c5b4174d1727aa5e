#include "smrat/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include "smrat/augment.hpp"
#include "smrat/eval.hpp"
#include "smrat/fewshot.hpp"
#include "smrat/prompt.hpp"
#include "smrat/rationale.hpp"

namespace smrat {

namespace fs = std::filesystem;

namespace {

void write_json(const fs::path& path, const Json& j) { util::write_file_atomic(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifactError(path);
  try {
    return Json::parse(util::read_file(path));
  } catch (const Json::parse_error& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

std::vector<Json> read_jsonl_required(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifactError(path);
  return util::read_jsonl(path);
}

// Header line + records.
void write_stamped_jsonl(const fs::path& path, const Json& header, const std::vector<Json>& records) {
  std::vector<Json> rows;
  rows.reserve(records.size() + 1);
  rows.push_back({{"header", header}});
  rows.insert(rows.end(), records.begin(), records.end());
  util::write_jsonl(path, rows);
}

std::vector<ExampleRef> refs_in(const Corpus& corpus, const std::vector<std::string>& dialogue_ids) {
  std::set<std::string, std::less<>> wanted(dialogue_ids.begin(), dialogue_ids.end());
  std::vector<ExampleRef> out;
  for (const auto& r : corpus.labeled_refs()) {
    if (wanted.contains(r.dialogue_id)) out.push_back(r);
  }
  return out;
}

std::string split_file_stem(const ShotCount& k, std::uint64_t seed) {
  return "k" + k.to_string() + "_s" + std::to_string(seed);
}

std::vector<AugmentedExample> read_augmented(const fs::path& path, LabelSet labels, RationaleMode mode,
                                             ExampleStream* stream) {
  stream->labels = std::move(labels);
  stream->mode = mode;
  for (const auto& j : read_jsonl_required(path)) {
    if (j.contains("header")) continue;
    stream->examples.push_back(AugmentedExample::from_json(j));
  }
  return stream->examples;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

Pipeline::Pipeline(RunConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

Json Pipeline::header(Json extra) const {
  extra["config_hash"] = config_.config_hash;
  return extra;
}

Gateway Pipeline::make_gateway() const {
  std::shared_ptr<Transport> transport = transport_;
  const auto& g = config_.gateway;
  if (!transport && g.mode != GatewayMode::kReplay) {
    HttpTransportConfig hc;
    hc.endpoint = g.endpoint;
    if (const char* key = std::getenv(g.api_key_env.c_str())) hc.api_key = key;
    if (hc.api_key.empty()) throw Error("environment variable " + g.api_key_env + " holds no API key");
    transport = std::make_shared<HttpTransport>(hc);
  }
  std::optional<ResponseCache> cache;
  if (g.mode != GatewayMode::kLive) cache.emplace(g.cache_dir);
  return Gateway(transport, cache, g.retry);
}

Pipeline::LoadedCorpus Pipeline::load_ingested(const std::string& name) const {
  const Json meta = read_json(out("corpus/" + name + ".meta.json"));
  const auto& entry = config_.corpus(name);
  const std::string text = util::read_file(entry.path);
  if (util::sha256_hex(text) != meta.at("source_sha256").get<std::string>()) {
    throw Error("corpus " + entry.path.string() + " changed since ingest; re-run ingest");
  }
  return {parse_corpus(text, config_.task, entry.path.string()), DialoguePartition::from_json(meta.at("partition"))};
}

StageResult Pipeline::ingest() {
  StageResult res;
  for (const auto& entry : config_.corpora) {
    const std::string text = util::read_file(entry.path);
    const Corpus corpus = parse_corpus(text, config_.task, entry.path.string());
    const auto partition = split_corpus(corpus, config_.split_ratios, config_.split_seed);

    Json label_counts = Json::object();
    for (const auto& l : corpus.labels().labels) label_counts[l] = 0;
    for (const auto& r : corpus.labeled_refs()) label_counts[*corpus.resolve(r).label] = label_counts[*corpus.resolve(r).label].get<int>() + 1;
    for (const auto& l : corpus.labels().labels) {
      if (label_counts[l].get<int>() == 0) res.warnings.push_back(entry.name + ": label '" + l + "' never occurs");
    }
    const Json meta = header({{"corpus", entry.name},
                              {"task", to_string(config_.task)},
                              {"source_sha256", util::sha256_hex(text)},
                              {"stats",
                               {{"dialogues", corpus.dialogues().size()},
                                {"turns", corpus.turn_count()},
                                {"labeled_turns", corpus.labeled_refs().size()},
                                {"label_counts", label_counts}}},
                              {"split_seed", config_.split_seed},
                              {"partition", partition.to_json()}});
    const auto path = out("corpus/" + entry.name + ".meta.json");
    write_json(path, meta);
    res.outputs.push_back(path);
  }
  return res;
}

StageResult Pipeline::rationalize() {
  StageResult res;
  const PromptTemplate tpl = load_template(config_.template_path);
  const Gateway gateway = make_gateway();
  for (const auto& entry : config_.corpora) {
    const auto loaded = load_ingested(entry.name);
    const Corpus& corpus = loaded.corpus;
    const auto refs = corpus.labeled_refs();

    std::vector<ChatRequest> requests;
    std::vector<RenderedPrompt> prompts;
    for (const auto& ref : refs) {
      const Dialogue& d = corpus.at(ref.dialogue_id);
      auto prompt = build_rationale_prompt(tpl, context_window(d, ref.turn_index, config_.context_width),
                                           d.turns[ref.turn_index]);
      ChatRequest req;
      req.model = config_.gateway.model;
      req.prompt = prompt.text;
      req.temperature = config_.gateway.temperature;
      req.max_tokens = config_.gateway.max_tokens;
      req.request_tag = "rationale:" + entry.name + ":" + ref.id();
      requests.push_back(std::move(req));
      prompts.push_back(std::move(prompt));
    }
    const auto batch = gateway.batch_complete(requests, config_.gateway.mode, config_.gateway.concurrency);
    std::map<size_t, std::string> errors(batch.errors.begin(), batch.errors.end());

    std::vector<Json> rows;
    std::vector<ValidityReport> reports;
    for (size_t i = 0; i < refs.size(); ++i) {
      StoredRationale stored;
      stored.dialogue_id = refs[i].dialogue_id;
      stored.turn_index = refs[i].turn_index;
      const std::string digest = CacheKey::of(requests[i]).digest;
      ValidityReport vr;
      if (auto err = errors.find(i); err != errors.end()) {
        stored.rationales.source_key = digest;
        vr.failure_notes.push_back("no response: " + err->second);
        ++res.failures;
      } else {
        const std::string& text = batch.responses[i]->text;
        RationaleSet rs = prompts[i].mode == PromptMode::kSingleUtterance
                              ? parse_single(text)
                              : parse_per_line(text, prompts[i].expected_blocks).back();
        rs.source_key = digest;
        ValidityOptions opts = config_.validity;
        opts.aliases = config_.aliases_for(prompts[i].target_speaker);
        vr = validate(rs, prompts[i].target_speaker, opts);
        stored.rationales = std::move(rs);
      }
      stored.valid = vr.valid;
      stored.failure_notes = vr.failure_notes;
      reports.push_back(vr);
      rows.push_back(stored.to_json());
    }
    const auto path = out("rationales/" + entry.name + ".jsonl");
    write_stamped_jsonl(path, header({{"corpus", entry.name},
                                      {"template", tpl.id},
                                      {"model", config_.gateway.model},
                                      {"temperature", config_.gateway.temperature},
                                      {"max_tokens", config_.gateway.max_tokens},
                                      {"context_width", config_.context_width}}),
                        rows);
    Json summary = summarize(reports).to_json();
    summary["gateway_failures"] = errors.size();
    summary["corpus"] = entry.name;
    summary["config_hash"] = config_.config_hash;
    write_json(out("rationales/" + entry.name + ".summary.json"), summary);
    res.outputs.push_back(path);
    if (!errors.empty()) {
      res.warnings.push_back(entry.name + ": " + std::to_string(errors.size()) + " rationale requests failed; first: " +
                             errors.begin()->second);
    }
  }
  return res;
}

StageResult Pipeline::split() {
  StageResult res;
  for (const auto& entry : config_.corpora) {
    const auto loaded = load_ingested(entry.name);
    for (const auto& k : config_.k) {
      for (auto seed : config_.seeds) {
        auto split = make_kshot_split(loaded.corpus, k, seed, &loaded.partition.train);
        for (const auto& w : split.warnings) res.warnings.push_back(entry.name + " k=" + k.to_string() + ": " + w);
        Json j = split.to_json();
        j["config_hash"] = config_.config_hash;
        j["pool"] = "train";
        const auto path = out("splits/" + entry.name + "/" + split_file_stem(k, seed) + ".json");
        write_json(path, j);
        res.outputs.push_back(path);
      }
    }
  }
  return res;
}

StageResult Pipeline::augment() {
  StageResult res;
  for (const auto& entry : config_.corpora) {
    const auto loaded = load_ingested(entry.name);
    const Corpus& corpus = loaded.corpus;
    const auto store_path = out("rationales/" + entry.name + ".jsonl");
    if (!fs::exists(store_path)) throw MissingArtifactError(store_path);
    const RationaleStore store = RationaleStore::load(store_path);

    std::vector<std::pair<std::string, std::pair<std::vector<ExampleRef>, std::set<std::string>>>> jobs;
    jobs.push_back({"dev", {refs_in(corpus, loaded.partition.dev), {"dev"}}});
    jobs.push_back({"test", {refs_in(corpus, loaded.partition.test), {"test"}}});
    jobs.push_back({"train_full", {refs_in(corpus, loaded.partition.train), {"train", "k=all"}}});
    for (const auto& k : config_.k) {
      for (auto seed : config_.seeds) {
        const auto split = KShotSplit::from_json(
            read_json(out("splits/" + entry.name + "/" + split_file_stem(k, seed) + ".json")));
        jobs.push_back({"train_" + split_file_stem(k, seed),
                        {split.all_refs(), {"train", "k=" + k.to_string(), "seed=" + std::to_string(seed)}}});
      }
    }

    Json summary = Json::object();
    for (auto mode : config_.modes) {
      const std::string m = to_string(mode);
      for (const auto& [name, job] : jobs) {
        auto stream = augment_refs(corpus, store, mode, job.first, config_.context_width, job.second);
        std::vector<Json> rows;
        for (const auto& e : stream.examples) rows.push_back(e.to_json());
        const auto path = out("augmented/" + entry.name + "/" + m + "/" + name + ".jsonl");
        write_stamped_jsonl(path, header({{"corpus", entry.name}, {"mode", m}, {"split", name}}), rows);
        summary[m][name] = stream.summary.to_json();
        res.outputs.push_back(path);
      }
    }
    summary["config_hash"] = config_.config_hash;
    write_json(out("augmented/" + entry.name + "/summary.json"), summary);
  }
  return res;
}

StageResult Pipeline::export_bundles() {
  StageResult res;
  const LabelSet labels = LabelSet::for_task(config_.task);
  auto load = [&](const std::string& corpus, const std::string& mode, const std::string& name) {
    ExampleStream s;
    read_augmented(out("augmented/" + corpus + "/" + mode + "/" + name + ".jsonl"), labels, mode_from_string(mode), &s);
    return s;
  };
  auto write_bundle = [&](const fs::path& rel, const ExampleStream& train, const ExampleStream& dev,
                          const ExampleStream& test, Json provenance) {
    provenance["config_hash"] = config_.config_hash;
    auto info = export_finetune_bundle(out(rel), train, dev, test, config_.finetune, provenance);
    res.outputs.push_back(info.dir / "manifest.json");
  };

  for (const auto& entry : config_.corpora) {
    for (auto mode : config_.modes) {
      const std::string m = to_string(mode);
      const auto dev = load(entry.name, m, "dev");
      const auto test = load(entry.name, m, "test");
      write_bundle("bundles/ID/" + entry.name + "/" + m + "/full", load(entry.name, m, "train_full"), dev, test,
                   {{"setting", "ID"}, {"corpus", entry.name}, {"k", "all"}, {"init", "from-pretrained"}});
      for (const auto& k : config_.k) {
        for (auto seed : config_.seeds) {
          const std::string stem = split_file_stem(k, seed);
          write_bundle("bundles/ID/" + entry.name + "/" + m + "/" + stem, load(entry.name, m, "train_" + stem), dev,
                       test,
                       {{"setting", "ID"}, {"corpus", entry.name}, {"k", k.to_json()}, {"seed", seed},
                        {"init", "from-pretrained"}});
        }
      }
    }
  }
  for (const auto& tp : config_.transfer) {
    for (auto mode : config_.modes) {
      const std::string m = to_string(mode);
      const auto dev = load(tp.target, m, "dev");
      const auto test = load(tp.target, m, "test");
      const std::string source_bundle = "bundles/ID/" + tp.source + "/" + m + "/full";
      for (const auto& k : config_.k) {
        for (auto seed : config_.seeds) {
          const std::string stem = split_file_stem(k, seed);
          write_bundle("bundles/TF/" + tp.source + "__" + tp.target + "/" + m + "/" + stem,
                       load(tp.target, m, "train_" + stem), dev, test,
                       {{"setting", "TF"}, {"corpus", tp.target}, {"source_corpus", tp.source},
                        {"k", k.to_json()}, {"seed", seed},
                        {"init", {{"from", "source-finetune"}, {"source_bundle", source_bundle}}}});
        }
      }
    }
  }
  return res;
}

StageResult Pipeline::classify() {
  StageResult res;
  const Gateway gateway = make_gateway();
  const LabelDefinitions defs = LabelDefinitions::load(config_.label_definitions_path);
  for (const auto& entry : config_.corpora) {
    const auto loaded = load_ingested(entry.name);
    const Corpus& corpus = loaded.corpus;
    const auto store_path = out("rationales/" + entry.name + ".jsonl");
    if (!fs::exists(store_path)) throw MissingArtifactError(store_path);
    const RationaleStore store = RationaleStore::load(store_path);
    const auto test_refs = refs_in(corpus, loaded.partition.test);
    const auto train_refs = refs_in(corpus, loaded.partition.train);

    Json summary = Json::object();
    for (size_t shots : config_.classify.shots) {
      for (auto mode : config_.classify.modes) {
        for (auto seed : config_.seeds) {
          ClassifyOptions opts;
          opts.mode = mode;
          opts.shots_per_side = shots;
          opts.seed = seed;
          opts.context_width = config_.context_width;
          opts.probe.model = config_.gateway.model;
          opts.probe.temperature = config_.gateway.temperature;
          opts.probe.max_tokens = config_.classify.max_tokens;
          opts.gateway_mode = config_.gateway.mode;
          opts.concurrency = config_.gateway.concurrency;
          auto result = classify_split(corpus, test_refs, train_refs, store, defs, opts, gateway);

          PredictionsFile file;
          file.header = header({{"corpus", entry.name},
                                {"task", to_string(config_.task)},
                                {"mode", to_string(mode)},
                                {"setting", "fewshot"},
                                {"k", shots},
                                {"shots", shots},
                                {"seed", seed},
                                {"source", "fewshot"},
                                {"label_order", corpus.labels().labels},
                                {"tie_break", "earliest yes in label_order; none -> majority label"},
                                {"majority_label", corpus.labels().majority_label}});
          file.records = std::move(result.predictions);
          const std::string stem = "fewshot" + std::to_string(shots) + "_s" + std::to_string(seed);
          const auto path = out("predictions/" + entry.name + "/" + to_string(mode) + "/" + stem + ".jsonl");
          write_predictions(path, file);
          res.outputs.push_back(path);
          res.failures += result.failures.size();
          for (const auto& [id, msg] : result.failures) res.warnings.push_back(entry.name + " " + id + ": " + msg);
          summary[to_string(mode)][stem] = result.summary();
        }
      }
    }
    summary["config_hash"] = config_.config_hash;
    write_json(out("predictions/" + entry.name + "/summary.json"), summary);
  }
  return res;
}

namespace {

struct RunKey {
  std::string corpus, setting, k;
  auto operator<=>(const RunKey&) const = default;
};

std::string k_string(const Json& k) { return k.is_string() ? k.get<std::string>() : k.dump(); }

}  // namespace

StageResult Pipeline::evaluate(bool force) {
  StageResult res;
  const fs::path root = out("predictions");
  if (!fs::exists(root)) throw MissingArtifactError(root);

  // run key -> mode -> seed -> file
  std::map<RunKey, std::map<std::string, std::map<std::uint64_t, PredictionsFile>>> runs;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::set<std::string> hashes;
  for (const auto& path : files) {
    auto file = read_predictions(path);
    const auto& h = file.header;
    std::string setting = h.value("setting", "ID");
    // Transfer runs into one target from different sources stay apart.
    if (h.contains("source_corpus")) setting += "_from_" + h.at("source_corpus").get<std::string>();
    RunKey key{h.at("corpus").get<std::string>(), setting, k_string(h.at("k"))};
    hashes.insert(h.value("config_hash", ""));
    const std::string mode = h.at("mode").get<std::string>();
    const auto seed = h.at("seed").get<std::uint64_t>();
    auto& slot = runs[key][mode];
    if (slot.contains(seed)) throw Error("two prediction files for the same run: " + path.string());
    slot.emplace(seed, std::move(file));
  }
  if (hashes.size() > 1 || (hashes.size() == 1 && *hashes.begin() != config_.config_hash)) {
    if (!force) {
      throw Error("prediction files come from different configurations (config hashes: " +
                  util::join({hashes.begin(), hashes.end()}, ", ") + "); pass --force to mix them");
    }
    res.warnings.push_back("mixing prediction files from different configurations");
  }

  std::map<std::string, LoadedCorpus> corpora;
  for (const auto& [key, by_mode] : runs) {
    if (!corpora.contains(key.corpus)) corpora.emplace(key.corpus, load_ingested(key.corpus));
    const Corpus& corpus = corpora.at(key.corpus).corpus;
    const auto& labels = corpus.labels().labels;
    const auto test_refs = refs_in(corpus, corpora.at(key.corpus).partition.test);
    std::vector<std::string> gold;
    for (const auto& r : test_refs) gold.push_back(*corpus.resolve(r).label);

    // Aligns a predictions file with the test set; gaps become the majority label.
    auto align = [&](const PredictionsFile& f, size_t& missing) {
      std::map<std::string, std::string> by_id;
      for (const auto& r : f.records) {
        if (!corpus.labels().contains(r.predicted)) {
          throw Error("prediction '" + r.predicted + "' for " + r.example_id + " is not a label");
        }
        by_id[r.example_id] = r.predicted;
      }
      std::vector<std::string> pred;
      for (const auto& r : test_refs) {
        auto it = by_id.find(r.id());
        if (it == by_id.end()) {
          ++missing;
          pred.push_back(corpus.labels().majority_label);
        } else {
          pred.push_back(it->second);
        }
      }
      return pred;
    };

    std::map<std::string, std::map<std::uint64_t, std::vector<std::string>>> preds;
    std::map<std::string, size_t> missing;
    for (const auto& [mode, by_seed] : by_mode) {
      for (const auto& [seed, f] : by_seed) preds[mode][seed] = align(f, missing[mode]);
    }

    for (const auto& [mode, by_seed] : preds) {
      EvalReport rep;
      rep.labels = labels;
      rep.alpha = config_.evaluate.alpha;
      rep.confusion.assign(labels.size(), std::vector<std::int64_t>(labels.size(), 0));
      std::vector<std::string> pooled_gold, pooled_pred;
      for (const auto& [seed, pred] : by_seed) {
        rep.per_seed_f1[seed] = macro_f1(gold, pred, labels);
        const auto cm = confusion_matrix(gold, pred, labels);
        for (size_t i = 0; i < labels.size(); ++i) {
          for (size_t j = 0; j < labels.size(); ++j) rep.confusion[i][j] += cm[i][j];
        }
        pooled_gold.insert(pooled_gold.end(), gold.begin(), gold.end());
        pooled_pred.insert(pooled_pred.end(), pred.begin(), pred.end());
      }
      rep.n = pooled_gold.size();
      if (rep.per_seed_f1.size() >= 2) {
        const auto agg = aggregate_seeds(rep.per_seed_f1);
        rep.mean = agg.mean;
        rep.std = agg.std;
      } else {
        rep.mean = rep.per_seed_f1.begin()->second;
        rep.std = 0.0;
      }

      const auto base = preds.find("NONE");
      if (mode != "NONE" && base != preds.end()) {
        std::vector<std::string> pooled_base;
        bool aligned = true;
        for (const auto& [seed, pred] : by_seed) {
          auto b = base->second.find(seed);
          if (b == base->second.end()) {
            aligned = false;
            break;
          }
          pooled_base.insert(pooled_base.end(), b->second.begin(), b->second.end());
          rep.per_seed_p[seed] = paired_bootstrap_macro_f1(gold, pred, b->second, labels,
                                                           config_.evaluate.bootstrap_samples,
                                                           config_.evaluate.bootstrap_seed)
                                     .p_value;
        }
        if (aligned) {
          rep.bootstrap = paired_bootstrap_macro_f1(pooled_gold, pooled_pred, pooled_base, labels,
                                                    config_.evaluate.bootstrap_samples,
                                                    config_.evaluate.bootstrap_seed);
        } else {
          rep.per_seed_p.clear();
          res.warnings.push_back(key.corpus + " " + key.setting + " k=" + key.k + " " + mode +
                                 ": baseline seeds do not match, no significance test");
        }
      }

      Json j = rep.to_json();
      j["config_hash"] = config_.config_hash;
      j["corpus"] = key.corpus;
      j["setting"] = key.setting;
      j["k"] = key.k;
      j["mode"] = mode;
      j["baseline_mode"] = "NONE";
      j["missing_predictions"] = missing[mode];
      if (rep.per_seed_f1.size() >= 2) {
        j["formatted"] = aggregate_seeds(rep.per_seed_f1).formatted();
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", rep.mean * 100.0);
        j["formatted"] = buf;
      }
      const auto path = out("reports/" + key.corpus + "/" + key.setting + "_k" + key.k + "/" + mode + ".json");
      write_json(path, j);
      res.outputs.push_back(path);
      if (missing[mode] > 0) {
        res.warnings.push_back(key.corpus + " " + key.setting + " k=" + key.k + " " + mode + ": " +
                               std::to_string(missing[mode]) + " predictions missing, scored as majority label");
      }
    }
  }
  return res;
}

StageResult Pipeline::report(bool force) {
  StageResult res;
  const fs::path root = out("reports");
  if (!fs::exists(root)) throw MissingArtifactError(root);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw MissingArtifactError(root / "<corpus>/<setting>_k<k>/<MODE>.json");

  std::vector<Json> reports;
  std::set<std::string> hashes;
  for (const auto& f : files) {
    reports.push_back(read_json(f));
    hashes.insert(reports.back().value("config_hash", ""));
  }
  if (hashes.size() > 1 && !force) {
    throw Error("report files come from different configurations (" + util::join({hashes.begin(), hashes.end()}, ", ") +
                "); pass --force to mix them");
  }

  auto mode_rank = [](const std::string& m) {
    for (size_t i = 0; i < 5; ++i) {
      if (to_string(kAllModes[i]) == m) return i;
    }
    return size_t{5};
  };
  auto k_rank = [](const std::string& k) -> std::pair<int, std::string> {
    if (k == "all") return {1 << 30, k};
    try {
      return {std::stoi(k), k};
    } catch (const std::exception&) {
      return {1 << 29, k};
    }
  };

  // corpus -> column (setting, k) -> mode -> cell
  using Column = std::tuple<std::string, std::pair<int, std::string>>;
  std::map<std::string, std::map<Column, std::map<size_t, std::string>>> grid;
  std::map<size_t, std::string> mode_names;
  std::ostringstream csv, runs;
  const std::string stamp = "# config_hash=" + util::join({hashes.begin(), hashes.end()}, ",") + "\n";
  csv << stamp << "corpus,setting,k,mode,mean,std,cell,p_value,significant\n";
  runs << stamp << "corpus,setting,k,mode,seed,macro_f1\n";

  std::sort(reports.begin(), reports.end(), [&](const Json& a, const Json& b) {
    auto key = [&](const Json& r) {
      return std::make_tuple(r.at("corpus").get<std::string>(), r.at("setting").get<std::string>(),
                             k_rank(r.at("k").get<std::string>()), mode_rank(r.at("mode").get<std::string>()));
    };
    return key(a) < key(b);
  });
  for (const auto& r : reports) {
    const std::string corpus = r.at("corpus"), setting = r.at("setting"), k = r.at("k"), mode = r.at("mode");
    std::string cell = r.at("formatted").get<std::string>();
    std::string p = "";
    bool sig = false;
    if (r.contains("bootstrap")) {
      p = fmt_double(r["bootstrap"]["p_value"].get<double>());
      sig = r["bootstrap"]["significant"].get<bool>();
      if (sig) cell += "*";
    }
    grid[corpus][Column{setting, k_rank(k)}][mode_rank(mode)] = cell;
    mode_names[mode_rank(mode)] = mode;
    csv << corpus << ',' << setting << ',' << k << ',' << mode << ',' << fmt_double(r.at("mean").get<double>()) << ','
        << (r.at("std").is_null() ? std::string() : fmt_double(r.at("std").get<double>())) << ',' << cell << ',' << p << ',' << (sig ? "true" : "false") << '\n';
    for (const auto& [seed, f1] : r.at("per_seed").items()) {
      runs << corpus << ',' << setting << ',' << k << ',' << mode << ',' << seed << ',' << fmt_double(f1.get<double>())
           << '\n';
    }
  }

  std::ostringstream txt;
  txt << stamp;
  txt << "macro-F1 (%) mean\xC2\xB1std over seeds; * = significantly better than NONE at alpha\n";
  for (const auto& [corpus, cols] : grid) {
    txt << "\n" << corpus << "\n";
    std::vector<std::string> header = {"mode"};
    for (const auto& [col, _] : cols) header.push_back(std::get<0>(col) + " k=" + std::get<1>(col).second);
    std::vector<std::vector<std::string>> rows;
    std::set<size_t> modes;
    for (const auto& [col, cells] : cols) {
      for (const auto& [m, _] : cells) modes.insert(m);
    }
    for (size_t m : modes) {
      std::vector<std::string> row = {mode_names[m]};
      for (const auto& [col, cells] : cols) {
        auto it = cells.find(m);
        row.push_back(it == cells.end() ? "-" : it->second);
      }
      rows.push_back(std::move(row));
    }
    // Column widths count code points so the ± sign does not skew alignment.
    auto width = [](const std::string& s) {
      size_t w = 0;
      for (unsigned char c : s) w += (c & 0xC0) != 0x80 ? 1 : 0;
      return w;
    };
    std::vector<size_t> widths(header.size(), 0);
    for (size_t c = 0; c < header.size(); ++c) {
      widths[c] = width(header[c]);
      for (const auto& row : rows) widths[c] = std::max(widths[c], width(row[c]));
    }
    auto emit = [&](const std::vector<std::string>& row) {
      for (size_t c = 0; c < row.size(); ++c) {
        txt << row[c];
        if (c + 1 < row.size()) txt << std::string(widths[c] - width(row[c]) + 2, ' ');
      }
      txt << '\n';
    };
    emit(header);
    for (const auto& row : rows) emit(row);
  }

  const std::pair<const char*, std::string> outputs[] = {
      {"report/table.csv", csv.str()}, {"report/table.txt", txt.str()}, {"report/runs_long.csv", runs.str()}};
  for (const auto& [rel, text] : outputs) {
    util::write_file_atomic(out(rel), text);
    res.outputs.push_back(out(rel));
  }
  return res;
}

StageResult Pipeline::run_all(bool force) {
  StageResult total;
  for (auto stage : {&Pipeline::ingest, &Pipeline::rationalize, &Pipeline::split, &Pipeline::augment,
                     &Pipeline::export_bundles, &Pipeline::classify}) {
    auto r = (this->*stage)();
    total.outputs.insert(total.outputs.end(), r.outputs.begin(), r.outputs.end());
    total.warnings.insert(total.warnings.end(), r.warnings.begin(), r.warnings.end());
    total.failures += r.failures;
  }
  for (auto stage : {&Pipeline::evaluate, &Pipeline::report}) {
    auto r = (this->*stage)(force);
    total.outputs.insert(total.outputs.end(), r.outputs.begin(), r.outputs.end());
    total.warnings.insert(total.warnings.end(), r.warnings.begin(), r.warnings.end());
    total.failures += r.failures;
  }
  return total;
}

}  // namespace smrat
