#include "smrat/config.hpp"

#include <set>

namespace smrat {

namespace fs = std::filesystem;

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error("invalid configuration:\n  " + util::join(problems, "\n  ")), problems_(std::move(problems)) {}

const CorpusEntry& RunConfig::corpus(std::string_view name) const {
  for (const auto& c : corpora) {
    if (c.name == name) return c;
  }
  throw Error("no corpus named '" + std::string(name) + "' in the configuration");
}

std::vector<std::string> RunConfig::aliases_for(const std::string& speaker) const {
  std::vector<std::string> out;
  for (const auto& key : {std::string("*"), speaker}) {
    if (auto it = aliases.find(key); it != aliases.end()) out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

Json hashable_config(const Json& raw) {
  Json j = raw;
  j.erase("output_dir");
  if (j.contains("gateway") && j["gateway"].is_object()) {
    for (const char* k : {"mode", "cache_dir", "concurrency", "endpoint", "api_key_env", "retry"}) j["gateway"].erase(k);
  }
  return j;
}

std::string config_hash(const Json& raw) { return util::sha256_hex(util::canonical_json(hashable_config(raw))); }

namespace {

// Collects problems instead of throwing at the first one.
class Checker {
 public:
  explicit Checker(const fs::path& base) : base_(base) {}

  void fail(std::string msg) { problems_.push_back(std::move(msg)); }

  template <typename F>
  void guard(const std::string& what, F&& f) {
    try {
      f();
    } catch (const Json::exception& e) {
      fail(what + ": " + e.what());
    } catch (const std::exception& e) {
      fail(what + ": " + e.what());
    }
  }

  fs::path path(const std::string& p) const {
    fs::path q(p);
    return q.is_absolute() ? q : (base_ / q).lexically_normal();
  }

  fs::path existing(const std::string& what, const std::string& p) {
    auto q = path(p);
    if (!fs::exists(q)) fail(what + ": path does not exist: " + q.string());
    return q;
  }

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  fs::path base_;
  std::vector<std::string> problems_;
};

std::vector<RationaleMode> parse_modes(const Json& j) {
  std::vector<RationaleMode> out;
  for (const auto& m : j) out.push_back(mode_from_string(m.get<std::string>()));
  if (out.empty()) throw Error("at least one mode is required");
  return out;
}

}  // namespace

RunConfig parse_config(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError({"configuration must be a JSON object"});
  Checker ck(base_dir);
  RunConfig c;
  c.base_dir = base_dir;
  c.raw = j;
  c.modes = {kAllModes, kAllModes + 5};
  for (int k : kDefaultShotCounts) c.k.push_back(ShotCount::of(k));
  c.seeds = {0, 1, 2};

  ck.guard("task", [&] { c.task = task_from_string(j.at("task").get<std::string>()); });
  const std::string task_lc = util::to_lower(to_string(c.task));
  const std::string assets = j.value("assets_dir", "assets");

  ck.guard("template", [&] {
    std::string t = j.value("template", task_lc);
    // A bare id names a shipped template.
    if (t.find('/') == std::string::npos && t.find(".json") == std::string::npos) {
      t = assets + "/templates/" + t + ".json";
    }
    c.template_path = ck.existing("template", t);
  });
  ck.guard("label_definitions", [&] {
    c.label_definitions_path =
        ck.existing("label_definitions", j.value("label_definitions", assets + "/labels/" + task_lc + ".json"));
  });

  ck.guard("corpora", [&] {
    const auto& arr = j.at("corpora");
    if (!arr.is_array() || arr.empty()) throw Error("at least one corpus is required");
    std::set<std::string> names;
    for (const auto& e : arr) {
      CorpusEntry ce;
      ce.name = e.at("name").get<std::string>();
      if (ce.name.empty() || ce.name.find('/') != std::string::npos) {
        ck.fail("corpora: invalid corpus name '" + ce.name + "'");
      }
      if (!names.insert(ce.name).second) ck.fail("corpora: duplicate corpus name '" + ce.name + "'");
      ce.path = ck.existing("corpus '" + ce.name + "'", e.at("path").get<std::string>());
      c.corpora.push_back(std::move(ce));
    }
  });
  if (j.contains("transfer")) {
    ck.guard("transfer", [&] {
      for (const auto& t : j.at("transfer")) {
        TransferPair p{t.at("source").get<std::string>(), t.at("target").get<std::string>()};
        for (const auto* n : {&p.source, &p.target}) {
          bool known = false;
          for (const auto& ce : c.corpora) known = known || ce.name == *n;
          if (!known) ck.fail("transfer: unknown corpus '" + *n + "'");
        }
        if (p.source == p.target) ck.fail("transfer: source and target are both '" + p.source + "'");
        c.transfer.push_back(std::move(p));
      }
    });
  }

  ck.guard("context_width", [&] {
    const int w = j.value("context_width", static_cast<int>(kDefaultContextWidth));
    if (w < 0) throw Error("must be >= 0");
    c.context_width = static_cast<size_t>(w);
  });
  if (j.contains("modes")) ck.guard("modes", [&] { c.modes = parse_modes(j.at("modes")); });
  if (j.contains("k")) {
    ck.guard("k", [&] {
      c.k.clear();
      for (const auto& k : j.at("k")) c.k.push_back(ShotCount::from_json(k));
      if (c.k.empty()) throw Error("at least one k is required");
    });
  }
  if (j.contains("seeds")) {
    ck.guard("seeds", [&] {
      c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      if (c.seeds.empty()) throw Error("at least one seed is required");
      if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
        throw Error("seeds must be distinct");
      }
    });
  }
  if (j.contains("split")) {
    ck.guard("split", [&] {
      const auto& s = j.at("split");
      if (s.contains("ratios")) {
        const auto r = s.at("ratios").get<std::vector<double>>();
        if (r.size() != 3) throw Error("ratios must list train, dev and test");
        c.split_ratios = {r[0], r[1], r[2]};
      }
      c.split_seed = s.value("seed", c.split_seed);
      const double sum = c.split_ratios.train + c.split_ratios.dev + c.split_ratios.test;
      if (c.split_ratios.train <= 0 || c.split_ratios.dev <= 0 || c.split_ratios.test <= 0 ||
          std::abs(sum - 1.0) > 1e-9) {
        throw Error("ratios must be positive and sum to 1");
      }
    });
  }
  if (j.contains("validity")) {
    ck.guard("validity", [&] {
      const auto& v = j.at("validity");
      const std::string scope = v.value("scope", "intention");
      if (scope == "intention") {
        c.validity.scope = SubjectScope::kIntention;
      } else if (scope == "any") {
        c.validity.scope = SubjectScope::kAnyField;
      } else {
        throw Error("scope must be \"intention\" or \"any\"");
      }
      if (v.contains("aliases")) c.aliases = v.at("aliases").get<std::map<std::string, std::vector<std::string>>>();
    });
  }

  ck.guard("gateway", [&] {
    const Json g = j.value("gateway", Json::object());
    auto& gs = c.gateway;
    gs.mode = gateway_mode_from_string(g.value("mode", "replay"));
    gs.cache_dir = ck.path(g.value("cache_dir", "cache"));
    gs.model = g.value("model", gs.model);
    gs.temperature = g.value("temperature", gs.temperature);
    gs.max_tokens = g.value("max_tokens", gs.max_tokens);
    const int conc = g.value("concurrency", static_cast<int>(gs.concurrency));
    if (conc < 1) ck.fail("gateway.concurrency must be >= 1");
    gs.concurrency = static_cast<size_t>(std::max(conc, 1));
    gs.endpoint = g.value("endpoint", gs.endpoint);
    gs.api_key_env = g.value("api_key_env", gs.api_key_env);
    if (g.contains("retry")) {
      gs.retry.max_attempts = g["retry"].value("max_attempts", gs.retry.max_attempts);
      gs.retry.base_delay = std::chrono::milliseconds(g["retry"].value("base_delay_ms", 1000));
    }
    if (gs.temperature < 0 || gs.temperature > 2) ck.fail("gateway.temperature must lie in [0, 2]");
    if (gs.max_tokens < 1 || gs.max_tokens > 32768) ck.fail("gateway.max_tokens must lie in [1, 32768]");
    if (gs.mode == GatewayMode::kReplay && !fs::exists(gs.cache_dir)) {
      ck.fail("gateway.cache_dir: replay mode needs an existing cache at " + gs.cache_dir.string());
    }
  });

  c.classify.modes = c.modes;
  if (j.contains("classify")) {
    ck.guard("classify", [&] {
      const auto& cl = j.at("classify");
      if (cl.contains("shots")) c.classify.shots = cl.at("shots").get<std::vector<size_t>>();
      for (size_t s : c.classify.shots) {
        if (s != 0 && s != 5) ck.fail("classify.shots: only 0 or 5 shots per side are supported, got " + std::to_string(s));
      }
      if (cl.contains("modes")) c.classify.modes = parse_modes(cl.at("modes"));
      c.classify.max_tokens = cl.value("max_tokens", c.classify.max_tokens);
    });
  }
  if (j.contains("evaluate")) {
    ck.guard("evaluate", [&] {
      const auto& e = j.at("evaluate");
      c.evaluate.bootstrap_samples = e.value("bootstrap_samples", c.evaluate.bootstrap_samples);
      c.evaluate.bootstrap_seed = e.value("bootstrap_seed", c.evaluate.bootstrap_seed);
      c.evaluate.alpha = e.value("alpha", c.evaluate.alpha);
      if (c.evaluate.bootstrap_samples < 1) throw Error("bootstrap_samples must be >= 1");
      if (!(c.evaluate.alpha > 0 && c.evaluate.alpha < 1)) throw Error("alpha must lie in (0, 1)");
    });
  }
  if (j.contains("finetune")) ck.guard("finetune", [&] { c.finetune = FinetuneHyperparams::from_json(j.at("finetune")); });
  ck.guard("output_dir", [&] { c.output_dir = ck.path(j.value("output_dir", "out")); });

  if (!ck.problems().empty()) throw ConfigError(ck.problems());
  c.config_hash = config_hash(j);
  return c;
}

RunConfig load_config(const fs::path& path, const Json& overrides) {
  Json j;
  try {
    j = Json::parse(util::read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError({"config " + path.string() + " is not valid JSON: " + e.what()});
  } catch (const Error& e) {
    throw ConfigError({e.what()});
  }
  if (!overrides.empty()) j.merge_patch(overrides);
  return parse_config(j, fs::absolute(path).parent_path());
}

}  // namespace smrat
