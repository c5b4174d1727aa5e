// Command-line driver: one subcommand per pipeline stage, plus `run`.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "smrat/config.hpp"
#include "smrat/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kBadConfig = 2, kFailed = 3 };

void print_result(const smrat::StageResult& r, bool verbose) {
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  if (verbose) {
    for (const auto& p : r.outputs) std::cout << p.string() << '\n';
  } else {
    std::cout << r.outputs.size() << " files written\n";
  }
  if (r.failures > 0) std::cerr << r.failures << " item(s) failed\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rationale-augmented dialogue classification pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir, gateway_mode;
  bool force = false, verbose = false;
  app.add_option("-c,--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--out", out_dir, "output directory (overrides the config)");
  app.add_option("-m,--mode", gateway_mode, "gateway mode")->check(CLI::IsMember({"live", "replay", "record"}));
  app.add_flag("-f,--force", force, "allow mixing artifacts from different configurations");
  app.add_flag("-v,--verbose", verbose, "list every file written");

  const std::pair<const char*, const char*> stages[] = {
      {"ingest", "validate corpora and fix the train/dev/test partition"},
      {"rationalize", "generate and validate rationales"},
      {"split", "draw k-shot training splits"},
      {"augment", "render classifier inputs for every rationale mode"},
      {"export", "write fine-tuning bundles"},
      {"classify", "run the few-shot yes/no probe classifier"},
      {"evaluate", "score predictions and run significance tests"},
      {"report", "write the results tables"},
      {"run", "every stage in order"},
  };
  for (const auto& [name, help] : stages) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << '\n' << app.help();
    return code == 0 ? kOk : kUsage;
  }

  smrat::Json overrides = smrat::Json::object();
  if (!out_dir.empty()) overrides["output_dir"] = std::filesystem::absolute(out_dir).string();
  if (!gateway_mode.empty()) overrides["gateway"]["mode"] = gateway_mode;

  try {
    smrat::Pipeline pipeline(smrat::load_config(config_path, overrides));
    const std::string cmd = app.get_subcommands().front()->get_name();
    smrat::StageResult r;
    if (cmd == "ingest") r = pipeline.ingest();
    else if (cmd == "rationalize") r = pipeline.rationalize();
    else if (cmd == "split") r = pipeline.split();
    else if (cmd == "augment") r = pipeline.augment();
    else if (cmd == "export") r = pipeline.export_bundles();
    else if (cmd == "classify") r = pipeline.classify();
    else if (cmd == "evaluate") r = pipeline.evaluate(force);
    else if (cmd == "report") r = pipeline.report(force);
    else r = pipeline.run_all(force);
    print_result(r, verbose);
    return r.failures > 0 ? kFailed : kOk;
  } catch (const smrat::ConfigError& e) {
    std::cerr << "invalid configuration:\n";
    for (const auto& p : e.problems()) std::cerr << "  - " << p << '\n';
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
}
