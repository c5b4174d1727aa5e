// Regenerates the shipped response cache by running the pipeline in record
// mode against the synthetic model.
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smrat/config.hpp"
#include "smrat/pipeline.hpp"
#include "synthetic_transport.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Record fixture responses from the synthetic model"};
  std::vector<std::string> configs;
  std::string cues, scratch = "build/record_scratch";
  app.add_option("configs", configs, "run configurations")->required()->check(CLI::ExistingFile);
  app.add_option("--cues", cues, "cue-word table")->required()->check(CLI::ExistingFile);
  app.add_option("--scratch", scratch, "directory for throwaway pipeline outputs");
  CLI11_PARSE(app, argc, argv);

  try {
    for (const auto& path : configs) {
      const auto out = std::filesystem::absolute(scratch) / std::filesystem::path(path).stem();
      smrat::Json overrides = {{"output_dir", out.string()}, {"gateway", {{"mode", "record"}}}};
      auto config = smrat::load_config(path, overrides);
      std::filesystem::create_directories(config.gateway.cache_dir);

      std::vector<smrat::Corpus> corpora;
      for (const auto& c : config.corpora) corpora.push_back(smrat::load_corpus(c.path, config.task));
      auto transport = smrat::synth::SyntheticTransport::for_corpora(corpora, config.task, cues);

      smrat::Pipeline pipeline(config, transport);
      const auto r = pipeline.run_all();
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << path << ": " << transport->calls() << " new responses, " << r.outputs.size()
                << " files, " << r.failures << " failures\n";
      if (r.failures > 0) return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
