#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "smrat/corpus.hpp"
#include "smrat/gateway.hpp"

namespace smrat::synth {

// Offline stand-in for a chat model, used to record the fixture cache and in
// tests. Replies are a pure function of the prompt text.
//
// Each label has a cue word. Utterances in the synthetic corpora carry their
// label's cue only some of the time, while generated rationales mention it
// more often, so rationale-augmented probes do measurably better than bare
// ones. A small share of rationale replies are deliberately malformed.
struct SyntheticOptions {
  double malformed_rate = 0.05;
  double intention_hint = 0.85;
  double assumption_hint = 0.55;
  double implicit_hint = 0.65;
  double wrong_hint = 0.08;
  double probe_flip = 0.03;
  double probe_garbled = 0.01;
};

class SyntheticTransport : public Transport {
 public:
  // `gold` maps "speaker\ttext" to the turn's label; `cues` maps label to cue word.
  SyntheticTransport(std::map<std::string, std::string> gold, std::map<std::string, std::string> cues,
                     SyntheticOptions options = {});

  // Builds the gold table from corpora and reads cues for `task` from a cue file.
  static std::shared_ptr<SyntheticTransport> for_corpora(const std::vector<Corpus>& corpora, Task task,
                                        const std::filesystem::path& cue_file, SyntheticOptions options = {});

  ChatResponse send(const ChatRequest& req) override;
  size_t calls() const { return calls_.load(); }

 private:
  std::string rationale_reply(const std::string& prompt) const;
  std::string probe_reply(const std::string& prompt) const;

  std::map<std::string, std::string> gold_;
  std::map<std::string, std::string> cues_;
  SyntheticOptions options_;
  std::atomic<size_t> calls_{0};
};

}  // namespace smrat::synth
