#include "synthetic_transport.hpp"

#include <cstring>
#include <sstream>
#include <vector>

#include "smrat/rationale.hpp"

namespace smrat::synth {

namespace {

// Deterministic uniform draws keyed by the prompt and a salt.
class Dice {
 public:
  explicit Dice(const std::string& prompt) : seed_(util::sha256_hex(prompt).substr(0, 16)) {}
  double operator()(std::string_view salt) const {
    const std::string h = util::sha256_hex(seed_ + std::string(salt));
    return static_cast<double>(std::stoull(h.substr(0, 13), nullptr, 16)) / static_cast<double>(1ULL << 52);
  }

 private:
  std::string seed_;
};

std::string after_last(const std::string& s, const std::string& marker) {
  const auto pos = s.rfind(marker);
  return pos == std::string::npos ? std::string() : s.substr(pos + marker.size());
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

SyntheticTransport::SyntheticTransport(std::map<std::string, std::string> gold, std::map<std::string, std::string> cues,
                                       SyntheticOptions options)
    : gold_(std::move(gold)), cues_(std::move(cues)), options_(options) {}

std::shared_ptr<SyntheticTransport> SyntheticTransport::for_corpora(const std::vector<Corpus>& corpora, Task task,
                                                   const std::filesystem::path& cue_file, SyntheticOptions options) {
  std::map<std::string, std::string> gold;
  for (const auto& c : corpora) {
    for (const auto& d : c.dialogues()) {
      for (const auto& t : d.turns) {
        if (t.label) gold[t.speaker + "\t" + t.text] = *t.label;
      }
    }
  }
  const Json j = Json::parse(util::read_file(cue_file));
  return std::make_shared<SyntheticTransport>(
      std::move(gold), j.at(to_string(task)).get<std::map<std::string, std::string>>(), options);
}

ChatResponse SyntheticTransport::send(const ChatRequest& req) {
  ++calls_;
  ChatResponse r;
  r.text = req.prompt.find("[OUTPUT]") != std::string::npos ? probe_reply(req.prompt) : rationale_reply(req.prompt);
  r.finish_reason = FinishReason::kStop;
  r.usage.prompt_tokens = static_cast<std::int64_t>(req.prompt.size() / 4);
  r.usage.completion_tokens = static_cast<std::int64_t>(r.text.size() / 4 + 1);
  r.usage.total_tokens = r.usage.prompt_tokens + r.usage.completion_tokens;
  return r;
}

std::string SyntheticTransport::rationale_reply(const std::string& prompt) const {
  const Dice dice(prompt);
  const std::string target = first_line(after_last(prompt, "\n\nFinal utterance:\n"));
  const auto colon = target.find(": ");
  if (colon == std::string::npos) return "I could not find the final utterance.";
  const std::string speaker = target.substr(0, colon);
  const std::string text = target.substr(colon + 2);
  const bool per_line = prompt.find("For each line:") != std::string::npos;

  // Cue for the gold label, or a wrong one now and then.
  std::string cue;
  if (auto g = gold_.find(speaker + "\t" + text); g != gold_.end()) cue = cues_.at(g->second);
  if (dice("wrong") < options_.wrong_hint) {
    auto it = cues_.begin();
    std::advance(it, static_cast<long>(dice("wrong-pick") * static_cast<double>(cues_.size())));
    cue = it->second;
  }
  auto hinted = [&](const char* salt, double rate) { return !cue.empty() && dice(salt) < rate; };

  const std::string subject = !per_line && dice("subject") < 0.3 ? "The speaker" : speaker;
  RationaleSet rs;
  rs.intention = hinted("int", options_.intention_hint)
                     ? subject + " means to come across as " + cue + " in this reply."
                     : subject + " wants to keep the exchange going.";
  rs.assumption = hinted("asm", options_.assumption_hint)
                      ? speaker + " assumes the listener will read the remark as " + cue + "."
                      : speaker + " assumes the listener is following along.";
  rs.implicit = hinted("imp", options_.implicit_hint)
                    ? "Underneath, the remark carries a " + cue + " undertone."
                    : "Nothing beyond the literal content is implied.";

  const double m = dice("malformed");
  const bool malformed = m < options_.malformed_rate;
  const int variant = static_cast<int>(dice("variant") * 3.0);
  if (malformed && variant == 1) rs.intention = "To respond to what was said before.";

  if (!per_line) {
    if (malformed && variant == 2) return "";
    std::string out = format_single(rs);
    if (malformed && variant == 0) out = out.substr(0, out.rfind("\nImplicit"));
    return out;
  }

  // One block per history line, then the target's.
  std::vector<std::string> blocks;
  const std::string history = after_last(prompt, "\n\nDialogue history:");
  const std::string history_body = history.substr(0, history.find("\n\nFinal utterance:"));
  std::istringstream lines(history_body);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const std::string who = line.substr(0, line.find(": "));
    RationaleSet h;
    h.intention = who + " moves the conversation along.";
    h.assumption = who + " assumes the other side is listening.";
    h.implicit = "The line sets up what follows.";
    blocks.push_back(format_block(h));
  }
  std::string last = format_block(rs);
  if (malformed && variant == 0) last = last.substr(0, last.rfind("\nImplicit"));
  if (!(malformed && variant == 2)) blocks.push_back(last);
  return util::join(blocks, "\n\n");
}

std::string SyntheticTransport::probe_reply(const std::string& prompt) const {
  const Dice dice(prompt);
  static const std::string kLead = "These examples pertains to the ";
  std::string label;
  if (prompt.rfind(kLead, 0) == 0) {
    const auto end = prompt.find(". For the dataset ");
    const std::string head = prompt.substr(kLead.size(), end - kLead.size());
    label = head.substr(0, head.rfind(' '));
  }
  const auto cue = cues_.find(label);
  if (cue == cues_.end()) return "No";

  const std::string query = after_last(prompt, "[RESPONSE]\n");
  bool yes = util::contains_word_ci(query.substr(0, query.find("[OUTPUT]")), cue->second);
  if (dice("flip") < options_.probe_flip) yes = !yes;
  if (dice("garble") < options_.probe_garbled) return "Possibly";
  return yes ? (dice("dot") < 0.2 ? "Yes." : "Yes") : "No";
}

}  // namespace smrat::synth
