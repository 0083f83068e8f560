#ifndef SCBU_ENSEMBLE_HPP
#define SCBU_ENSEMBLE_HPP

#include <string>
#include <vector>

#include "scbu/jsonio.hpp"
#include "scbu/llm_gateway.hpp"

namespace scbu {

// ---------------------------------------------------------------------------
// Majority voting

struct VoteConfig {
  Label tie_break = Label::ASD;  // screening favors sensitivity; override if needed
};

struct VoteOutcome {
  Label label = Label::ASD;
  int asd_votes = 0;
  int td_votes = 0;
  int abstentions = 0;
  bool tie = false;  // counts were equal and tie_break decided

  std::string tally() const;  // "3-2" style, ASD count first
};

// Strict majority among non-abstaining results; order-invariant.
// Throws NoQuorum when every result abstained.
VoteOutcome vote(const std::vector<DetectionResult>& results, const VoteConfig& cfg = {});

// ---------------------------------------------------------------------------
// Multi-round panel discussion

struct AgentState {
  std::string backend;  // agent identity = backend name
  Label verdict = Label::Abstain;
  std::string rationale;
  int round = 0;  // last completed round, <= max_rounds
};

struct AgentMessage {
  std::string backend;
  Label verdict = Label::Abstain;
  std::string rationale;
};

struct DiscussionRound {
  int index = 1;  // 1-based
  std::vector<AgentMessage> messages;
};

enum class DecidedBy { Consensus, DecisionMaker };
const char* to_string(DecidedBy d);

struct FinalDecision {
  Label label = Label::ASD;  // never Abstain
  std::string summary;
  DecidedBy decided_by = DecidedBy::Consensus;
};

struct DiscussionTranscript {
  std::string case_id;
  std::vector<DiscussionRound> rounds;  // non-empty
  FinalDecision final;
  std::vector<std::string> dropped;  // "name (round r): reason"
};

struct AgentConfig {
  int max_rounds = 3;
  BackendSpec decision_maker;
  bool decision_maker_full_history = false;  // default: last round only
  int rationale_limit_chars = 600;           // per-agent cap inside discussion blocks
  VoteConfig fallback_vote;                  // applied when the decision maker abstains
  GatewayConfig gateway;
};

// Round 1 sends each agent the plain prompt. Later rounds append the previous
// round's verdicts and arguments to the script so agents re-judge with the
// panel's reasoning in view. The loop exits early on a unanimous non-abstaining
// verdict (no further agent calls); otherwise the decision maker summarizes the
// last round. Agents whose backend errors are dropped from later rounds and
// listed in the transcript; NoQuorum is thrown when nobody is left.
DiscussionTranscript run_agents(const PromptBundle& bundle,
                                const std::vector<BackendSpec>& backends,
                                const AgentConfig& cfg);

// Structured text form, one block per round. Stable across runs with
// identical answers, so fixture replays can be compared byte for byte.
std::string render_transcript(const DiscussionTranscript& transcript);

ojson transcript_to_json(const DiscussionTranscript& transcript);

}  // namespace scbu

#endif
