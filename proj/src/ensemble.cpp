#include "scbu/ensemble.hpp"

#include <algorithm>
#include <future>
#include <optional>
#include <set>
#include <sstream>

#include "scbu/errors.hpp"

namespace scbu {

std::string VoteOutcome::tally() const {
  return std::to_string(asd_votes) + "-" + std::to_string(td_votes);
}

VoteOutcome vote(const std::vector<DetectionResult>& results, const VoteConfig& cfg) {
  VoteOutcome out;
  for (const auto& r : results) {
    switch (r.label) {
      case Label::ASD: ++out.asd_votes; break;
      case Label::TD: ++out.td_votes; break;
      case Label::Abstain: ++out.abstentions; break;
    }
  }
  if (out.asd_votes + out.td_votes == 0) {
    throw NoQuorum("all " + std::to_string(results.size()) + " results abstained");
  }
  if (out.asd_votes == out.td_votes) {
    out.tie = true;
    out.label = cfg.tie_break;
  } else {
    out.label = out.asd_votes > out.td_votes ? Label::ASD : Label::TD;
  }
  return out;
}

const char* to_string(DecidedBy d) {
  switch (d) {
    case DecidedBy::Consensus: return "consensus";
    case DecidedBy::DecisionMaker: return "decision-maker";
  }
  return "?";
}

namespace {

std::string clip_rationale(const std::string& text, int limit) {
  if (limit <= 0 || static_cast<int>(text.size()) <= limit) return text;
  return text.substr(0, static_cast<std::size_t>(limit)) + "...";
}

std::string agent_block(const std::vector<AgentMessage>& messages, int limit) {
  std::ostringstream out;
  for (const auto& m : messages) {
    out << "- " << m.backend << " judged " << to_string(m.verdict) << ". Rationale: "
        << clip_rationale(m.rationale.empty() ? "(none given)" : m.rationale, limit) << "\n";
  }
  return out.str();
}

std::string discussion_context(const DiscussionRound& previous, int limit) {
  std::ostringstream out;
  out << "Panel discussion, round " << previous.index << ":\n"
      << agent_block(previous.messages, limit)
      << "Re-read the script, weigh the other clinicians' arguments, and state your own "
         "judgment again. Argue your case when you disagree.";
  return out.str();
}

std::string decision_context(const std::vector<const DiscussionRound*>& rounds, int limit) {
  std::ostringstream out;
  out << "A panel of clinicians has been debating this case.\n";
  for (const auto* round : rounds) {
    out << "Round " << round->index << " verdicts:\n" << agent_block(round->messages, limit);
  }
  out << "Summarize the panel's findings in a few sentences and give the final judgment.";
  return out.str();
}

}  // namespace

DiscussionTranscript run_agents(const PromptBundle& bundle,
                                const std::vector<BackendSpec>& backends,
                                const AgentConfig& cfg) {
  if (backends.size() < 2) throw ConfigError("panel needs at least 2 agents");
  if (cfg.max_rounds < 1) throw ConfigError("max_rounds must be at least 1");
  std::set<std::string> names;
  for (const auto& b : backends) {
    if (!names.insert(b.name).second) {
      throw ConfigError("duplicate agent name '" + b.name + "'");
    }
  }

  DiscussionTranscript transcript;
  transcript.case_id = bundle.case_id;

  std::vector<AgentState> active;
  active.reserve(backends.size());
  std::vector<BackendSpec> specs = backends;

  for (std::size_t i = 0; i < specs.size(); ++i) {
    active.push_back({specs[i].name, Label::Abstain, "", 0});
  }

  std::optional<Label> consensus;
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    PromptBundle round_bundle = bundle;
    if (!transcript.rounds.empty()) {
      round_bundle.context_text =
          discussion_context(transcript.rounds.back(), cfg.rationale_limit_chars);
    }

    std::vector<std::future<DetectionResult>> futures;
    futures.reserve(active.size());
    for (std::size_t i = 0; i < active.size(); ++i) {
      const BackendSpec* spec = &specs[i];
      futures.push_back(std::async(std::launch::async, [&round_bundle, spec, &cfg] {
        return detect(round_bundle, *spec, cfg.gateway);
      }));
    }

    DiscussionRound record;
    record.index = round;
    std::vector<AgentState> survivors;
    std::vector<BackendSpec> survivor_specs;
    for (std::size_t i = 0; i < futures.size(); ++i) {
      try {
        DetectionResult result = futures[i].get();
        AgentState state = active[i];
        state.verdict = result.label;
        state.rationale = result.rationale.empty() ? result.raw_response : result.rationale;
        state.round = round;
        record.messages.push_back({state.backend, state.verdict, state.rationale});
        survivors.push_back(std::move(state));
        survivor_specs.push_back(specs[i]);
      } catch (const BackendError& e) {
        transcript.dropped.push_back(active[i].backend + " (round " + std::to_string(round) +
                                     "): " + e.what());
      }
    }
    active = std::move(survivors);
    specs = std::move(survivor_specs);
    if (active.empty()) {
      throw NoQuorum("every agent dropped out by round " + std::to_string(round));
    }
    transcript.rounds.push_back(std::move(record));

    bool unanimous = active.front().verdict != Label::Abstain;
    for (const auto& state : active) {
      unanimous = unanimous && state.verdict == active.front().verdict;
    }
    if (unanimous) {
      consensus = active.front().verdict;
      break;
    }
  }

  if (consensus) {
    transcript.final.label = *consensus;
    transcript.final.decided_by = DecidedBy::Consensus;
    transcript.final.summary =
        "Unanimous verdict across " + std::to_string(active.size()) + " agents.";
    return transcript;
  }

  std::vector<const DiscussionRound*> seen;
  if (cfg.decision_maker_full_history) {
    for (const auto& round : transcript.rounds) seen.push_back(&round);
  } else {
    seen.push_back(&transcript.rounds.back());
  }
  PromptBundle decision_bundle = bundle;
  decision_bundle.context_text = decision_context(seen, cfg.rationale_limit_chars);
  DetectionResult decision = detect(decision_bundle, cfg.decision_maker, cfg.gateway);

  transcript.final.decided_by = DecidedBy::DecisionMaker;
  if (decision.label != Label::Abstain) {
    transcript.final.label = decision.label;
    transcript.final.summary = decision.rationale.empty()
                                   ? "The decision maker gave no rationale."
                                   : decision.rationale;
  } else {
    std::vector<DetectionResult> last_votes;
    for (const auto& m : transcript.rounds.back().messages) {
      DetectionResult r;
      r.label = m.verdict;
      last_votes.push_back(r);
    }
    VoteOutcome fallback = vote(last_votes, cfg.fallback_vote);
    transcript.final.label = fallback.label;
    transcript.final.summary =
        "Decision maker abstained; majority of the final round applied (" + fallback.tally() +
        ").";
  }
  return transcript;
}

std::string render_transcript(const DiscussionTranscript& transcript) {
  std::ostringstream out;
  out << "Case: " << transcript.case_id << "\n";
  for (const auto& round : transcript.rounds) {
    out << "Round " << round.index << ":\n";
    for (const auto& m : round.messages) {
      out << "  [" << m.backend << "] " << to_string(m.verdict) << ": " << m.rationale << "\n";
    }
  }
  for (const auto& d : transcript.dropped) out << "Dropped: " << d << "\n";
  out << "Final: " << to_string(transcript.final.label) << " ("
      << to_string(transcript.final.decided_by) << ") " << transcript.final.summary << "\n";
  return out.str();
}

ojson transcript_to_json(const DiscussionTranscript& transcript) {
  ojson j;
  j["case_id"] = transcript.case_id;
  j["rounds"] = ojson::array();
  for (const auto& round : transcript.rounds) {
    ojson r;
    r["index"] = round.index;
    r["messages"] = ojson::array();
    for (const auto& m : round.messages) {
      r["messages"].push_back(
          {{"backend", m.backend}, {"verdict", to_string(m.verdict)}, {"rationale", m.rationale}});
    }
    j["rounds"].push_back(std::move(r));
  }
  j["dropped"] = transcript.dropped;
  j["final"] = {{"label", to_string(transcript.final.label)},
                {"decided_by", to_string(transcript.final.decided_by)},
                {"summary", transcript.final.summary}};
  return j;
}

}  // namespace scbu
