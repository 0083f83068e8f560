#include "scbu/ensemble.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "scbu/errors.hpp"
#include "scbu/util.hpp"

using namespace scbu;
namespace fs = std::filesystem;

namespace {

DetectionResult with_label(Label label) {
  DetectionResult r;
  r.label = label;
  return r;
}

std::vector<DetectionResult> results_of(std::initializer_list<Label> labels) {
  std::vector<DetectionResult> out;
  for (Label l : labels) out.push_back(with_label(l));
  return out;
}

ScriptDocument tiny_script(const std::string& case_id) {
  ScriptDocument doc;
  doc.case_id = case_id;
  doc.preamble =
      "The child is a 30-month-old boy. The following is a time-ordered record of a "
      "clinical observation session.";
  ScriptLine ins;
  ins.timestamp_s = 3.0;
  ins.text = "The doctor calls the child's name.";
  ins.origin = LineOrigin::Instruction;
  ins.session_code = "P1";
  doc.lines.push_back(ins);
  return doc;
}

PromptBundle tiny_bundle(const std::string& case_id) {
  return build_prompt(tiny_script(case_id), PromptProfile{});
}

struct ScriptedReply {
  int status = 200;
  std::string content;
};

ScriptedReply says(const std::string& content) { return {200, content}; }
ScriptedReply fails(int status) { return {status, ""}; }

// Chat endpoint per path, each consuming a fixed list of replies in order.
// Exhausted paths reply 500, which a zero-retry gateway turns into a drop.
class ScriptedServer {
 public:
  explicit ScriptedServer(std::map<std::string, std::vector<ScriptedReply>> scripts)
      : scripts_(std::move(scripts)) {
    for (const auto& [path, replies] : scripts_) {
      (void)replies;
      server_.Post(path, [this, path = path](const httplib::Request& req,
                                             httplib::Response& res) {
        std::lock_guard lock(mutex_);
        bodies_[path].push_back(req.body);
        const auto& queue = scripts_[path];
        std::size_t n = counts_[path]++;
        if (n >= queue.size() || queue[n].status != 200) {
          res.status = n >= queue.size() ? 500 : queue[n].status;
          return;
        }
        ojson body;
        body["choices"] = ojson::array();
        body["choices"].push_back(
            {{"message", {{"role", "assistant"}, {"content", queue[n].content}}}});
        res.set_content(body.dump(), "application/json");
      });
    }
    port_ = server_.bind_to_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint(const std::string& path) {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

  int calls(const std::string& path) {
    std::lock_guard lock(mutex_);
    return static_cast<int>(counts_[path]);
  }

  std::string user_text(const std::string& path, int i) {
    std::lock_guard lock(mutex_);
    ojson body = ojson::parse(bodies_.at(path).at(i));
    return body["messages"][1]["content"].get<std::string>();
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  std::map<std::string, std::vector<ScriptedReply>> scripts_;
  std::map<std::string, std::size_t> counts_;
  std::map<std::string, std::vector<std::string>> bodies_;
};

BackendSpec http_agent(const std::string& name, ScriptedServer& server,
                       const std::string& path) {
  BackendSpec b;
  b.name = name;
  b.kind = BackendKind::Http;
  b.endpoint = server.endpoint(path);
  b.api_key_env = "";
  return b;
}

AgentConfig fast_config(const BackendSpec& decision_maker, int max_rounds = 3) {
  AgentConfig cfg;
  cfg.max_rounds = max_rounds;
  cfg.decision_maker = decision_maker;
  cfg.gateway.retries = 0;
  cfg.gateway.backoff_initial_ms = 1;
  cfg.gateway.timeout_s = 5;
  return cfg;
}

}  // namespace

TEST_CASE("vote picks the strict majority and reports the tally") {
  VoteOutcome r = vote(results_of({Label::ASD, Label::ASD, Label::TD, Label::ASD, Label::TD}));
  CHECK(r.label == Label::ASD);
  CHECK(r.tally() == "3-2");
  CHECK(!r.tie);

  VoteOutcome all_td =
      vote(results_of({Label::TD, Label::TD, Label::TD, Label::TD, Label::TD}));
  CHECK(all_td.label == Label::TD);
  CHECK(all_td.asd_votes == 0);
  CHECK(all_td.td_votes == 5);
  CHECK(all_td.tally() == "0-5");
}

TEST_CASE("vote ignores abstentions but counts them") {
  VoteOutcome r = vote(results_of({Label::Abstain, Label::TD, Label::Abstain}));
  CHECK(r.label == Label::TD);
  CHECK(r.abstentions == 2);
  CHECK(r.td_votes == 1);
}

TEST_CASE("vote without any opinion has no quorum") {
  CHECK_THROWS_AS(vote({}), NoQuorum);
  CHECK_THROWS_AS(vote(results_of({Label::Abstain, Label::Abstain})), NoQuorum);
}

TEST_CASE("vote ties go to the configured side") {
  VoteOutcome r = vote(results_of({Label::ASD, Label::TD}));
  CHECK(r.label == Label::ASD);
  CHECK(r.tie);

  VoteConfig towards_td;
  towards_td.tie_break = Label::TD;
  VoteOutcome r2 = vote(results_of({Label::ASD, Label::TD}), towards_td);
  CHECK(r2.label == Label::TD);
  CHECK(r2.tie);
}

TEST_CASE("vote is order-invariant and matches a mode computation") {
  Rng rng(20260816);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<DetectionResult> results;
    int n = 1 + static_cast<int>(rng.uniform_index(9));
    int asd = 0, td = 0;
    for (int i = 0; i < n; ++i) {
      double u = rng.uniform01();
      Label l = u < 0.4 ? Label::ASD : (u < 0.8 ? Label::TD : Label::Abstain);
      asd += l == Label::ASD;
      td += l == Label::TD;
      results.push_back(with_label(l));
    }
    if (asd + td == 0) {
      CHECK_THROWS_AS(vote(results), NoQuorum);
      continue;
    }
    Label expected = asd > td ? Label::ASD : (td > asd ? Label::TD : Label::ASD);
    VoteOutcome base = vote(results);
    CHECK(base.label == expected);
    CHECK(base.asd_votes == asd);
    CHECK(base.td_votes == td);
    for (int p = 0; p < 5; ++p) {
      rng.shuffle(results);
      VoteOutcome shuffled = vote(results);
      CHECK(shuffled.label == base.label);
      CHECK(shuffled.tally() == base.tally());
      CHECK(shuffled.abstentions == base.abstentions);
    }
  }
}

TEST_CASE("panel that agrees in round 1 ends by consensus") {
  ScriptedServer server({
      {"/a", {says("Plays alone throughout.\nJudgment: ASD")}},
      {"/b", {says("No reaction to either call.\nJudgment: ASD")}},
      {"/dm", {says("Judgment: TD")}},
  });
  std::vector<BackendSpec> agents{http_agent("agent-a", server, "/a"),
                                  http_agent("agent-b", server, "/b")};
  AgentConfig cfg = fast_config(http_agent("decider", server, "/dm"));

  DiscussionTranscript t = run_agents(tiny_bundle("case-200"), agents, cfg);
  CHECK(t.case_id == "case-200");
  REQUIRE(t.rounds.size() == 1);
  REQUIRE(t.rounds[0].messages.size() == 2);
  CHECK(t.rounds[0].messages[0].backend == "agent-a");
  CHECK(t.rounds[0].messages[0].verdict == Label::ASD);
  CHECK(t.rounds[0].messages[1].backend == "agent-b");
  CHECK(t.final.label == Label::ASD);
  CHECK(t.final.decided_by == DecidedBy::Consensus);
  CHECK(t.final.summary == "Unanimous verdict across 2 agents.");
  CHECK(t.dropped.empty());
  CHECK(server.calls("/a") == 1);
  CHECK(server.calls("/b") == 1);
  CHECK(server.calls("/dm") == 0);
}

TEST_CASE("deadlocked panel goes to the decision maker after max rounds") {
  ScriptedServer server({
      {"/a",
       {says("Stays with the toy.\nJudgment: ASD"), says("Still sure.\nJudgment: ASD"),
        says("Unmoved.\nJudgment: ASD")}},
      {"/b",
       {says("Answers the second call.\nJudgment: TD"), says("Still TD.\nJudgment: TD"),
        says("Holding my view.\nJudgment: TD")}},
      {"/dm", {says("The response to the second call outweighs the rest.\nJudgment: TD")}},
  });
  std::vector<BackendSpec> agents{http_agent("agent-a", server, "/a"),
                                  http_agent("agent-b", server, "/b")};
  AgentConfig cfg = fast_config(http_agent("decider", server, "/dm"), 3);

  DiscussionTranscript t = run_agents(tiny_bundle("case-210"), agents, cfg);
  REQUIRE(t.rounds.size() == 3);
  CHECK(server.calls("/a") == 3);
  CHECK(server.calls("/b") == 3);
  CHECK(server.calls("/dm") == 1);
  CHECK(t.final.decided_by == DecidedBy::DecisionMaker);
  CHECK(t.final.label == Label::TD);
  CHECK(t.final.summary == "The response to the second call outweighs the rest.");

  SUBCASE("later rounds carry the previous discussion") {
    std::string round2 = server.user_text("/a", 1);
    CHECK(round2.find("Script:") != std::string::npos);
    CHECK(round2.find("Panel discussion, round 1:") != std::string::npos);
    CHECK(round2.find("- agent-a judged ASD. Rationale: Stays with the toy.") !=
          std::string::npos);
    CHECK(round2.find("- agent-b judged TD. Rationale: Answers the second call.") !=
          std::string::npos);
    CHECK(round2.find("state your own judgment again") != std::string::npos);

    std::string round3 = server.user_text("/b", 2);
    CHECK(round3.find("Panel discussion, round 2:") != std::string::npos);
    CHECK(round3.find("Still sure.") != std::string::npos);

    std::string round1 = server.user_text("/a", 0);
    CHECK(round1.find("Panel discussion") == std::string::npos);
  }

  SUBCASE("decision maker sees only the last round by default") {
    std::string dm = server.user_text("/dm", 0);
    CHECK(dm.find("Round 3 verdicts:") != std::string::npos);
    CHECK(dm.find("Round 1 verdicts:") == std::string::npos);
    CHECK(dm.find("- agent-a judged ASD. Rationale: Unmoved.") != std::string::npos);
    CHECK(dm.find("Summarize the panel's findings") != std::string::npos);
  }
}

TEST_CASE("decision maker can be shown the whole discussion") {
  ScriptedServer server({
      {"/a", {says("Judgment: ASD"), says("Judgment: ASD")}},
      {"/b", {says("Judgment: TD"), says("Judgment: TD")}},
      {"/dm", {says("Weighing both rounds.\nJudgment: ASD")}},
  });
  std::vector<BackendSpec> agents{http_agent("agent-a", server, "/a"),
                                  http_agent("agent-b", server, "/b")};
  AgentConfig cfg = fast_config(http_agent("decider", server, "/dm"), 2);
  cfg.decision_maker_full_history = true;

  DiscussionTranscript t = run_agents(tiny_bundle("case-215"), agents, cfg);
  CHECK(t.final.label == Label::ASD);
  std::string dm = server.user_text("/dm", 0);
  CHECK(dm.find("Round 1 verdicts:") != std::string::npos);
  CHECK(dm.find("Round 2 verdicts:") != std::string::npos);
}

TEST_CASE("consensus in round 2 stops the discussion") {
  ScriptedServer server({
      {"/a", {says("Judgment: ASD"), says("Judgment: ASD"), says("Judgment: ASD")}},
      {"/b", {says("Judgment: TD"), says("You have a point.\nJudgment: ASD"),
              says("Judgment: TD")}},
      {"/dm", {says("Judgment: TD")}},
  });
  std::vector<BackendSpec> agents{http_agent("agent-a", server, "/a"),
                                  http_agent("agent-b", server, "/b")};
  AgentConfig cfg = fast_config(http_agent("decider", server, "/dm"), 3);

  DiscussionTranscript t = run_agents(tiny_bundle("case-220"), agents, cfg);
  REQUIRE(t.rounds.size() == 2);
  CHECK(t.final.decided_by == DecidedBy::Consensus);
  CHECK(t.final.label == Label::ASD);
  CHECK(server.calls("/a") == 2);
  CHECK(server.calls("/b") == 2);
  CHECK(server.calls("/dm") == 0);
}

TEST_CASE("abstaining answers block consensus until they resolve") {
  ScriptedServer server({
      {"/a", {says("Hard to say."), says("Judgment: TD")}},
      {"/b", {says("Unclear case."), says("Judgment: TD")}},
      {"/dm", {says("Judgment: ASD")}},
  });
  std::vector<BackendSpec> agents{http_agent("agent-a", server, "/a"),
                                  http_agent("agent-b", server, "/b")};
  AgentConfig cfg = fast_config(http_agent("decider", server, "/dm"), 3);

  DiscussionTranscript t = run_agents(tiny_bundle("case-230"), agents, cfg);
  REQUIRE(t.rounds.size() == 2);
  CHECK(t.rounds[0].messages[0].verdict == Label::Abstain);
  CHECK(t.final.decided_by == DecidedBy::Consensus);
  CHECK(t.final.label == Label::TD);
  CHECK(server.calls("/dm") == 0);
}

TEST_CASE("an erroring agent is dropped and logged") {
  ScriptedServer server({
      {"/a", {says("Judgment: ASD"), says("Judgment: ASD")}},
      {"/b", {fails(500)}},
      {"/dm", {says("Judgment: TD")}},
  });
  std::vector<BackendSpec> agents{http_agent("agent-a", server, "/a"),
                                  http_agent("agent-b", server, "/b")};
  AgentConfig cfg = fast_config(http_agent("decider", server, "/dm"), 3);

  DiscussionTranscript t = run_agents(tiny_bundle("case-240"), agents, cfg);
  REQUIRE(t.rounds.size() == 1);
  REQUIRE(t.rounds[0].messages.size() == 1);
  CHECK(t.rounds[0].messages[0].backend == "agent-a");
  CHECK(t.final.label == Label::ASD);
  CHECK(t.final.decided_by == DecidedBy::Consensus);
  REQUIRE(t.dropped.size() == 1);
  CHECK(t.dropped[0].find("agent-b (round 1)") == 0);
  CHECK(server.calls("/b") == 1);
}

TEST_CASE("all agents dropping out leaves no quorum") {
  ScriptedServer server({
      {"/a", {fails(500)}},
      {"/b", {fails(503)}},
      {"/dm", {says("Judgment: TD")}},
  });
  std::vector<BackendSpec> agents{http_agent("agent-a", server, "/a"),
                                  http_agent("agent-b", server, "/b")};
  AgentConfig cfg = fast_config(http_agent("decider", server, "/dm"), 3);
  CHECK_THROWS_AS(run_agents(tiny_bundle("case-250"), agents, cfg), NoQuorum);
}

TEST_CASE("abstaining decision maker falls back to a majority of the last round") {
  ScriptedServer server({
      {"/a", {says("Judgment: ASD")}},
      {"/b", {says("Judgment: TD")}},
      {"/dm", {says("Both readings are defensible.")}},
  });
  std::vector<BackendSpec> agents{http_agent("agent-a", server, "/a"),
                                  http_agent("agent-b", server, "/b")};
  AgentConfig cfg = fast_config(http_agent("decider", server, "/dm"), 1);

  DiscussionTranscript t = run_agents(tiny_bundle("case-260"), agents, cfg);
  CHECK(t.final.decided_by == DecidedBy::DecisionMaker);
  CHECK(t.final.label == Label::ASD);
  CHECK(t.final.summary ==
        "Decision maker abstained; majority of the final round applied (1-1).");
}

TEST_CASE("panel preconditions are validated") {
  BackendSpec mock;
  AgentConfig cfg = fast_config(mock);
  PromptBundle bundle = tiny_bundle("case-270");

  CHECK_THROWS_AS(run_agents(bundle, {mock}, cfg), ConfigError);

  BackendSpec twin_a = mock, twin_b = mock;
  twin_a.name = twin_b.name = "same";
  CHECK_THROWS_AS(run_agents(bundle, {twin_a, twin_b}, cfg), ConfigError);

  BackendSpec a = mock, b = mock;
  a.name = "a";
  b.name = "b";
  AgentConfig zero = cfg;
  zero.max_rounds = 0;
  CHECK_THROWS_AS(run_agents(bundle, {a, b}, zero), ConfigError);
}

TEST_CASE("long rationales are clipped inside discussion blocks") {
  std::string essay(700, 'x');
  ScriptedServer server({
      {"/a", {says(essay + "\nJudgment: ASD"), says("Judgment: ASD")}},
      {"/b", {says("Short.\nJudgment: TD"), says("Judgment: ASD")}},
      {"/dm", {says("Judgment: TD")}},
  });
  std::vector<BackendSpec> agents{http_agent("agent-a", server, "/a"),
                                  http_agent("agent-b", server, "/b")};
  AgentConfig cfg = fast_config(http_agent("decider", server, "/dm"), 3);
  cfg.rationale_limit_chars = 100;

  DiscussionTranscript t = run_agents(tiny_bundle("case-280"), agents, cfg);
  CHECK(t.rounds[0].messages[0].rationale == essay);  // transcript keeps the full text
  std::string round2 = server.user_text("/a", 1);
  CHECK(round2.find(std::string(100, 'x') + "...") != std::string::npos);
  CHECK(round2.find(std::string(101, 'x')) == std::string::npos);
}

TEST_CASE("transcript replays byte-identically from recorded fixtures") {
  fs::path store = fs::temp_directory_path() / "scbu_ensemble_replay";
  fs::remove_all(store);
  fs::create_directories(store);

  std::string rendered_live;
  {
    ScriptedServer server({
        {"/a", {says("Keeps playing.\nJudgment: ASD"), says("No change.\nJudgment: ASD")}},
        {"/b", {says("Waves back.\nJudgment: TD"), says("Still TD.\nJudgment: TD")}},
        {"/dm", {says("Two split rounds; the toy fixation dominates.\nJudgment: ASD")}},
    });
    std::vector<BackendSpec> agents{http_agent("agent-a", server, "/a"),
                                    http_agent("agent-b", server, "/b")};
    AgentConfig cfg = fast_config(http_agent("decider", server, "/dm"), 2);
    cfg.gateway.audit_dir = store;
    DiscussionTranscript live = run_agents(tiny_bundle("case-290"), agents, cfg);
    CHECK(live.final.label == Label::ASD);
    rendered_live = render_transcript(live);
  }

  for (const auto& entry : fs::directory_iterator(store)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    ojson j;
    j["raw_response"] = ss.str();
    fs::path out_path = entry.path();
    out_path.replace_extension(".json");
    std::ofstream out(out_path, std::ios::binary);
    out << j.dump(2) << "\n";
  }

  auto fixture_agent = [&](const std::string& name) {
    BackendSpec b;
    b.name = name;
    b.kind = BackendKind::Fixture;
    b.fixture_dir = store;
    return b;
  };
  std::vector<BackendSpec> agents{fixture_agent("agent-a"), fixture_agent("agent-b")};
  AgentConfig cfg;
  cfg.max_rounds = 2;
  cfg.decision_maker = fixture_agent("decider");

  DiscussionTranscript replayed = run_agents(tiny_bundle("case-290"), agents, cfg);
  CHECK(render_transcript(replayed) == rendered_live);
  DiscussionTranscript replayed_again = run_agents(tiny_bundle("case-290"), agents, cfg);
  CHECK(transcript_to_json(replayed_again).dump(2) == transcript_to_json(replayed).dump(2));
}

TEST_CASE("transcripts render one block per round") {
  DiscussionTranscript t;
  t.case_id = "case-300";
  t.rounds.push_back({1,
                      {{"agent-a", Label::ASD, "Keeps playing."},
                       {"agent-b", Label::Abstain, "No verdict."}}});
  t.rounds.push_back({2, {{"agent-a", Label::ASD, "Same."}, {"agent-b", Label::ASD, "Agreed."}}});
  t.dropped.push_back("agent-c (round 1): backend 'agent-c': retries exhausted");
  t.final = {Label::ASD, "Unanimous verdict across 2 agents.", DecidedBy::Consensus};

  std::string text = render_transcript(t);
  CHECK(text ==
        "Case: case-300\n"
        "Round 1:\n"
        "  [agent-a] ASD: Keeps playing.\n"
        "  [agent-b] Abstain: No verdict.\n"
        "Round 2:\n"
        "  [agent-a] ASD: Same.\n"
        "  [agent-b] ASD: Agreed.\n"
        "Dropped: agent-c (round 1): backend 'agent-c': retries exhausted\n"
        "Final: ASD (consensus) Unanimous verdict across 2 agents.\n");

  ojson j = transcript_to_json(t);
  CHECK(j["final"]["label"] == "ASD");
  CHECK(j["final"]["decided_by"] == "consensus");
  CHECK(j["rounds"].size() == 2);
  CHECK(j["rounds"][1]["messages"][1]["verdict"] == "ASD");
  CHECK(j["dropped"].size() == 1);
}
