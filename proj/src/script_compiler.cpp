#include "scbu/script_compiler.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "scbu/errors.hpp"
#include "scbu/jsonio.hpp"
#include "scbu/util.hpp"

namespace scbu {

namespace {

// The shipped wording. Typos and spacing oddities are intentional; the
// sentences are pinned byte-for-byte by tests and by the JSON resource.
TemplateTable build_defaults() {
  TemplateTable t;
  auto I = [&](const char* code, const char* text) { t.instructions[code] = text; };
  auto R = [&](Paradigm p, int idx, const char* text) {
    t.responses[{static_cast<int>(p), idx}] = text;
  };

  I("P1", "The parent called out the child's name.");
  I("P2", "The doctor called out the child's name.");
  R(Paradigm::RN, 1, "The child turns toward the doctor and look with saying hello.");
  R(Paradigm::RN, 2, "The child turns toward the doctor and look .");
  R(Paradigm::RN, 3, "The child continued to play with the toy.");

  I("P3", "The doctor greets the child with a passional smile and say hello.");
  I("P4", "The doctor praises the child with a warm smile.");
  I("P5",
    "The doctor plays a tickle game with smile. She slowly reaches out and gently touches the "
    "child.");
  I("P6",
    "With a warm smile, parents entertain their children in whatever way they normally do in "
    "their daily lives.");
  R(Paradigm::SS, 1, "The child made eye contact with the doctor.");
  R(Paradigm::SS, 2, "The child look at the doctor and smile .");
  R(Paradigm::SS, 3, "The child smile but did not look at the doctor.");
  R(Paradigm::SS, 4, "The child bent his head and went on playing with the toy.");
  R(Paradigm::SS, 5, "The child made eye contact with the doctor without smile.");

  I("P7", "The doctor call the child's name and say \"Look at that flower\".");
  I("P8", "The doctor call the child's name and say \"Look at that tree\".");
  I("P9", "The doctor call the child's name and say \"Look at that balloon\"");
  I("P10", "The doctor call the child's name and say \"Look at that sofa\"");
  R(Paradigm::IG, 1, "The child looked up in the direction of the picture.");
  R(Paradigm::IG, 2, "The child keeps his head down and continues to play with his toy.");
  R(Paradigm::IG, 3, "The child precisely points out the location of the picture.");
  R(Paradigm::IG, 4, "The child roughly points out the location of the picture.");
  R(Paradigm::IG, 5, "The child turns around and makes eye contact with the doctor.");
  R(Paradigm::IG, 6, "The child keeps looking at the picture.");
  R(Paradigm::IG, 7, "Then the kid continue to play with his toy.");

  I("P11",
    "The doctor raises his hand and points to the picture of a clock and says, \"Look, there "
    "is a clock. what time it is.");
  R(Paradigm::RJA, 1, "The child turns his head backand then looks to the position of the clock.");
  R(Paradigm::RJA, 2, "The child seek the clock while not finding the correct direction.");
  R(Paradigm::RJA, 3, "The child looked up at the doctor's hand .");
  R(Paradigm::RJA, 4, "The child keeps his head down and continues to play with his toy.");

  I("P12",
    "The wall to the left of the child suddenly displays a yellow bird flapping its wings "
    "while a stereo plays the sound of bird.");
  I("P13",
    "The wall to the right of the child suddenly displays a moving riding car while the "
    "stereo plays the sound of the car moving.");
  I("P14",
    "A cow wiggling its ears is suddenly displayed on the wall behind the child's right side "
    "while the sound is played.");
  R(Paradigm::IJA, 1,
    "The child is attracted to the animation playingand looks at the bird on the left wall.");
  R(Paradigm::IJA, 2,
    "The child turns around and makes eye contact with the doctor to share his findings.");
  R(Paradigm::IJA, 3,
    "The child turns around and makes eye contact with the doctor to share his findings.");
  R(Paradigm::IJA, 4, "The child keeps staring at the animation playing on the wall.");
  R(Paradigm::IJA, 5, "The child raises his hand and points to the bird on the wall.");
  R(Paradigm::IJA, 6, "The child lower his head again and continued to play with the toy.");

  I("P15",
    "The parent gets up from their seat, walks past the child, and finally leaves the room.");
  I("P16",
    "The parent call the child's name outside the door and say, “Hi, mom is leaving. You "
    "have to play alone.");
  R(Paradigm::SA, 1,
    "The child realizes that the parent has left and gets up and chases him toward the door.");
  R(Paradigm::SA, 2,
    "The child turns to the direction of the parent but remains seating at the table.");
  R(Paradigm::SA, 3, "The child keeps his head down and continues to play with his toy.");
  R(Paradigm::SA, 4, "The parents, the doctor and the child have left the room.");
  R(Paradigm::SA, 5, "The child lower his head again and continued to play with the toy.");
  return t;
}

}  // namespace

const TemplateTable& TemplateTable::defaults() {
  static const TemplateTable table = build_defaults();
  return table;
}

const std::string& TemplateTable::instruction_text(const std::string& session_code) const {
  auto it = instructions.find(session_code);
  if (it == instructions.end()) {
    throw TemplateError("no instruction template for session code " + session_code);
  }
  return it->second;
}

const std::string& TemplateTable::response_text(Paradigm paradigm, int response_index) const {
  auto it = responses.find({static_cast<int>(paradigm), response_index});
  if (it == responses.end()) {
    throw TemplateError(std::string("no response template for ") + to_string(paradigm) +
                        " response " + std::to_string(response_index));
  }
  return it->second;
}

bool TemplateTable::has_response(Paradigm paradigm, int response_index) const {
  return responses.count({static_cast<int>(paradigm), response_index}) > 0;
}

std::string TemplateTable::to_json_text() const {
  ojson j;
  j["schema_version"] = "1.0";
  ojson paradigms = ojson::object();
  for (Paradigm p : {Paradigm::RN, Paradigm::SS, Paradigm::IG, Paradigm::RJA, Paradigm::IJA,
                     Paradigm::SA}) {
    ojson pj;
    ojson instrs = ojson::object();
    for (int code = 1; code <= 16; ++code) {
      std::string key = "P" + std::to_string(code);
      auto it = instructions.find(key);
      if (it != instructions.end() && paradigm_for_session_code(key) == p) {
        instrs[key] = it->second;
      }
    }
    pj["instructions"] = std::move(instrs);
    ojson resp = ojson::object();
    for (int idx = 1; idx <= 16; ++idx) {
      auto it = responses.find({static_cast<int>(p), idx});
      if (it != responses.end()) resp[std::to_string(idx)] = it->second;
    }
    pj["responses"] = std::move(resp);
    paradigms[to_string(p)] = std::move(pj);
  }
  j["paradigms"] = std::move(paradigms);
  return j.dump(2) + "\n";
}

TemplateTable TemplateTable::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TemplateError("cannot open template table " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  ojson j;
  try {
    j = ojson::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw TemplateError("template table " + path.string() + ": invalid JSON: " + e.what());
  }
  const std::string ctx = path.filename().string();
  reject_unknown_keys<TemplateError>(j, {"schema_version", "paradigms"}, ctx);
  check_schema_version<TemplateError>(j, ctx);
  TemplateTable t;
  const ojson& paradigms = require_field<TemplateError>(j, "paradigms", ctx);
  for (auto it = paradigms.begin(); it != paradigms.end(); ++it) {
    Paradigm p = paradigm_from_string(it.key());
    const ojson& pj = it.value();
    reject_unknown_keys<TemplateError>(pj, {"instructions", "responses"}, ctx);
    const ojson& instrs = require_field<TemplateError>(pj, "instructions", ctx);
    for (auto ii = instrs.begin(); ii != instrs.end(); ++ii) {
      if (paradigm_for_session_code(ii.key()) != p) {
        throw TemplateError(ctx + ": session code " + ii.key() + " listed under " +
                            to_string(p));
      }
      t.instructions[ii.key()] = ii.value().get<std::string>();
    }
    const ojson& resp = require_field<TemplateError>(pj, "responses", ctx);
    for (auto ri = resp.begin(); ri != resp.end(); ++ri) {
      int idx = std::stoi(ri.key());
      t.responses[{static_cast<int>(p), idx}] = ri.value().get<std::string>();
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Classification

namespace {

// One positive or negative event requirement of a response rule.
enum class Req {
  LookTarget,         // look at the instruction's target ROI
  SustainedLookTarget,  // ... lasting at least keep_looking_s
  LookDoctor,
  LookDoor,
  LookWrong,          // look at a ROI that is neither target nor doctor
  PointTargetPrecise,
  PointTargetRough,
  PointTarget,
  Smile,
  SpeakChild,
  Chase,
  LeaveAll,           // child, doctor and parent all left
  NotLookDoctor,
  NotSmile,
};

struct Rule {
  int response_index;
  std::vector<Req> reqs;
};

bool single_response(Paradigm p) {
  return p == Paradigm::RN || p == Paradigm::SS || p == Paradigm::RJA;
}

int fallback_index(Paradigm p) {
  switch (p) {
    case Paradigm::RN: return 3;
    case Paradigm::SS: return 4;
    case Paradigm::IG: return 2;
    case Paradigm::RJA: return 4;
    case Paradigm::IJA: return 6;
    case Paradigm::SA: return 3;
  }
  return 0;
}

// Bound rules per paradigm. Indices missing here (IG 7, RJA 3, IJA 3, SA 5)
// have no detectable event signature and are never auto-emitted; the table
// still carries their wording for manual script editing.
const std::vector<Rule>& rules_for(Paradigm p) {
  static const std::vector<Rule> rn = {
      {1, {Req::LookDoctor, Req::SpeakChild}},
      {2, {Req::LookDoctor}},
  };
  static const std::vector<Rule> ss = {
      {1, {Req::LookDoctor}},
      {2, {Req::LookDoctor, Req::Smile}},
      {3, {Req::Smile, Req::NotLookDoctor}},
      {5, {Req::LookDoctor, Req::NotSmile}},
  };
  static const std::vector<Rule> ig = {
      {1, {Req::LookTarget}},
      {3, {Req::PointTargetPrecise}},
      {4, {Req::PointTargetRough}},
      {5, {Req::LookDoctor}},
      {6, {Req::SustainedLookTarget}},
  };
  static const std::vector<Rule> rja = {
      {1, {Req::LookTarget}},
      {2, {Req::LookWrong}},
  };
  static const std::vector<Rule> ija = {
      {1, {Req::LookTarget}},
      {2, {Req::LookDoctor}},
      {4, {Req::SustainedLookTarget}},
      {5, {Req::PointTarget}},
  };
  static const std::vector<Rule> sa = {
      {1, {Req::Chase}},
      {2, {Req::LookDoor}},
      {4, {Req::LeaveAll}},
  };
  switch (p) {
    case Paradigm::RN: return rn;
    case Paradigm::SS: return ss;
    case Paradigm::IG: return ig;
    case Paradigm::RJA: return rja;
    case Paradigm::IJA: return ija;
    case Paradigm::SA: return sa;
  }
  return rn;
}

// Earliest event satisfying a positive requirement; nullopt when unmet.
std::optional<double> first_match(Req req, const std::vector<ResponseEvent>& events,
                                  const std::optional<std::string>& target,
                                  const ScriptConfig& cfg) {
  auto is_look = [&](const ResponseEvent& ev, const std::string& roi) {
    return ev.kind == EventKind::LookAtObject && ev.roi == roi;
  };
  std::optional<double> best;
  auto consider = [&](const ResponseEvent& ev) {
    if (!best || ev.start_s < *best) best = ev.start_s;
  };
  switch (req) {
    case Req::LeaveAll: {
      std::optional<double> child, doctor, parent;
      for (const auto& ev : events) {
        if (ev.kind != EventKind::Leave) continue;
        auto& slot = ev.person.role == Role::Child    ? child
                     : ev.person.role == Role::Doctor ? doctor
                                                      : parent;
        if (!slot || ev.start_s < *slot) slot = ev.start_s;
      }
      if (child && doctor && parent) return std::min({*child, *doctor, *parent});
      return std::optional<double>{};
    }
    default:
      break;
  }
  for (const auto& ev : events) {
    switch (req) {
      case Req::LookTarget:
        if (target && is_look(ev, *target)) consider(ev);
        break;
      case Req::SustainedLookTarget:
        if (target && is_look(ev, *target) && ev.duration_s() >= cfg.keep_looking_s)
          consider(ev);
        break;
      case Req::LookDoctor:
        if (is_look(ev, cfg.doctor_roi)) consider(ev);
        break;
      case Req::LookDoor:
        if (is_look(ev, cfg.door_roi)) consider(ev);
        break;
      case Req::LookWrong:
        if (ev.kind == EventKind::LookAtObject && ev.roi != cfg.doctor_roi &&
            (!target || ev.roi != *target))
          consider(ev);
        break;
      case Req::PointTargetPrecise:
        if (ev.kind == EventKind::PointAtObject && target && ev.roi == *target && ev.precise)
          consider(ev);
        break;
      case Req::PointTargetRough:
        if (ev.kind == EventKind::PointAtObject && target && ev.roi == *target && !ev.precise)
          consider(ev);
        break;
      case Req::PointTarget:
        if (ev.kind == EventKind::PointAtObject && target && ev.roi == *target) consider(ev);
        break;
      case Req::Smile:
        if (ev.kind == EventKind::Smile) consider(ev);
        break;
      case Req::SpeakChild:
        if (ev.kind == EventKind::Speak && ev.person.role == Role::Child) consider(ev);
        break;
      case Req::Chase:
        if (ev.kind == EventKind::Chase) consider(ev);
        break;
      default:
        break;
    }
  }
  return best;
}

// Evaluates one rule: met requirements anchor at the earliest qualifying
// event; negative requirements must find nothing.
std::optional<double> evaluate_rule(const Rule& rule, const std::vector<ResponseEvent>& events,
                                    const std::optional<std::string>& target,
                                    const ScriptConfig& cfg) {
  std::optional<double> anchor;
  for (Req req : rule.reqs) {
    if (req == Req::NotLookDoctor) {
      if (first_match(Req::LookDoctor, events, target, cfg)) return std::nullopt;
      continue;
    }
    if (req == Req::NotSmile) {
      if (first_match(Req::Smile, events, target, cfg)) return std::nullopt;
      continue;
    }
    auto t = first_match(req, events, target, cfg);
    if (!t) return std::nullopt;
    if (!anchor || *t < *anchor) anchor = *t;
  }
  return anchor;
}

}  // namespace

std::vector<ResponseMatch> classify_response(Paradigm paradigm,
                                             const std::vector<ResponseEvent>& window_events,
                                             const std::optional<std::string>& target_roi,
                                             double window_end_s, const ScriptConfig& cfg) {
  struct Candidate {
    int index;
    std::size_t n_reqs;
    double anchor;
  };
  std::vector<Candidate> candidates;
  for (const auto& rule : rules_for(paradigm)) {
    auto anchor = evaluate_rule(rule, window_events, target_roi, cfg);
    if (anchor) candidates.push_back({rule.response_index, rule.reqs.size(), *anchor});
  }
  if (candidates.empty()) {
    return {{fallback_index(paradigm), window_end_s}};
  }
  if (single_response(paradigm)) {
    // Most specific rule wins; ties go to the lower index.
    const Candidate* best = &candidates[0];
    for (const auto& c : candidates) {
      if (c.n_reqs > best->n_reqs || (c.n_reqs == best->n_reqs && c.index < best->index)) {
        best = &c;
      }
    }
    return {{best->index, best->anchor}};
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.anchor != b.anchor) return a.anchor < b.anchor;
    return a.index < b.index;
  });
  std::vector<ResponseMatch> out;
  for (const auto& c : candidates) {
    if (static_cast<int>(out.size()) >= cfg.max_response_lines) break;
    out.push_back({c.index, c.anchor});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Document assembly

namespace {

int origin_rank(LineOrigin origin) {
  switch (origin) {
    case LineOrigin::Preamble: return 0;
    case LineOrigin::Instruction: return 1;
    case LineOrigin::Response: return 2;
    case LineOrigin::Emotion: return 3;
  }
  return 4;
}

}  // namespace

std::string make_preamble(const SessionManifest& manifest) {
  std::string gender = manifest.child_gender == Gender::Male ? "boy" : "girl";
  return "The child is a " + std::to_string(manifest.child_age_months) + "-month-old " + gender +
         ". The following is a time-ordered record of a clinical observation session.";
}

void insert_line(ScriptDocument& doc, ScriptLine line) {
  auto pos = std::upper_bound(doc.lines.begin(), doc.lines.end(), line,
                              [](const ScriptLine& a, const ScriptLine& b) {
                                if (a.timestamp_s != b.timestamp_s)
                                  return a.timestamp_s < b.timestamp_s;
                                return origin_rank(a.origin) < origin_rank(b.origin);
                              });
  doc.lines.insert(pos, std::move(line));
}

ScriptDocument compile_script(const std::vector<ResponseEvent>& events,
                              const SessionManifest& manifest, const ScriptConfig& cfg,
                              const TemplateTable& templates) {
  ScriptDocument doc;
  doc.case_id = manifest.case_id;
  doc.preamble = make_preamble(manifest);

  ScriptLine preamble_line;
  preamble_line.timestamp_s = 0.0;
  preamble_line.text = doc.preamble;
  preamble_line.origin = LineOrigin::Preamble;
  doc.lines.push_back(preamble_line);

  for (const auto& seg : manifest.paradigms) {
    for (const auto& ins : seg.instructions) {
      ScriptLine iline;
      iline.timestamp_s = ins.time_s;
      iline.text = templates.instruction_text(ins.session_code);
      iline.origin = LineOrigin::Instruction;
      iline.session_code = ins.session_code;
      insert_line(doc, std::move(iline));

      // Response window, clipped to the paradigm interval.
      double window_end = std::min(ins.time_s + cfg.window_for(seg.paradigm), seg.end_s);
      std::vector<ResponseEvent> window;
      for (const auto& ev : events) {
        if (ev.start_s >= ins.time_s && ev.start_s < window_end) window.push_back(ev);
      }
      for (const auto& match :
           classify_response(seg.paradigm, window, ins.target_roi, window_end, cfg)) {
        ScriptLine rline;
        rline.timestamp_s = match.anchor_s;
        rline.text = templates.response_text(seg.paradigm, match.response_index);
        rline.origin = LineOrigin::Response;
        rline.paradigm = seg.paradigm;
        rline.response_index = match.response_index;
        insert_line(doc, std::move(rline));
      }
    }
  }
  return doc;
}

std::string render_script(const ScriptDocument& doc) {
  std::ostringstream out;
  for (const auto& line : doc.lines) {
    if (line.origin == LineOrigin::Preamble) {
      out << line.text << "\n";
    } else {
      out << format_timestamp(line.timestamp_s) << " " << line.text << "\n";
    }
  }
  return out.str();
}

}  // namespace scbu
