#include "scbu/behavior_log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "scbu/jsonio.hpp"

namespace scbu {

namespace {

constexpr const char* kSchemaVersion = "1.0";

const std::map<std::string, Paradigm>& session_code_table() {
  static const std::map<std::string, Paradigm> table = {
      {"P1", Paradigm::RN},  {"P2", Paradigm::RN},  {"P3", Paradigm::SS},
      {"P4", Paradigm::SS},  {"P5", Paradigm::SS},  {"P6", Paradigm::SS},
      {"P7", Paradigm::IG},  {"P8", Paradigm::IG},  {"P9", Paradigm::IG},
      {"P10", Paradigm::IG}, {"P11", Paradigm::RJA}, {"P12", Paradigm::IJA},
      {"P13", Paradigm::IJA}, {"P14", Paradigm::IJA}, {"P15", Paradigm::SA},
      {"P16", Paradigm::SA},
  };
  return table;
}

}  // namespace

const char* to_string(Role role) {
  switch (role) {
    case Role::Child: return "child";
    case Role::Doctor: return "doctor";
    case Role::Parent: return "parent";
  }
  return "?";
}

const char* to_string(Expression e) {
  switch (e) {
    case Expression::Neutral: return "neutral";
    case Expression::Happy: return "happy";
    case Expression::Sad: return "sad";
  }
  return "?";
}

const char* to_string(Gesture g) {
  switch (g) {
    case Gesture::None: return "none";
    case Gesture::Pointing: return "pointing";
    case Gesture::HandRaise: return "hand_raise";
    case Gesture::Other: return "other";
  }
  return "?";
}

const char* to_string(Paradigm p) {
  switch (p) {
    case Paradigm::RN: return "RN";
    case Paradigm::SS: return "SS";
    case Paradigm::IG: return "IG";
    case Paradigm::RJA: return "RJA";
    case Paradigm::IJA: return "IJA";
    case Paradigm::SA: return "SA";
  }
  return "?";
}

const char* to_string(Gender g) {
  switch (g) {
    case Gender::Male: return "male";
    case Gender::Female: return "female";
  }
  return "?";
}

Role role_from_string(const std::string& s) {
  if (s == "child") return Role::Child;
  if (s == "doctor") return Role::Doctor;
  if (s == "parent") return Role::Parent;
  throw SchemaError("unknown role '" + s + "'");
}

Expression expression_from_string(const std::string& s) {
  if (s == "neutral") return Expression::Neutral;
  if (s == "happy") return Expression::Happy;
  if (s == "sad") return Expression::Sad;
  throw SchemaError("unknown expression '" + s + "'");
}

Gesture gesture_from_string(const std::string& s) {
  if (s == "none") return Gesture::None;
  if (s == "pointing") return Gesture::Pointing;
  if (s == "hand_raise") return Gesture::HandRaise;
  if (s == "other") return Gesture::Other;
  throw SchemaError("unknown gesture '" + s + "'");
}

Paradigm paradigm_from_string(const std::string& s) {
  if (s == "RN") return Paradigm::RN;
  if (s == "SS") return Paradigm::SS;
  if (s == "IG") return Paradigm::IG;
  if (s == "RJA") return Paradigm::RJA;
  if (s == "IJA") return Paradigm::IJA;
  if (s == "SA") return Paradigm::SA;
  throw ManifestError("unknown paradigm '" + s + "'");
}

Gender gender_from_string(const std::string& s) {
  if (s == "male") return Gender::Male;
  if (s == "female") return Gender::Female;
  throw ManifestError("unknown gender '" + s + "'");
}

Paradigm paradigm_for_session_code(const std::string& code) {
  auto it = session_code_table().find(code);
  if (it == session_code_table().end()) {
    throw ManifestError("unknown session code '" + code + "'");
  }
  return it->second;
}

bool session_code_requires_target(const std::string& code) {
  Paradigm p = paradigm_for_session_code(code);
  return p == Paradigm::IG || p == Paradigm::RJA || p == Paradigm::IJA;
}

const PersonState* FrameRecord::find(Role role) const {
  for (const auto& ps : persons) {
    if (ps.person.role == role) return &ps;
  }
  return nullptr;
}

const PersonId& SessionManifest::child() const {
  for (const auto& p : persons) {
    if (p.role == Role::Child) return p;
  }
  throw ManifestError("manifest declares no child");
}

bool SessionManifest::has_roi(const std::string& name) const {
  return find_roi(name) != nullptr;
}

const ObjectRoi* SessionManifest::find_roi(const std::string& name) const {
  for (const auto& roi : object_rois) {
    if (roi.name == name) return &roi;
  }
  return nullptr;
}

std::vector<InstructionEvent> SessionManifest::all_instructions() const {
  std::vector<InstructionEvent> out;
  for (const auto& seg : paradigms) {
    out.insert(out.end(), seg.instructions.begin(), seg.instructions.end());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.time_s < b.time_s || (a.time_s == b.time_s && a.session_code < b.session_code);
  });
  return out;
}

// ---------------------------------------------------------------------------
// JSON encode

namespace {

ojson person_id_to_json(const PersonId& p) {
  ojson j;
  j["role"] = to_string(p.role);
  j["label"] = p.label;
  return j;
}

PersonId person_id_from_json(const ojson& j, const std::string& ctx) {
  reject_unknown_keys(j, {"role", "label"}, ctx);
  PersonId p;
  p.role = role_from_string(require_string(j, "role", ctx));
  p.label = require_string(j, "label", ctx);
  if (p.label.empty()) throw SchemaError(ctx + ": empty person label");
  return p;
}

ojson person_state_to_json(const PersonState& ps) {
  ojson j;
  j["person"] = person_id_to_json(ps.person);
  j["present"] = ps.present;
  if (ps.position_px) j["position_px"] = {(*ps.position_px)[0], (*ps.position_px)[1]};
  switch (ps.gaze_target.kind) {
    case GazeTarget::Kind::None:
      break;
    case GazeTarget::Kind::ObjectRoi: {
      ojson g;
      g["kind"] = "object";
      g["name"] = ps.gaze_target.roi;
      j["gaze_target"] = std::move(g);
      break;
    }
    case GazeTarget::Kind::Person: {
      ojson g;
      g["kind"] = "person";
      g["role"] = to_string(ps.gaze_target.person.role);
      g["label"] = ps.gaze_target.person.label;
      j["gaze_target"] = std::move(g);
      break;
    }
  }
  if (ps.gaze_angle_deg) j["gaze_angle_deg"] = *ps.gaze_angle_deg;
  j["expression"] = to_string(ps.expression);
  j["valence"] = ps.valence;
  j["arousal"] = ps.arousal;
  j["gesture"] = to_string(ps.gesture);
  if (ps.pointing_target) j["pointing_target"] = *ps.pointing_target;
  return j;
}

PersonState person_state_from_json(const ojson& j, const std::string& ctx) {
  reject_unknown_keys(j,
                      {"person", "present", "position_px", "gaze_target", "gaze_angle_deg",
                       "expression", "valence", "arousal", "gesture", "pointing_target"},
                      ctx);
  PersonState ps;
  ps.person = person_id_from_json(require_field(j, "person", ctx), ctx + ".person");
  ps.present = require_bool(j, "present", ctx);
  if (auto it = j.find("position_px"); it != j.end()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
      throw SchemaError(ctx + ": position_px must be [x, y]");
    }
    ps.position_px = std::array<double, 2>{(*it)[0].get<double>(), (*it)[1].get<double>()};
  }
  if (auto it = j.find("gaze_target"); it != j.end()) {
    const std::string gctx = ctx + ".gaze_target";
    std::string kind = require_string(*it, "kind", gctx);
    if (kind == "object") {
      reject_unknown_keys(*it, {"kind", "name"}, gctx);
      ps.gaze_target = GazeTarget::object(require_string(*it, "name", gctx));
    } else if (kind == "person") {
      reject_unknown_keys(*it, {"kind", "role", "label"}, gctx);
      PersonId p;
      p.role = role_from_string(require_string(*it, "role", gctx));
      p.label = require_string(*it, "label", gctx);
      ps.gaze_target = GazeTarget::at_person(std::move(p));
    } else {
      throw SchemaError(gctx + ": unknown kind '" + kind + "'");
    }
  }
  if (auto it = j.find("gaze_angle_deg"); it != j.end()) {
    if (!it->is_number()) throw SchemaError(ctx + ": gaze_angle_deg must be a number");
    ps.gaze_angle_deg = it->get<double>();
  }
  ps.expression = expression_from_string(require_string(j, "expression", ctx));
  ps.valence = require_double(j, "valence", ctx);
  ps.arousal = require_double(j, "arousal", ctx);
  ps.gesture = gesture_from_string(require_string(j, "gesture", ctx));
  if (auto it = j.find("pointing_target"); it != j.end()) {
    if (!it->is_string()) throw SchemaError(ctx + ": pointing_target must be a string");
    ps.pointing_target = it->get<std::string>();
  }
  return ps;
}

void validate_person_state(const PersonState& ps, const SessionManifest& manifest,
                           long long frame_index) {
  const std::string ctx = "frame " + std::to_string(frame_index);
  if (ps.valence < -1.0 || ps.valence > 1.0) {
    throw SchemaError(ctx + ": valence " + std::to_string(ps.valence) + " outside [-1, 1]");
  }
  if (ps.arousal < -1.0 || ps.arousal > 1.0) {
    throw SchemaError(ctx + ": arousal " + std::to_string(ps.arousal) + " outside [-1, 1]");
  }
  if (ps.gaze_target.kind == GazeTarget::Kind::ObjectRoi) {
    if (!ps.gaze_angle_deg) {
      throw SchemaError(ctx + ": gaze at object ROI '" + ps.gaze_target.roi +
                        "' requires gaze_angle_deg");
    }
    if (!manifest.has_roi(ps.gaze_target.roi)) {
      throw SchemaError(ctx + ": gaze target ROI '" + ps.gaze_target.roi +
                        "' not declared in manifest");
    }
  }
  if (ps.pointing_target && ps.gesture != Gesture::Pointing) {
    throw SchemaError(ctx + ": pointing_target present but gesture is not pointing");
  }
  if (ps.pointing_target && !manifest.has_roi(*ps.pointing_target)) {
    throw SchemaError(ctx + ": pointing target ROI '" + *ps.pointing_target +
                      "' not declared in manifest");
  }
  bool declared = false;
  for (const auto& p : manifest.persons) {
    if (p == ps.person) declared = true;
  }
  if (!declared) {
    throw SchemaError(ctx + ": person '" + ps.person.label + "' not declared in manifest");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Serialization

std::string serialize_manifest(const SessionManifest& m) {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["case_id"] = m.case_id;
  j["child_gender"] = to_string(m.child_gender);
  j["child_age_months"] = m.child_age_months;
  j["fps"] = m.fps;
  ojson persons = ojson::array();
  for (const auto& p : m.persons) persons.push_back(person_id_to_json(p));
  j["persons"] = std::move(persons);
  ojson rois = ojson::array();
  for (const auto& r : m.object_rois) {
    ojson rj;
    rj["name"] = r.name;
    if (r.position_px) rj["position_px"] = {(*r.position_px)[0], (*r.position_px)[1]};
    rois.push_back(std::move(rj));
  }
  j["object_rois"] = std::move(rois);
  ojson paradigms = ojson::array();
  for (const auto& seg : m.paradigms) {
    ojson sj;
    sj["paradigm"] = to_string(seg.paradigm);
    sj["start_s"] = seg.start_s;
    sj["end_s"] = seg.end_s;
    ojson instrs = ojson::array();
    for (const auto& ins : seg.instructions) {
      ojson ij;
      ij["session_code"] = ins.session_code;
      ij["time_s"] = ins.time_s;
      if (ins.target_roi) ij["target_roi"] = *ins.target_roi;
      instrs.push_back(std::move(ij));
    }
    sj["instructions"] = std::move(instrs);
    paradigms.push_back(std::move(sj));
  }
  j["paradigms"] = std::move(paradigms);
  return j.dump(2) + "\n";
}

std::string serialize_log(const BehaviorLog& log) {
  std::ostringstream out;
  ojson header;
  header["type"] = "header";
  header["schema_version"] = kSchemaVersion;
  header["case_id"] = log.case_id;
  out << header.dump() << "\n";
  for (const auto& frame : log.frames) {
    ojson j;
    j["type"] = "frame";
    j["i"] = frame.frame_index;
    ojson persons = ojson::array();
    for (const auto& ps : frame.persons) persons.push_back(person_state_to_json(ps));
    j["persons"] = std::move(persons);
    out << j.dump() << "\n";
  }
  std::vector<SpeechSegment> speech = log.speech;
  std::stable_sort(speech.begin(), speech.end(), [](const auto& a, const auto& b) {
    if (a.start_s != b.start_s) return a.start_s < b.start_s;
    if (a.end_s != b.end_s) return a.end_s < b.end_s;
    return a.speaker.label < b.speaker.label;
  });
  for (const auto& seg : speech) {
    ojson j;
    j["type"] = "speech";
    j["speaker"] = person_id_to_json(seg.speaker);
    j["start_s"] = seg.start_s;
    j["end_s"] = seg.end_s;
    j["text"] = seg.text;
    out << j.dump() << "\n";
  }
  return out.str();
}

void save_log(const Session& session, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "manifest.json", std::ios::binary);
    f << serialize_manifest(session.manifest);
  }
  {
    std::ofstream f(dir / "log.jsonl", std::ios::binary);
    f << serialize_log(session.log);
  }
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

SessionManifest parse_manifest(const std::string& text, const std::string& ctx) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestError(ctx + ": invalid JSON: " + e.what());
  }
  reject_unknown_keys<ManifestError>(j,
                                     {"schema_version", "case_id", "child_gender",
                                      "child_age_months", "fps", "persons", "object_rois",
                                      "paradigms"},
                                     ctx);
  check_schema_version<ManifestError>(j, ctx);
  SessionManifest m;
  m.case_id = require_string<ManifestError>(j, "case_id", ctx);
  m.child_gender = gender_from_string(require_string<ManifestError>(j, "child_gender", ctx));
  m.child_age_months = static_cast<int>(require_int<ManifestError>(j, "child_age_months", ctx));
  if (m.child_age_months <= 0) throw ManifestError(ctx + ": child_age_months must be positive");
  m.fps = require_double<ManifestError>(j, "fps", ctx);
  if (m.fps <= 0) throw ManifestError(ctx + ": fps must be positive");

  const ojson& persons = require_field<ManifestError>(j, "persons", ctx);
  if (!persons.is_array()) throw ManifestError(ctx + ": persons must be an array");
  for (const auto& pj : persons) {
    try {
      m.persons.push_back(person_id_from_json(pj, ctx + ".persons"));
    } catch (const SchemaError& e) {
      throw ManifestError(e.what());
    }
  }

  const ojson& rois = require_field<ManifestError>(j, "object_rois", ctx);
  if (!rois.is_array()) throw ManifestError(ctx + ": object_rois must be an array");
  for (const auto& rj : rois) {
    reject_unknown_keys<ManifestError>(rj, {"name", "position_px"}, ctx + ".object_rois");
    ObjectRoi roi;
    roi.name = require_string<ManifestError>(rj, "name", ctx + ".object_rois");
    if (roi.name.empty()) throw ManifestError(ctx + ": empty ROI name");
    if (auto it = rj.find("position_px"); it != rj.end()) {
      if (!it->is_array() || it->size() != 2) {
        throw ManifestError(ctx + ": ROI position_px must be [x, y]");
      }
      roi.position_px = std::array<double, 2>{(*it)[0].get<double>(), (*it)[1].get<double>()};
    }
    m.object_rois.push_back(std::move(roi));
  }

  const ojson& paradigms = require_field<ManifestError>(j, "paradigms", ctx);
  if (!paradigms.is_array()) throw ManifestError(ctx + ": paradigms must be an array");
  for (const auto& sj : paradigms) {
    reject_unknown_keys<ManifestError>(sj, {"paradigm", "start_s", "end_s", "instructions"},
                                       ctx + ".paradigms");
    ParadigmSegment seg;
    seg.paradigm = paradigm_from_string(require_string<ManifestError>(sj, "paradigm", ctx));
    seg.start_s = require_double<ManifestError>(sj, "start_s", ctx);
    seg.end_s = require_double<ManifestError>(sj, "end_s", ctx);
    const ojson& instrs = require_field<ManifestError>(sj, "instructions", ctx);
    if (!instrs.is_array()) throw ManifestError(ctx + ": instructions must be an array");
    for (const auto& ij : instrs) {
      reject_unknown_keys<ManifestError>(ij, {"session_code", "time_s", "target_roi"},
                                         ctx + ".instructions");
      InstructionEvent ins;
      ins.session_code = require_string<ManifestError>(ij, "session_code", ctx);
      ins.time_s = require_double<ManifestError>(ij, "time_s", ctx);
      if (auto it = ij.find("target_roi"); it != ij.end()) {
        ins.target_roi = it->get<std::string>();
      }
      seg.instructions.push_back(std::move(ins));
    }
    m.paradigms.push_back(std::move(seg));
  }
  return m;
}

BehaviorLog parse_log_text(const std::string& text, double fps, const std::string& ctx) {
  BehaviorLog log;
  log.fps = fps;
  std::istringstream in(text);
  std::string line;
  long long line_no = 0;
  bool saw_header = false;
  long long expect_frame = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(ctx + " line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    const std::string lctx = ctx + " line " + std::to_string(line_no);
    std::string type = require_string(j, "type", lctx);
    if (type == "header") {
      if (saw_header) throw SchemaError(lctx + ": duplicate header");
      reject_unknown_keys(j, {"type", "schema_version", "case_id"}, lctx);
      check_schema_version(j, lctx);
      log.case_id = require_string(j, "case_id", lctx);
      saw_header = true;
    } else if (type == "frame") {
      if (!saw_header) throw SchemaError(lctx + ": frame before header");
      reject_unknown_keys(j, {"type", "i", "persons"}, lctx);
      FrameRecord frame;
      frame.frame_index = require_int(j, "i", lctx);
      if (frame.frame_index != expect_frame) {
        throw SchemaError(lctx + ": frame index " + std::to_string(frame.frame_index) +
                          " not contiguous (expected " + std::to_string(expect_frame) + ")");
      }
      ++expect_frame;
      frame.timestamp_s = static_cast<double>(frame.frame_index) / fps;
      const ojson& persons = require_field(j, "persons", lctx);
      if (!persons.is_array()) throw SchemaError(lctx + ": persons must be an array");
      for (const auto& pj : persons) {
        frame.persons.push_back(person_state_from_json(pj, lctx));
      }
      log.frames.push_back(std::move(frame));
    } else if (type == "speech") {
      if (!saw_header) throw SchemaError(lctx + ": speech before header");
      reject_unknown_keys(j, {"type", "speaker", "start_s", "end_s", "text"}, lctx);
      SpeechSegment seg;
      seg.speaker = person_id_from_json(require_field(j, "speaker", lctx), lctx + ".speaker");
      seg.start_s = require_double(j, "start_s", lctx);
      seg.end_s = require_double(j, "end_s", lctx);
      seg.text = require_string(j, "text", lctx);
      log.speech.push_back(std::move(seg));
    } else {
      throw SchemaError(lctx + ": unknown record type '" + type + "'");
    }
  }
  if (!saw_header) throw SchemaError(ctx + ": missing header line");
  return log;
}

}  // namespace

void validate_session(const BehaviorLog& log, const SessionManifest& manifest) {
  // Exactly one child.
  int child_count = 0;
  for (const auto& p : manifest.persons) {
    if (p.role == Role::Child) ++child_count;
  }
  if (child_count != 1) {
    throw ManifestError("manifest must declare exactly one child, found " +
                        std::to_string(child_count));
  }
  std::set<std::string> roi_names;
  for (const auto& roi : manifest.object_rois) {
    if (!roi_names.insert(roi.name).second) {
      throw ManifestError("duplicate ROI '" + roi.name + "'");
    }
  }
  if (log.case_id != manifest.case_id) {
    throw ManifestError("log case_id '" + log.case_id + "' does not match manifest '" +
                        manifest.case_id + "'");
  }

  const double duration = log.duration_s();
  double prev_timestamp = -1.0;
  for (const auto& frame : log.frames) {
    // timestamp_s is derived, but the contract is re-checked here so parsers
    // built elsewhere cannot smuggle in drifting clocks.
    double expected = static_cast<double>(frame.frame_index) / log.fps;
    if (std::abs(frame.timestamp_s - expected) > 1e-9) {
      throw SchemaError("frame " + std::to_string(frame.frame_index) +
                        ": timestamp_s deviates from frame_index / fps");
    }
    if (frame.timestamp_s <= prev_timestamp) {
      throw SchemaError("frame " + std::to_string(frame.frame_index) +
                        ": timestamps not strictly increasing");
    }
    prev_timestamp = frame.timestamp_s;
    std::set<std::pair<int, std::string>> seen;
    for (const auto& ps : frame.persons) {
      if (!seen.insert({static_cast<int>(ps.person.role), ps.person.label}).second) {
        throw SchemaError("frame " + std::to_string(frame.frame_index) +
                          ": duplicate person '" + ps.person.label + "'");
      }
      validate_person_state(ps, manifest, frame.frame_index);
    }
  }

  // Speech: ordered per speaker, non-overlapping, inside the log.
  std::map<std::string, std::vector<std::pair<double, double>>> by_speaker;
  for (const auto& seg : log.speech) {
    if (!(seg.start_s < seg.end_s)) {
      throw SchemaError("speech segment of '" + seg.speaker.label +
                        "' must satisfy start_s < end_s");
    }
    if (seg.start_s < 0 || seg.end_s > duration + 1e-9) {
      throw SchemaError("speech segment of '" + seg.speaker.label + "' outside log duration");
    }
    by_speaker[seg.speaker.label].push_back({seg.start_s, seg.end_s});
  }
  for (auto& [label, spans] : by_speaker) {
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i].first < spans[i - 1].second) {
        throw SchemaError("speech segments of '" + label + "' overlap");
      }
    }
  }

  // Paradigm schedule.
  std::vector<std::pair<double, double>> intervals;
  for (const auto& seg : manifest.paradigms) {
    if (!(seg.start_s < seg.end_s)) {
      throw ManifestError(std::string("paradigm ") + to_string(seg.paradigm) +
                          ": start_s must precede end_s");
    }
    if (seg.start_s < 0 || seg.end_s > duration + 1e-9) {
      throw ManifestError(std::string("paradigm ") + to_string(seg.paradigm) +
                          " outside log duration");
    }
    intervals.push_back({seg.start_s, seg.end_s});
    for (const auto& ins : seg.instructions) {
      Paradigm expected = paradigm_for_session_code(ins.session_code);
      if (expected != seg.paradigm) {
        throw ManifestError("instruction " + ins.session_code + " not valid inside paradigm " +
                            to_string(seg.paradigm));
      }
      if (ins.time_s < seg.start_s || ins.time_s > seg.end_s) {
        throw ManifestError("instruction " + ins.session_code + " at " +
                            std::to_string(ins.time_s) + "s outside its paradigm interval");
      }
      if (session_code_requires_target(ins.session_code)) {
        if (!ins.target_roi) {
          throw ManifestError("instruction " + ins.session_code + " requires a target_roi");
        }
      }
      if (ins.target_roi && !manifest.has_roi(*ins.target_roi)) {
        throw ManifestError("instruction " + ins.session_code + " targets undeclared ROI '" +
                            *ins.target_roi + "'");
      }
    }
  }
  std::sort(intervals.begin(), intervals.end());
  for (std::size_t i = 1; i < intervals.size(); ++i) {
    if (intervals[i].first < intervals[i - 1].second) {
      throw ManifestError("paradigm intervals overlap");
    }
  }
}

Session load_log_files(const std::filesystem::path& log_path,
                       const std::filesystem::path& manifest_path) {
  auto read_file = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw SchemaError("cannot open " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  Session s;
  s.manifest = parse_manifest(read_file(manifest_path), manifest_path.filename().string());
  s.log = parse_log_text(read_file(log_path), s.manifest.fps, log_path.filename().string());
  validate_session(s.log, s.manifest);
  return s;
}

Session load_log(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) {
    return load_log_files(path / "log.jsonl", path / "manifest.json");
  }
  return load_log_files(path, path.parent_path() / "manifest.json");
}

std::vector<std::pair<double, double>> child_valence_series(const BehaviorLog& log) {
  std::vector<std::pair<double, double>> series;
  bool ever_present = false;
  for (const auto& frame : log.frames) {
    const PersonState* child = frame.find(Role::Child);
    if (child && child->present) {
      ever_present = true;
      series.push_back({frame.timestamp_s, child->valence});
    }
  }
  if (!ever_present) throw NoChildError("child never appears in log '" + log.case_id + "'");
  return series;
}

}  // namespace scbu
