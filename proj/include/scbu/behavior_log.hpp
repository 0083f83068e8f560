// behavior_log.hpp — the behavioral-log data contract.
//
// A session is a pair of files: a manifest (one JSON document describing the
// child, the paradigm schedule, and the declared object ROIs) and a log
// (UTF-8 JSON Lines; a header line, then one frame record per line, then
// speech segments). Frame timestamps are derived as frame_index / fps, never
// stored. Everything is immutable after load and safe to share across
// threads.

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scbu/errors.hpp"

namespace scbu {

enum class Role { Child, Doctor, Parent };
enum class Expression { Neutral, Happy, Sad };
enum class Gesture { None, Pointing, HandRaise, Other };
enum class Paradigm { RN, SS, IG, RJA, IJA, SA };
enum class Gender { Male, Female };

const char* to_string(Role role);
const char* to_string(Expression e);
const char* to_string(Gesture g);
const char* to_string(Paradigm p);
const char* to_string(Gender g);

Role role_from_string(const std::string& s);
Expression expression_from_string(const std::string& s);
Gesture gesture_from_string(const std::string& s);
Paradigm paradigm_from_string(const std::string& s);
Gender gender_from_string(const std::string& s);

struct PersonId {
  Role role = Role::Child;
  std::string label;

  bool operator==(const PersonId&) const = default;
};

// Where a person's gaze lands: a declared object ROI, another person, or
// nothing trackable.
struct GazeTarget {
  enum class Kind { None, ObjectRoi, Person };

  Kind kind = Kind::None;
  std::string roi;  // set when kind == ObjectRoi
  PersonId person;  // set when kind == Person

  static GazeTarget none() { return {}; }
  static GazeTarget object(std::string name) {
    GazeTarget t;
    t.kind = Kind::ObjectRoi;
    t.roi = std::move(name);
    return t;
  }
  static GazeTarget at_person(PersonId p) {
    GazeTarget t;
    t.kind = Kind::Person;
    t.person = std::move(p);
    return t;
  }
};

struct PersonState {
  PersonId person;
  bool present = false;
  std::optional<std::array<double, 2>> position_px;
  GazeTarget gaze_target;
  // Angle between the gaze ray and the ray to the target ROI centroid.
  // Required whenever gaze_target is an object ROI.
  std::optional<double> gaze_angle_deg;
  Expression expression = Expression::Neutral;
  double valence = 0.0;  // in [-1, 1]
  double arousal = 0.0;  // in [-1, 1]
  Gesture gesture = Gesture::None;
  std::optional<std::string> pointing_target;  // only when gesture == Pointing
};

struct FrameRecord {
  long long frame_index = 0;
  double timestamp_s = 0.0;  // frame_index / fps
  std::vector<PersonState> persons;

  const PersonState* find(Role role) const;
};

struct SpeechSegment {
  PersonId speaker;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
};

struct BehaviorLog {
  std::string case_id;
  double fps = 0.0;
  std::vector<FrameRecord> frames;
  std::vector<SpeechSegment> speech;

  // End of the last frame interval.
  double duration_s() const {
    return fps > 0 ? static_cast<double>(frames.size()) / fps : 0.0;
  }
};

// Declared named entity (picture, door, toy, or the doctor when a paradigm
// treats them as a look target). The optional anchor point exists for the
// chase-motion heuristic only; identity is the key everywhere else.
struct ObjectRoi {
  std::string name;
  std::optional<std::array<double, 2>> position_px;
};

struct InstructionEvent {
  std::string session_code;  // P1..P16
  double time_s = 0.0;
  std::optional<std::string> target_roi;
};

struct ParadigmSegment {
  Paradigm paradigm = Paradigm::RN;
  double start_s = 0.0;
  double end_s = 0.0;
  std::vector<InstructionEvent> instructions;
};

struct SessionManifest {
  std::string case_id;
  Gender child_gender = Gender::Male;
  int child_age_months = 0;
  double fps = 0.0;
  std::vector<PersonId> persons;
  std::vector<ObjectRoi> object_rois;
  std::vector<ParadigmSegment> paradigms;

  const PersonId& child() const;
  bool has_roi(const std::string& name) const;
  const ObjectRoi* find_roi(const std::string& name) const;
  // All instructions across paradigms, sorted by time.
  std::vector<InstructionEvent> all_instructions() const;
};

struct Session {
  BehaviorLog log;
  SessionManifest manifest;
};

// Session-code schedule: which P-codes belong to which paradigm.
Paradigm paradigm_for_session_code(const std::string& code);
bool session_code_requires_target(const std::string& code);

// Loads and fully validates a session. `path` may be a session directory
// (containing manifest.json and log.jsonl) or the log file itself with
// manifest.json alongside. Throws SchemaError / ManifestError.
Session load_log(const std::filesystem::path& path);
Session load_log_files(const std::filesystem::path& log_path,
                       const std::filesystem::path& manifest_path);

// Canonical serialization (what save_log writes; load∘save is identity).
std::string serialize_log(const BehaviorLog& log);
std::string serialize_manifest(const SessionManifest& manifest);
void save_log(const Session& session, const std::filesystem::path& dir);

// In-memory validation of every invariant; load_log calls this.
void validate_session(const BehaviorLog& log, const SessionManifest& manifest);

// One (timestamp, valence) sample per frame in which the child is present.
// Throws NoChildError if the child never appears.
std::vector<std::pair<double, double>> child_valence_series(const BehaviorLog& log);

}  // namespace scbu
