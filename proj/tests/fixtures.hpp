// Shared hand-built fixtures for the unit tests.
#pragma once

#include <string>

#include "scbu/behavior_log.hpp"

namespace scbu::testing {

inline PersonId child() { return {Role::Child, "C"}; }
inline PersonId doctor() { return {Role::Doctor, "D"}; }
inline PersonId parent() { return {Role::Parent, "M"}; }

inline PersonState neutral_state(const PersonId& who) {
  PersonState ps;
  ps.person = who;
  ps.present = true;
  ps.expression = Expression::Neutral;
  ps.valence = 0.0;
  ps.arousal = 0.0;
  ps.gesture = Gesture::None;
  return ps;
}

// A minimal manifest: one child, doctor, parent; two ROIs; a single RN
// paradigm covering the whole log.
inline SessionManifest basic_manifest(double fps, double duration_s,
                                      const std::string& case_id = "case-001") {
  SessionManifest m;
  m.case_id = case_id;
  m.child_gender = Gender::Male;
  m.child_age_months = 30;
  m.fps = fps;
  m.persons = {child(), doctor(), parent()};
  m.object_rois = {{"flower", std::array<double, 2>{100.0, 50.0}},
                   {"door", std::array<double, 2>{640.0, 200.0}}};
  ParadigmSegment seg;
  seg.paradigm = Paradigm::RN;
  seg.start_s = 0.0;
  seg.end_s = duration_s;
  seg.instructions = {{"P1", 0.0, std::nullopt}};
  m.paradigms = {seg};
  return m;
}

// A log of n frames where everyone sits still.
inline BehaviorLog basic_log(int n_frames, double fps, const std::string& case_id = "case-001") {
  BehaviorLog log;
  log.case_id = case_id;
  log.fps = fps;
  for (int i = 0; i < n_frames; ++i) {
    FrameRecord f;
    f.frame_index = i;
    f.timestamp_s = i / fps;
    f.persons = {neutral_state(child()), neutral_state(doctor()), neutral_state(parent())};
    log.frames.push_back(std::move(f));
  }
  return log;
}

inline Session basic_session(int n_frames = 10, double fps = 5.0) {
  Session s;
  s.log = basic_log(n_frames, fps);
  s.manifest = basic_manifest(fps, n_frames / fps);
  return s;
}

}  // namespace scbu::testing
