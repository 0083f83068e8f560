// response_parser.hpp
//
// Scans a validated behavior log and emits discrete, timestamped response
// events (look, point, smile, speak, leave, chase), then measures response
// latency and duration against the instructions in the manifest.
//
// Every detection threshold is a heuristic over the frame stream and lives
// in ParserConfig so sweeps can vary them. The chase detector in particular
// is a motion proxy (displacement toward the door anchor), not a tracker.
#pragma once

#include <string>
#include <vector>

#include "scbu/behavior_log.hpp"
#include "scbu/jsonio.hpp"

namespace scbu {

struct ParserConfig {
  // LookAtObject: gaze within look_angle_deg of the target, sustained at
  // least look_dwell_s; a break longer than look_break_s ends the event.
  double look_angle_deg = 15.0;
  double look_dwell_s = 0.3;
  double look_break_s = 0.2;

  // PointAtObject: pointing gesture with a target, sustained at least
  // point_dwell_s; pointing counts as precise when the gaze angle to the
  // same target is at most point_precise_deg.
  double point_dwell_s = 0.2;
  double point_precise_deg = 10.0;

  // Smile: happy expression sustained at least smile_dwell_s.
  double smile_dwell_s = 0.5;

  // Leave: a previously present person absent for at least leave_gap_s.
  double leave_gap_s = 1.0;

  // Chase: child moving toward the door anchor faster than
  // chase_speed_px_s, sustained at least chase_dwell_s, after a Leave.
  double chase_speed_px_s = 50.0;
  double chase_dwell_s = 0.5;
  std::string door_roi = "door";
};

enum class EventKind { LookAtObject, PointAtObject, Smile, Speak, Leave, Chase };

const char* to_string(EventKind k);

struct ResponseEvent {
  EventKind kind = EventKind::LookAtObject;
  double start_s = 0.0;
  double end_s = 0.0;
  PersonId person;        // actor: child for look/point/smile/chase, the
                          // speaker for speak, the leaver for leave
  std::string roi;        // look/point target
  std::string text;       // speak only
  bool precise = false;   // point only: gaze confirms the pointing target

  double duration_s() const { return end_s - start_s; }
};

enum class MeasureKind { Look, Point, Chase };

const char* to_string(MeasureKind k);

struct ResponseMeasure {
  MeasureKind event_kind = MeasureKind::Look;
  double latency_s = 0.0;   // event start minus instruction time
  double duration_s = 0.0;  // event end minus event start
};

// All response events in the log, sorted by start_s. Only kinds permitted
// in the enclosing paradigm are emitted (look everywhere; point in IG and
// IJA; smile in SS; speak in RN; leave and chase in SA). Events that start
// outside every declared paradigm interval are dropped.
std::vector<ResponseEvent> parse_events(const BehaviorLog& log, const SessionManifest& manifest,
                                        const ParserConfig& cfg = {});

// Pairs every instruction with the first later event of each measurable
// kind (look, point, chase). Instructions with no later event of a kind
// produce no measure for that kind.
std::vector<ResponseMeasure> measure_responses(const std::vector<ResponseEvent>& events,
                                               const SessionManifest& manifest);

// Audit export: one object per event, stable field order.
ojson events_to_json(const std::vector<ResponseEvent>& events);

}  // namespace scbu
